#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpd/changemodel.hpp"
#include "cpd/detectors.hpp"
#include "cpd/harness.hpp"

namespace cpd {

struct ModelSpec {
    std::string family = "gaussian";  // gaussian | bernoulli | poisson | exponential
    double mean0 = 0.0;
    double sigma = 1.0;
    double p0 = 0.5;
    double rate0 = 1.0;
    std::optional<double> theta_lo;
    std::optional<double> theta_hi;
    double delta_min = 0.1;
};

struct DetectorSpec {
    std::string kind;  // cusum sr glr wl_glr shewhart_glr score wl_cusum e_detector mmd zfield
    std::string id;
    std::optional<double> b;
    std::optional<double> theta;  // cusum/sr post-change value; defaults to post_theta
    std::size_t w = 16;
    EstimatorPolicy policy = EstimatorPolicy::WindowMle;
    double alpha = 0.1;
    std::optional<double> theta_init;
    // e-detector
    std::string increment_family;  // empty: chosen from the model family
    double gap_lo = 0.5;
    double gap_hi = 2.0;
    double eta = 2.0;
    // Explicit mixture; overrides the designed one when nonempty.
    std::vector<double> lambdas;
    std::vector<double> weights;  // empty: uniform
    // mmd scan
    std::size_t block = 50;
    std::size_t blocks = 5;
    std::string kernel = "gaussian";
    std::optional<double> bandwidth;
    std::size_t variance_reps = 500;
    std::size_t pool_size = 5000;
    std::string pool_csv;
};

struct BenchSpec {
    std::vector<std::uint64_t> t_grid{1000, 3000, 10000, 30000, 100000};
    std::vector<std::size_t> w_grid{8, 32, 128};
};

struct ExperimentConfig {
    ModelSpec model;
    double post_theta = 1.0;
    std::vector<DetectorSpec> detectors;
    std::optional<double> b;
    double gamma = 1000.0;
    std::vector<std::uint64_t> v_grid{1, 5, 20, 100};
    std::size_t reps = 1000;
    std::size_t edd_reps = 1000;
    std::uint64_t cap = 100000;
    std::uint64_t seed = 1;
    double tol = 0.1;
    std::size_t jobs = 0;
    BenchSpec bench;
};

// Throws ConfigError with a field-qualified message on malformed input.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

ChangeModel build_model(const ModelSpec& spec);

// Threshold for a detector: its own b, else the experiment-wide b.
std::optional<double> threshold_for(const ExperimentConfig& cfg, const DetectorSpec& spec);

// Detector factory for harness runs. Randomised setup shared by all
// replications (MMD bandwidth and null scale) is derived from `seed`.
DetectorFactory make_factory(const DetectorSpec& spec, const ChangeModel& model, double post_theta,
                             std::uint64_t seed);

// Window-parameterised builder for the complexity benchmark.
BenchTarget make_bench_target(const DetectorSpec& spec, const ChangeModel& model, double post_theta,
                              std::uint64_t seed);

}  // namespace cpd
