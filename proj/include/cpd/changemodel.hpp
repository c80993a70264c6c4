#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cpd/rng.hpp"

namespace cpd {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Change time meaning "no change ever happens".
inline constexpr std::uint64_t kNoChange = std::numeric_limits<std::uint64_t>::max();

// A Monte-Carlo or closed-form value with its standard error (0 when exact).
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

enum class Family { Gaussian, Bernoulli, ExponentialFamily };

std::string to_string(Family f);

// Closed interval of admissible post-change parameters. Infinite ends allowed.
struct ThetaSet {
    double lo = -kInf;
    double hi = kInf;

    bool contains(double theta) const noexcept { return theta >= lo && theta <= hi; }
    double clamp(double theta) const noexcept;
};

// One-parameter natural exponential family h(x) exp(eta T(x) - A(eta)).
// theta for this family is the natural parameter eta.
struct ExpFamilySpec {
    std::string name;
    double eta0 = 0.0;
    double eta_lo = -kInf;  // open natural-parameter space
    double eta_hi = kInf;
    std::function<double(double)> sufficient;       // T(x)
    std::function<double(double)> log_partition;    // A(eta)
    std::function<double(double)> mean;             // A'(eta)
    std::function<double(double)> variance;         // A''(eta)
    std::function<double(double)> mean_to_natural;  // (A')^{-1}, optional
    std::function<bool(double)> in_support;
    std::function<double(Rng&, double)> sample;  // draw given eta

    static ExpFamilySpec poisson(double rate0);
    static ExpFamilySpec exponential(double rate0);
};

// Pre-change density f0 with a parametric post-change family f1(., theta),
// theta in theta_set. Immutable after construction.
class ChangeModel {
public:
    static ChangeModel gaussian(double mean0, double sigma, ThetaSet theta_set = {},
                                double delta_min = 0.1);
    static ChangeModel bernoulli(double p0, ThetaSet theta_set = {1e-6, 1.0 - 1e-6},
                                 double delta_min = 0.1);
    static ChangeModel exponential_family(ExpFamilySpec spec, ThetaSet theta_set,
                                          double delta_min = 0.1);

    Family family() const noexcept { return family_; }
    std::string name() const;
    // theta0: the parameter value reproducing f0 (mean, p0, or eta0).
    double pre_theta() const noexcept { return theta0_; }
    double sigma() const noexcept { return sigma_; }
    const ThetaSet& theta_set() const noexcept { return theta_set_; }
    double delta_min() const noexcept { return delta_min_; }
    const ExpFamilySpec* exp_family() const noexcept;

    // log(f1(x, theta) / f0(x)).
    double log_lr(double x, double theta) const;
    double kl_divergence(double theta) const;
    // J0 = E_theta[log^2(f1/f0)].
    Estimate second_moment_loglr(double theta) const;

    double sample(Rng& rng, double theta) const;
    double sample_pre(Rng& rng) const;

    // Clamp into theta_set, then push away from theta0 to at least delta_min.
    double project(double theta_hat) const;
    double mle(std::span<const double> window) const;
    double ewma_update(double theta_hat, double x, double alpha) const;

    // Sufficient statistic T(x) used by partial-sum scans. Validates support.
    double sufficient(double x) const;
    // sup over theta in theta_set of the segment log-likelihood ratio given
    // sum of T(x_i) and segment length n. argmax is written if non-null.
    double segment_sup(double sum_t, double n, double* argmax = nullptr) const;
    // d/dtheta log f1(x, theta) at theta0 and the per-observation Fisher
    // information there; the score chart centres the family at theta0.
    double score_at_pre(double x) const;
    double fisher_information_pre() const;

    // Mean parameterisation helpers (identity for Gaussian and Bernoulli).
    double mean_of(double theta) const;
    double theta_from_mean(double m) const;

private:
    ChangeModel() = default;
    void check_theta(double theta) const;
    void check_support(double x) const;
    double segment_value(double sum_t, double n, double theta) const;

    Family family_ = Family::Gaussian;
    double theta0_ = 0.0;
    double sigma_ = 1.0;
    ThetaSet theta_set_;
    double delta_min_ = 0.1;
    ExpFamilySpec exp_;
};

// Stream with change time v (1-based; kNoChange for none).
struct StreamSpec {
    ChangeModel model;
    std::uint64_t change_point = kNoChange;
    double post_theta = 0.0;
    std::uint64_t horizon = 1;
    std::uint64_t seed = 0;
};

// Incremental generator behind sample_stream; index t < v is pre-change.
class StreamSampler {
public:
    StreamSampler(const ChangeModel& model, std::uint64_t change_point, double post_theta,
                  std::uint64_t seed);

    double next();
    std::uint64_t index() const noexcept { return t_; }

private:
    const ChangeModel* model_;
    std::uint64_t change_point_;
    double post_theta_;
    Rng rng_;
    std::uint64_t t_ = 0;
};

std::vector<double> sample_stream(const StreamSpec& spec);

}  // namespace cpd
