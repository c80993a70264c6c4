#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpd/changemodel.hpp"
#include "cpd/detectors.hpp"

namespace cpd {

// Builds a fresh detector for one replication. The seed lets randomised
// detectors (the MMD scan's reference pool) draw their own state.
using DetectorFactory = std::function<std::unique_ptr<Detector>(std::uint64_t seed)>;

struct RunOptions {
    std::size_t reps = 1000;
    std::uint64_t cap = 100000;
    std::uint64_t seed = 1;
    std::size_t jobs = 0;  // 0: CPD_JOBS environment variable, else 1
};

// Width of the worker pool for a given request.
std::size_t resolve_jobs(std::size_t requested);

// Runs fn(i) for i in [0, n) on `jobs` threads. fn must only touch slot i.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

struct CalibrationReport {
    std::string detector;
    double b = 0.0;
    std::optional<double> gamma;
    double arl = 0.0;
    double arl_se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t reps = 0;
    std::size_t censored = 0;
    std::uint64_t cap = 0;
    std::uint64_t seed = 0;
    // More than 1% of runs hit the cap: arl is only a lower bound.
    bool lower_bound = false;
    double ops_per_step = 0.0;
    std::size_t state_bytes = 0;
    std::vector<std::string> warnings;
};

// Null-stream replications that can be extended to higher thresholds.
// Each run keeps its running-maximum record times, so the run length for
// any threshold up to the current level is known without re-simulation.
class NullRunSet {
public:
    NullRunSet(DetectorFactory factory, ChangeModel model, RunOptions options);
    NullRunSet(NullRunSet&&) noexcept;
    NullRunSet& operator=(NullRunSet&&) noexcept;
    ~NullRunSet();

    // Continue every run until its statistic crosses `level` or the cap.
    void extend(double level);
    // Run-length summary for threshold b <= the level reached so far.
    CalibrationReport report(double b) const;
    double level() const noexcept { return level_; }
    CrossingRule rule() const noexcept { return rule_; }
    const std::string& detector_name() const noexcept { return name_; }

private:
    struct Run;
    std::uint64_t run_length(const Run& run, double b) const;

    std::shared_ptr<const ChangeModel> model_;
    DetectorFactory factory_;
    RunOptions options_;
    CrossingRule rule_ = CrossingRule::Strict;
    std::string name_;
    double level_ = -kInf;
    std::vector<std::unique_ptr<Run>> runs_;
};

CalibrationReport estimate_arl(const DetectorFactory& factory, const ChangeModel& model, double b,
                               const RunOptions& options);

struct CalibrationOptions {
    double tol = 0.1;  // relative ARL tolerance
    double b_lo = 1e-6;
    double b_hi = 1.0;
    double expand = 1.1;
    int max_expansions = 40;
};

// Smallest threshold whose estimated ARL reaches gamma, found on one set of
// null runs. Throws StateError when no bracket is found.
CalibrationReport calibrate_threshold(const DetectorFactory& factory, const ChangeModel& model,
                                      double gamma, const RunOptions& options,
                                      const CalibrationOptions& calibration = {});

struct EddCell {
    std::uint64_t v = 1;
    double edd = 0.0;
    double se = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::size_t kept = 0;
    std::size_t discarded = 0;  // runs with tau < v
    std::size_t censored = 0;   // kept runs without an alarm by the cap
    bool flagged = false;       // every run discarded
    std::vector<double> delays;
};

struct EddReport {
    std::string detector;
    double b = 0.0;
    double post_theta = 0.0;
    std::vector<EddCell> cells;
    double worst = 0.0;
    std::uint64_t worst_v = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

EddReport estimate_edd(const DetectorFactory& factory, const ChangeModel& model, double post_theta,
                       double b, const std::vector<std::uint64_t>& v_grid, const RunOptions& options);

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::vector<double> residuals;
};

// Least squares of log(y) on log(x).
SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y);

struct BenchPoint {
    std::string detector;
    std::string axis;  // "t" or "w"
    double at = 0.0;
    double ops_per_step = 0.0;
    double wall_ns = 0.0;  // median of 5 timed steps
};

struct BenchFit {
    std::string detector;
    std::string axis;
    SlopeFit ops;
    SlopeFit wall;
};

struct BenchReport {
    std::vector<BenchPoint> points;
    std::vector<BenchFit> fits;
};

struct BenchTarget {
    std::string name;
    // Detector for window size w (ignored by detectors without a window).
    std::function<std::unique_ptr<Detector>(std::size_t w)> make;
    bool windowed = false;
};

// Per-step cost at step t after t-1 null observations, and at a fixed t
// across window sizes for windowed targets.
BenchReport bench_complexity(const std::vector<BenchTarget>& targets, const ChangeModel& model,
                             const std::vector<std::uint64_t>& t_grid,
                             const std::vector<std::size_t>& w_grid, std::uint64_t seed,
                             std::size_t default_w = 16);

struct FrontierRow {
    std::string detector;
    std::string robustness;
    double edd = 0.0;
    double arl = 0.0;
    double opcount_per_step = 0.0;
    std::size_t bytes_state = 0;
    double b = 0.0;
    double gamma = 0.0;
};

struct FrontierEntry {
    std::string name;
    DetectorFactory factory;
};

std::vector<FrontierRow> frontier(const std::vector<FrontierEntry>& entries, const ChangeModel& model,
                                  double post_theta, double gamma,
                                  const std::vector<std::uint64_t>& v_grid, const RunOptions& arl_options,
                                  const RunOptions& edd_options, const CalibrationOptions& calibration = {});

void write_frontier_csv(std::ostream& out, const std::vector<FrontierRow>& rows);

}  // namespace cpd
