#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cpd/changemodel.hpp"
#include "cpd/errors.hpp"

namespace cpd {

// Value emitted while a detector is still filling its window.
inline constexpr double kInactive = -kInf;

// Parametric detectors alarm on T > b; e-detectors and the Z-field rule on T >= b.
enum class CrossingRule { Strict, NonStrict };

enum class Robustness { KnownPost, Parametric, Nonparametric };

std::string to_string(Robustness r);
std::string to_string(CrossingRule r);

inline bool crosses(double statistic, double b, CrossingRule rule) noexcept {
    return rule == CrossingRule::Strict ? statistic > b : statistic >= b;
}

// ---------------------------------------------------------------------------
// Statistic recursions. These are the building blocks the detectors below use,
// exposed separately so they can be checked against brute-force definitions.

// T_{t+1} = max{T_t + z, 0}.
double cusum_update(double statistic, double z);

// max over k in [1, t+1] of sum_{i=k}^t z_i; the empty sum (k = t+1) is 0.
double cusum_oracle(std::span<const double> z);

// Same maximum restricted to nonempty segments (k <= t). -inf for empty input.
double max_suffix_sum(std::span<const double> z);

// Shiryaev-Roberts in log domain: log T_{t+1} = log(1 + T_t) + z. log T_0 = -inf.
double sr_update(double log_statistic, double z);

// log of sum_{k=1}^t prod_{i=k}^t exp(z_i), computed directly.
double sr_oracle(std::span<const double> z);

// Full-history GLR: max_k sup_theta sum_{i=k}^t log f1(x_i, theta)/f0(x_i).
double glr_statistic(const ChangeModel& model, std::span<const double> x);

// GLR on the single block (no scan over k).
double shewhart_glr_value(const ChangeModel& model, std::span<const double> block);

// (1/(2w)) * grad^T I(theta0)^{-1} grad with grad the block score at theta0.
double score_statistic(const ChangeModel& model, std::span<const double> block, std::size_t w);

// ---------------------------------------------------------------------------

struct AlarmResult {
    bool stopped = false;
    // Alarm time, or the horizon when censored.
    std::uint64_t stop_time = 0;
    double statistic = kInactive;
    double threshold = 0.0;
    CrossingRule rule = CrossingRule::Strict;
};

// Streaming detector: consume one observation, emit the current statistic.
// `ops()` counts elementary arithmetic steps and is never reset.
class Detector {
public:
    virtual ~Detector() = default;

    virtual double update(double x) = 0;
    // Advance past an observation without evaluating the statistic. Only
    // meaningful for benchmarking history-based detectors at large t.
    virtual void warm(double x) { update(x); }
    // Back to the initial state; counters survive.
    virtual void reset() = 0;
    virtual std::unique_ptr<Detector> clone() const = 0;

    virtual std::string name() const = 0;
    virtual Robustness robustness() const = 0;
    virtual CrossingRule crossing_rule() const { return CrossingRule::Strict; }
    virtual std::size_t state_bytes() const = 0;

    double statistic() const noexcept { return statistic_; }
    std::uint64_t steps() const noexcept { return steps_; }
    std::uint64_t ops() const noexcept { return ops_; }

protected:
    double emit(double statistic) noexcept {
        statistic_ = statistic;
        ++steps_;
        return statistic;
    }
    void count(std::uint64_t n) noexcept { ops_ += n; }

    double statistic_ = kInactive;

private:
    std::uint64_t steps_ = 0;
    std::uint64_t ops_ = 0;
};

class CusumDetector final : public Detector {
public:
    CusumDetector(ChangeModel model, double theta);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "cusum"; }
    Robustness robustness() const override { return Robustness::KnownPost; }
    std::size_t state_bytes() const override { return sizeof(double); }

private:
    ChangeModel model_;
    double theta_;
    double stat_ = 0.0;
};

// Statistic is log T^SR; thresholds apply to the log.
class ShiryaevRobertsDetector final : public Detector {
public:
    ShiryaevRobertsDetector(ChangeModel model, double theta);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "sr"; }
    Robustness robustness() const override { return Robustness::KnownPost; }
    std::size_t state_bytes() const override { return sizeof(double); }

private:
    ChangeModel model_;
    double theta_;
    double log_stat_ = -kInf;
};

// Keeps every prefix sum of the sufficient statistic; O(t) per step.
class GlrDetector final : public Detector {
public:
    explicit GlrDetector(ChangeModel model);

    double update(double x) override;
    void warm(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "glr"; }
    Robustness robustness() const override { return Robustness::Parametric; }
    std::size_t state_bytes() const override;

private:
    ChangeModel model_;
    std::vector<double> prefix_{0.0};
};

// Fixed-capacity ring buffer of the most recent values.
class Window {
public:
    explicit Window(std::size_t capacity) : data_(capacity) {}

    void push(double v) noexcept {
        data_[head_] = v;
        head_ = (head_ + 1) % data_.size();
        if (size_ < data_.size()) {
            ++size_;
        }
    }
    // age 0 is the newest value.
    double recent(std::size_t age) const noexcept {
        return data_[(head_ + data_.size() - 1 - age) % data_.size()];
    }
    double oldest() const noexcept { return recent(size_ - 1); }
    std::size_t size() const noexcept { return size_; }
    std::size_t capacity() const noexcept { return data_.size(); }
    bool full() const noexcept { return size_ == data_.size(); }
    void clear() noexcept {
        head_ = 0;
        size_ = 0;
    }

private:
    std::vector<double> data_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
};

// Scans candidate change points k in [max(t-w, 1), t].
class WindowGlrDetector final : public Detector {
public:
    WindowGlrDetector(ChangeModel model, std::size_t w);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "wl_glr"; }
    Robustness robustness() const override { return Robustness::Parametric; }
    std::size_t state_bytes() const override;
    std::size_t window() const noexcept { return w_; }

private:
    ChangeModel model_;
    std::size_t w_;
    Window stats_;
};

// GLR over the single block x_{t-w}..x_t; inactive until w+1 samples are seen.
class ShewhartGlrDetector final : public Detector {
public:
    ShewhartGlrDetector(ChangeModel model, std::size_t w);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "shewhart_glr"; }
    Robustness robustness() const override { return Robustness::Parametric; }
    std::size_t state_bytes() const override;

private:
    ChangeModel model_;
    std::size_t w_;
    Window stats_;
};

// Locally most powerful score chart over x_{t-w}..x_t.
class ScoreChartDetector final : public Detector {
public:
    ScoreChartDetector(ChangeModel model, std::size_t w);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "score"; }
    Robustness robustness() const override { return Robustness::Parametric; }
    std::size_t state_bytes() const override;

private:
    ChangeModel model_;
    std::size_t w_;
    double inv_fisher_;
    Window scores_;
};

enum class EstimatorPolicy { WindowMle, Ewma, Fixed };

std::string to_string(EstimatorPolicy p);

struct WlCusumConfig {
    std::size_t w = 8;
    EstimatorPolicy policy = EstimatorPolicy::WindowMle;
    double alpha = 0.1;       // EWMA weight
    double theta_init = kInf; // EWMA start / fixed value; kInf means project(theta0)
};

// Adaptive CUSUM. The increment for x_{t+1} uses an estimate built only from
// earlier samples: the window x_{t-w}..x_{t-1} (MLE) or the EWMA state.
class WlCusumDetector final : public Detector {
public:
    WlCusumDetector(ChangeModel model, WlCusumConfig config);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override;
    Robustness robustness() const override { return Robustness::Parametric; }
    std::size_t state_bytes() const override;
    double theta_hat() const noexcept { return theta_hat_; }

private:
    double initial_theta() const;

    ChangeModel model_;
    WlCusumConfig config_;
    Window window_;
    double window_sum_ = 0.0;
    double theta_hat_;
    double stat_ = 0.0;
};

// ---------------------------------------------------------------------------

// First t with the statistic crossing b; censored at the horizon otherwise.
// `next` yields the t-th observation. The detector is reset after an alarm.
template <class Source>
AlarmResult run_detector(Detector& detector, Source&& next, double b, std::uint64_t horizon) {
    if (horizon < 1) {
        throw ParameterError("run_detector: horizon must be >= 1");
    }
    if (!(b > 0.0)) {
        throw ParameterError("run_detector: threshold must be positive");
    }
    AlarmResult r;
    r.threshold = b;
    r.rule = detector.crossing_rule();
    for (std::uint64_t t = 1; t <= horizon; ++t) {
        const double stat = detector.update(next());
        if (crosses(stat, b, r.rule)) {
            r.stopped = true;
            r.stop_time = t;
            r.statistic = stat;
            detector.reset();
            return r;
        }
        r.statistic = stat;
    }
    r.stop_time = horizon;
    return r;
}

AlarmResult run_detector(Detector& detector, std::span<const double> stream, double b);

}  // namespace cpd
