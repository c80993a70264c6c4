#include "cpd/detectors.hpp"

#include <algorithm>
#include <cmath>

namespace cpd {

std::string to_string(Robustness r) {
    switch (r) {
        case Robustness::KnownPost:
            return "known-f1";
        case Robustness::Parametric:
            return "parametric";
        case Robustness::Nonparametric:
            return "nonparametric";
    }
    return "unknown";
}

std::string to_string(CrossingRule r) {
    return r == CrossingRule::Strict ? "strict" : "non-strict";
}

std::string to_string(EstimatorPolicy p) {
    switch (p) {
        case EstimatorPolicy::WindowMle:
            return "window_mle";
        case EstimatorPolicy::Ewma:
            return "ewma";
        case EstimatorPolicy::Fixed:
            return "fixed";
    }
    return "unknown";
}

namespace {

void require_finite(double z, const char* what) {
    if (!std::isfinite(z)) {
        throw InputError(std::string(what) + ": non-finite increment");
    }
}

// log(exp(0) + exp(a)) = log(1 + e^a).
double log1p_exp(double a) {
    if (a == -kInf) {
        return 0.0;
    }
    return std::max(a, 0.0) + std::log1p(std::exp(-std::abs(a)));
}

void require_window(std::size_t w) {
    if (w < 1) {
        throw ParameterError("window length must be >= 1");
    }
}

// Elementary-step costs charged per primitive; only ratios across t and w matter.
constexpr std::uint64_t kLogLrOps = 4;
constexpr std::uint64_t kSegmentOps = 6;

}  // namespace

double cusum_update(double statistic, double z) {
    require_finite(z, "cusum_update");
    return std::max(statistic + z, 0.0);
}

double cusum_oracle(std::span<const double> z) {
    return std::max(max_suffix_sum(z), 0.0);
}

double max_suffix_sum(std::span<const double> z) {
    double best = -kInf;
    const std::size_t t = z.size();
    for (std::size_t k = 0; k < t; ++k) {
        double s = 0.0;
        for (std::size_t i = k; i < t; ++i) {
            s += z[i];
        }
        best = std::max(best, s);
    }
    return best;
}

double sr_update(double log_statistic, double z) {
    require_finite(z, "sr_update");
    return log1p_exp(log_statistic) + z;
}

double sr_oracle(std::span<const double> z) {
    const std::size_t t = z.size();
    if (t == 0) {
        return -kInf;
    }
    std::vector<double> terms;
    terms.reserve(t);
    for (std::size_t k = 0; k < t; ++k) {
        double s = 0.0;
        for (std::size_t i = k; i < t; ++i) {
            s += z[i];
        }
        terms.push_back(s);
    }
    const double m = *std::max_element(terms.begin(), terms.end());
    double acc = 0.0;
    for (double s : terms) {
        acc += std::exp(s - m);
    }
    return m + std::log(acc);
}

double glr_statistic(const ChangeModel& model, std::span<const double> x) {
    if (x.empty()) {
        throw InputError("glr_statistic: empty input");
    }
    std::vector<double> prefix(x.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        prefix[i + 1] = prefix[i] + model.sufficient(x[i]);
    }
    const double t = static_cast<double>(x.size());
    double best = -kInf;
    for (std::size_t k = 0; k < x.size(); ++k) {
        best = std::max(best, model.segment_sup(prefix.back() - prefix[k], t - static_cast<double>(k)));
    }
    return best;
}

double shewhart_glr_value(const ChangeModel& model, std::span<const double> block) {
    if (block.empty()) {
        throw InputError("shewhart_glr_value: empty block");
    }
    double sum = 0.0;
    for (double x : block) {
        sum += model.sufficient(x);
    }
    return model.segment_sup(sum, static_cast<double>(block.size()));
}

double score_statistic(const ChangeModel& model, std::span<const double> block, std::size_t w) {
    require_window(w);
    if (block.empty()) {
        throw InputError("score_statistic: empty block");
    }
    const double info = model.fisher_information_pre();
    if (!(info > 0.0) || !std::isfinite(info)) {
        throw NumericError("score_statistic: Fisher information at theta0 is singular");
    }
    double grad = 0.0;
    for (double x : block) {
        if (!std::isfinite(x)) {
            throw DomainError("score_statistic: non-finite observation");
        }
        grad += model.score_at_pre(x);
    }
    return grad * grad / (info * 2.0 * static_cast<double>(w));
}

// ---------------------------------------------------------------------------

CusumDetector::CusumDetector(ChangeModel model, double theta)
    : model_(std::move(model)), theta_(theta) {
    (void)model_.log_lr(model_.family() == Family::Bernoulli ? 1.0 : 0.0, theta_);
}

double CusumDetector::update(double x) {
    stat_ = cusum_update(stat_, model_.log_lr(x, theta_));
    count(kLogLrOps + 2);
    return emit(stat_);
}

void CusumDetector::reset() {
    stat_ = 0.0;
    statistic_ = kInactive;
}

std::unique_ptr<Detector> CusumDetector::clone() const {
    return std::make_unique<CusumDetector>(*this);
}

ShiryaevRobertsDetector::ShiryaevRobertsDetector(ChangeModel model, double theta)
    : model_(std::move(model)), theta_(theta) {
    (void)model_.log_lr(model_.family() == Family::Bernoulli ? 1.0 : 0.0, theta_);
}

double ShiryaevRobertsDetector::update(double x) {
    log_stat_ = sr_update(log_stat_, model_.log_lr(x, theta_));
    count(kLogLrOps + 5);
    return emit(log_stat_);
}

void ShiryaevRobertsDetector::reset() {
    log_stat_ = -kInf;
    statistic_ = kInactive;
}

std::unique_ptr<Detector> ShiryaevRobertsDetector::clone() const {
    return std::make_unique<ShiryaevRobertsDetector>(*this);
}

GlrDetector::GlrDetector(ChangeModel model) : model_(std::move(model)) {}

void GlrDetector::warm(double x) {
    prefix_.push_back(prefix_.back() + model_.sufficient(x));
    count(1);
}

double GlrDetector::update(double x) {
    warm(x);
    const std::size_t t = prefix_.size() - 1;
    const double total = prefix_.back();
    double best = -kInf;
    for (std::size_t k = 0; k < t; ++k) {
        best = std::max(best, model_.segment_sup(total - prefix_[k], static_cast<double>(t - k)));
    }
    count(t * (kSegmentOps + 2));
    return emit(best);
}

void GlrDetector::reset() {
    prefix_.assign(1, 0.0);
    statistic_ = kInactive;
}

std::unique_ptr<Detector> GlrDetector::clone() const {
    return std::make_unique<GlrDetector>(*this);
}

std::size_t GlrDetector::state_bytes() const {
    return prefix_.size() * sizeof(double);
}

WindowGlrDetector::WindowGlrDetector(ChangeModel model, std::size_t w)
    : model_(std::move(model)), w_(w), stats_((require_window(w), w + 1)) {}

double WindowGlrDetector::update(double x) {
    stats_.push(model_.sufficient(x));
    double sum = 0.0;
    double best = -kInf;
    for (std::size_t age = 0; age < stats_.size(); ++age) {
        sum += stats_.recent(age);
        best = std::max(best, model_.segment_sup(sum, static_cast<double>(age + 1)));
    }
    count(1 + stats_.size() * (kSegmentOps + 2));
    return emit(best);
}

void WindowGlrDetector::reset() {
    stats_.clear();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> WindowGlrDetector::clone() const {
    return std::make_unique<WindowGlrDetector>(*this);
}

std::size_t WindowGlrDetector::state_bytes() const {
    return stats_.capacity() * sizeof(double);
}

ShewhartGlrDetector::ShewhartGlrDetector(ChangeModel model, std::size_t w)
    : model_(std::move(model)), w_(w), stats_((require_window(w), w + 1)) {}

double ShewhartGlrDetector::update(double x) {
    stats_.push(model_.sufficient(x));
    count(1);
    if (!stats_.full()) {
        return emit(kInactive);
    }
    double sum = 0.0;
    for (std::size_t age = 0; age < stats_.size(); ++age) {
        sum += stats_.recent(age);
    }
    count(stats_.size() + kSegmentOps);
    return emit(model_.segment_sup(sum, static_cast<double>(w_ + 1)));
}

void ShewhartGlrDetector::reset() {
    stats_.clear();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> ShewhartGlrDetector::clone() const {
    return std::make_unique<ShewhartGlrDetector>(*this);
}

std::size_t ShewhartGlrDetector::state_bytes() const {
    return stats_.capacity() * sizeof(double);
}

ScoreChartDetector::ScoreChartDetector(ChangeModel model, std::size_t w)
    : model_(std::move(model)), w_(w), inv_fisher_(0.0), scores_((require_window(w), w + 1)) {
    const double info = model_.fisher_information_pre();
    if (!(info > 0.0) || !std::isfinite(info)) {
        throw NumericError("score chart: Fisher information at theta0 is singular");
    }
    inv_fisher_ = 1.0 / info;
}

double ScoreChartDetector::update(double x) {
    if (!std::isfinite(x)) {
        throw DomainError("score chart: non-finite observation");
    }
    scores_.push(model_.score_at_pre(x));
    count(2);
    if (!scores_.full()) {
        return emit(kInactive);
    }
    double grad = 0.0;
    for (std::size_t age = 0; age < scores_.size(); ++age) {
        grad += scores_.recent(age);
    }
    count(scores_.size() + 4);
    return emit(grad * grad * inv_fisher_ / (2.0 * static_cast<double>(w_)));
}

void ScoreChartDetector::reset() {
    scores_.clear();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> ScoreChartDetector::clone() const {
    return std::make_unique<ScoreChartDetector>(*this);
}

std::size_t ScoreChartDetector::state_bytes() const {
    return scores_.capacity() * sizeof(double);
}

WlCusumDetector::WlCusumDetector(ChangeModel model, WlCusumConfig config)
    : model_(std::move(model)),
      config_(config),
      window_((require_window(config.w), config.w)),
      theta_hat_(0.0) {
    if (config_.policy == EstimatorPolicy::Ewma && !(config_.alpha > 0.0 && config_.alpha < 1.0)) {
        throw ParameterError("wl_cusum: EWMA alpha must lie in (0, 1)");
    }
    theta_hat_ = initial_theta();
}

double WlCusumDetector::initial_theta() const {
    if (config_.theta_init == kInf) {
        return model_.project(model_.pre_theta());
    }
    if (config_.policy == EstimatorPolicy::Fixed) {
        return config_.theta_init;
    }
    return model_.project(config_.theta_init);
}

std::string WlCusumDetector::name() const {
    return config_.policy == EstimatorPolicy::WindowMle ? "wl_cusum"
                                                        : "wl_cusum_" + to_string(config_.policy);
}

double WlCusumDetector::update(double x) {
    const double t_x = model_.sufficient(x);
    switch (config_.policy) {
        case EstimatorPolicy::WindowMle: {
            if (!window_.full()) {
                window_.push(t_x);
                window_sum_ += t_x;
                count(2);
                return emit(kInactive);
            }
            theta_hat_ = model_.project(
                model_.theta_from_mean(window_sum_ / static_cast<double>(config_.w)));
            stat_ = cusum_update(stat_, model_.log_lr(x, theta_hat_));
            window_sum_ += t_x - window_.oldest();
            window_.push(t_x);
            count(4 + kLogLrOps + 2 + 2);
            return emit(stat_);
        }
        case EstimatorPolicy::Ewma: {
            stat_ = cusum_update(stat_, model_.log_lr(x, theta_hat_));
            theta_hat_ = model_.ewma_update(theta_hat_, x, config_.alpha);
            count(kLogLrOps + 2 + 6);
            return emit(stat_);
        }
        case EstimatorPolicy::Fixed:
            stat_ = cusum_update(stat_, model_.log_lr(x, theta_hat_));
            count(kLogLrOps + 2);
            return emit(stat_);
    }
    return emit(stat_);
}

void WlCusumDetector::reset() {
    window_.clear();
    window_sum_ = 0.0;
    theta_hat_ = initial_theta();
    stat_ = 0.0;
    statistic_ = kInactive;
}

std::unique_ptr<Detector> WlCusumDetector::clone() const {
    return std::make_unique<WlCusumDetector>(*this);
}

std::size_t WlCusumDetector::state_bytes() const {
    const std::size_t buffer = config_.policy == EstimatorPolicy::WindowMle ? window_.capacity() : 0;
    return (buffer + 3) * sizeof(double);
}

AlarmResult run_detector(Detector& detector, std::span<const double> stream, double b) {
    std::size_t i = 0;
    return run_detector(detector, [&] { return stream[i++]; }, b, stream.size());
}

}  // namespace cpd
