#include "cpd/changemodel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "cpd/errors.hpp"
#include "cpd/numeric.hpp"

namespace cpd {

std::string to_string(Family f) {
    switch (f) {
        case Family::Gaussian:
            return "gaussian";
        case Family::Bernoulli:
            return "bernoulli";
        case Family::ExponentialFamily:
            return "exponential_family";
    }
    return "unknown";
}

double ThetaSet::clamp(double theta) const noexcept {
    return std::min(std::max(theta, lo), hi);
}

ExpFamilySpec ExpFamilySpec::poisson(double rate0) {
    if (!(rate0 > 0.0)) {
        throw ParameterError("poisson: rate must be positive");
    }
    ExpFamilySpec s;
    s.name = "poisson";
    s.eta0 = std::log(rate0);
    s.sufficient = [](double x) { return x; };
    s.log_partition = [](double eta) { return std::exp(eta); };
    s.mean = [](double eta) { return std::exp(eta); };
    s.variance = [](double eta) { return std::exp(eta); };
    s.mean_to_natural = [](double m) { return m > 0.0 ? std::log(m) : -kInf; };
    s.in_support = [](double x) { return x >= 0.0 && std::floor(x) == x; };
    s.sample = [](Rng& rng, double eta) {
        std::poisson_distribution<long long> d(std::exp(eta));
        return static_cast<double>(d(rng.engine()));
    };
    return s;
}

ExpFamilySpec ExpFamilySpec::exponential(double rate0) {
    if (!(rate0 > 0.0)) {
        throw ParameterError("exponential: rate must be positive");
    }
    ExpFamilySpec s;
    s.name = "exponential";
    s.eta0 = -rate0;
    s.eta_hi = 0.0;
    s.sufficient = [](double x) { return x; };
    s.log_partition = [](double eta) { return -std::log(-eta); };
    s.mean = [](double eta) { return -1.0 / eta; };
    s.variance = [](double eta) { return 1.0 / (eta * eta); };
    s.mean_to_natural = [](double m) { return m > 0.0 ? -1.0 / m : -kInf; };
    s.in_support = [](double x) { return x >= 0.0 && std::isfinite(x); };
    s.sample = [](Rng& rng, double eta) {
        std::exponential_distribution<double> d(-eta);
        return d(rng.engine());
    };
    return s;
}

namespace {

void require_separable(const ThetaSet& set, double theta0, double delta_min) {
    if (!(set.lo <= set.hi)) {
        throw ParameterError("theta_set: lo must not exceed hi");
    }
    if (delta_min < 0.0) {
        throw ParameterError("delta_min must be nonnegative");
    }
    if (set.hi < theta0 + delta_min && set.lo > theta0 - delta_min) {
        throw ParameterError("theta_set has no point separated from theta0 by delta_min");
    }
}

}  // namespace

ChangeModel ChangeModel::gaussian(double mean0, double sigma, ThetaSet theta_set,
                                  double delta_min) {
    if (!(sigma > 0.0) || !std::isfinite(mean0)) {
        throw ParameterError("gaussian: sigma must be positive and mean finite");
    }
    require_separable(theta_set, mean0, delta_min);
    ChangeModel m;
    m.family_ = Family::Gaussian;
    m.theta0_ = mean0;
    m.sigma_ = sigma;
    m.theta_set_ = theta_set;
    m.delta_min_ = delta_min;
    return m;
}

ChangeModel ChangeModel::bernoulli(double p0, ThetaSet theta_set, double delta_min) {
    if (!(p0 > 0.0 && p0 < 1.0)) {
        throw ParameterError("bernoulli: p0 must lie in (0, 1)");
    }
    if (!(theta_set.lo > 0.0 && theta_set.hi < 1.0)) {
        throw ParameterError("bernoulli: theta_set must lie inside (0, 1)");
    }
    require_separable(theta_set, p0, delta_min);
    ChangeModel m;
    m.family_ = Family::Bernoulli;
    m.theta0_ = p0;
    m.theta_set_ = theta_set;
    m.delta_min_ = delta_min;
    return m;
}

ChangeModel ChangeModel::exponential_family(ExpFamilySpec spec, ThetaSet theta_set,
                                            double delta_min) {
    if (!spec.sufficient || !spec.log_partition || !spec.in_support || !spec.sample) {
        throw ParameterError("exponential family: T, A, support and sampler are required");
    }
    if (!(spec.eta0 > spec.eta_lo && spec.eta0 < spec.eta_hi)) {
        throw ParameterError("exponential family: eta0 outside natural parameter space");
    }
    theta_set.lo = std::max(theta_set.lo, std::nextafter(spec.eta_lo, kInf));
    theta_set.hi = std::min(theta_set.hi, std::nextafter(spec.eta_hi, -kInf));
    require_separable(theta_set, spec.eta0, delta_min);
    ChangeModel m;
    m.family_ = Family::ExponentialFamily;
    m.theta0_ = spec.eta0;
    m.theta_set_ = theta_set;
    m.delta_min_ = delta_min;
    m.exp_ = std::move(spec);
    return m;
}

std::string ChangeModel::name() const {
    return family_ == Family::ExponentialFamily ? exp_.name : to_string(family_);
}

const ExpFamilySpec* ChangeModel::exp_family() const noexcept {
    return family_ == Family::ExponentialFamily ? &exp_ : nullptr;
}

void ChangeModel::check_theta(double theta) const {
    if (!theta_set_.contains(theta)) {
        std::ostringstream os;
        os << "theta " << theta << " outside [" << theta_set_.lo << ", " << theta_set_.hi << "]";
        throw ParameterError(os.str());
    }
}

void ChangeModel::check_support(double x) const {
    bool ok = std::isfinite(x);
    if (ok && family_ == Family::Bernoulli) {
        ok = x == 0.0 || x == 1.0;
    } else if (ok && family_ == Family::ExponentialFamily) {
        ok = exp_.in_support(x);
    }
    if (!ok) {
        std::ostringstream os;
        os << "observation " << x << " outside the support of " << name();
        throw DomainError(os.str());
    }
}

double ChangeModel::log_lr(double x, double theta) const {
    check_theta(theta);
    check_support(x);
    switch (family_) {
        case Family::Gaussian:
            return (theta - theta0_) * (x - 0.5 * (theta + theta0_)) / (sigma_ * sigma_);
        case Family::Bernoulli:
            return x == 1.0 ? std::log(theta / theta0_)
                            : std::log((1.0 - theta) / (1.0 - theta0_));
        case Family::ExponentialFamily:
            return (theta - theta0_) * exp_.sufficient(x) -
                   (exp_.log_partition(theta) - exp_.log_partition(theta0_));
    }
    return 0.0;
}

double ChangeModel::kl_divergence(double theta) const {
    check_theta(theta);
    switch (family_) {
        case Family::Gaussian: {
            const double d = (theta - theta0_) / sigma_;
            return 0.5 * d * d;
        }
        case Family::Bernoulli: {
            const double p = theta;
            const double q = theta0_;
            return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
        }
        case Family::ExponentialFamily:
            if (!exp_.mean) {
                throw CapabilityError(exp_.name + ": KL needs the mean function A'");
            }
            return (theta - theta0_) * exp_.mean(theta) -
                   (exp_.log_partition(theta) - exp_.log_partition(theta0_));
    }
    return 0.0;
}

Estimate ChangeModel::second_moment_loglr(double theta) const {
    check_theta(theta);
    switch (family_) {
        case Family::Gaussian: {
            // z ~ N(d^2/2, d^2) under f1 with d the standardised shift.
            const double d2 = (theta - theta0_) * (theta - theta0_) / (sigma_ * sigma_);
            return {d2 + 0.25 * d2 * d2, 0.0};
        }
        case Family::Bernoulli: {
            const double z1 = std::log(theta / theta0_);
            const double z0 = std::log((1.0 - theta) / (1.0 - theta0_));
            return {theta * z1 * z1 + (1.0 - theta) * z0 * z0, 0.0};
        }
        case Family::ExponentialFamily: {
            if (!exp_.mean || !exp_.variance) {
                throw CapabilityError(exp_.name + ": J0 needs A' and A''");
            }
            // z = a T - c with a = eta - eta0, c = A(eta) - A(eta0).
            const double a = theta - theta0_;
            const double c = exp_.log_partition(theta) - exp_.log_partition(theta0_);
            const double mt = exp_.mean(theta);
            const double vt = exp_.variance(theta);
            return {a * a * (vt + mt * mt) - 2.0 * a * c * mt + c * c, 0.0};
        }
    }
    return {};
}

double ChangeModel::sample(Rng& rng, double theta) const {
    switch (family_) {
        case Family::Gaussian:
            return theta + sigma_ * rng.normal();
        case Family::Bernoulli:
            return rng.bernoulli(theta) ? 1.0 : 0.0;
        case Family::ExponentialFamily:
            return exp_.sample(rng, theta);
    }
    return 0.0;
}

double ChangeModel::sample_pre(Rng& rng) const { return sample(rng, theta0_); }

double ChangeModel::project(double theta_hat) const {
    if (std::isnan(theta_hat)) {
        throw NumericError("project: estimate is NaN");
    }
    double t = theta_set_.clamp(theta_hat);
    if (std::abs(t - theta0_) < delta_min_) {
        const double up = std::max(theta0_ + delta_min_, theta_set_.lo);
        const double down = std::min(theta0_ - delta_min_, theta_set_.hi);
        const bool up_ok = up <= theta_set_.hi;
        const bool down_ok = down >= theta_set_.lo;
        if (t >= theta0_) {
            t = up_ok ? up : down;
        } else {
            t = down_ok ? down : up;
        }
    }
    if (!std::isfinite(t)) {
        throw NumericError("project: estimate is not finite after clamping to theta_set");
    }
    return t;
}

double ChangeModel::mean_of(double theta) const {
    if (family_ != Family::ExponentialFamily) {
        return theta;
    }
    if (!exp_.mean) {
        throw CapabilityError(exp_.name + ": mean function A' not provided");
    }
    return exp_.mean(theta);
}

double ChangeModel::theta_from_mean(double m) const {
    if (family_ != Family::ExponentialFamily) {
        return m;
    }
    if (exp_.mean_to_natural) {
        return exp_.mean_to_natural(m);
    }
    if (!exp_.mean || !std::isfinite(theta_set_.lo) || !std::isfinite(theta_set_.hi)) {
        throw CapabilityError(exp_.name + ": cannot invert A' without a bounded theta_set");
    }
    // A' is increasing; search inside the admissible set only.
    if (m <= exp_.mean(theta_set_.lo)) {
        return theta_set_.lo;
    }
    if (m >= exp_.mean(theta_set_.hi)) {
        return theta_set_.hi;
    }
    return bisect_increasing(exp_.mean, m, theta_set_.lo, theta_set_.hi);
}

double ChangeModel::mle(std::span<const double> window) const {
    if (window.empty()) {
        throw StateError("mle: empty window");
    }
    double sum = 0.0;
    for (double x : window) {
        sum += sufficient(x);
    }
    return project(theta_from_mean(sum / static_cast<double>(window.size())));
}

double ChangeModel::ewma_update(double theta_hat, double x, double alpha) const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ParameterError("ewma: alpha must lie in (0, 1)");
    }
    const double m = alpha * sufficient(x) + (1.0 - alpha) * mean_of(theta_hat);
    return project(theta_from_mean(m));
}

double ChangeModel::sufficient(double x) const {
    check_support(x);
    return family_ == Family::ExponentialFamily ? exp_.sufficient(x) : x;
}

double ChangeModel::segment_value(double sum_t, double n, double theta) const {
    switch (family_) {
        case Family::Gaussian:
            return (theta - theta0_) * (sum_t - 0.5 * n * (theta + theta0_)) / (sigma_ * sigma_);
        case Family::Bernoulli:
            return sum_t * std::log(theta / theta0_) +
                   (n - sum_t) * std::log((1.0 - theta) / (1.0 - theta0_));
        case Family::ExponentialFamily:
            return (theta - theta0_) * sum_t -
                   n * (exp_.log_partition(theta) - exp_.log_partition(theta0_));
    }
    return 0.0;
}

double ChangeModel::segment_sup(double sum_t, double n, double* argmax) const {
    double theta = 0.0;
    if (family_ != Family::ExponentialFamily || exp_.mean_to_natural) {
        // Concave in theta, so clamping the free maximiser is the constrained one.
        theta = theta_set_.clamp(theta_from_mean(sum_t / n));
    } else {
        if (!std::isfinite(theta_set_.lo) || !std::isfinite(theta_set_.hi)) {
            throw CapabilityError(exp_.name + ": golden-section GLR needs a bounded theta_set");
        }
        theta = golden_section_max([&](double th) { return segment_value(sum_t, n, th); },
                                   theta_set_.lo, theta_set_.hi, 1e-8)
                    .first;
    }
    if (argmax != nullptr) {
        *argmax = theta;
    }
    return segment_value(sum_t, n, theta);
}

double ChangeModel::score_at_pre(double x) const {
    switch (family_) {
        case Family::Gaussian:
            return (x - theta0_) / (sigma_ * sigma_);
        case Family::Bernoulli:
            return (x - theta0_) / (theta0_ * (1.0 - theta0_));
        case Family::ExponentialFamily:
            if (!exp_.mean) {
                throw CapabilityError(exp_.name + ": score needs A'");
            }
            return exp_.sufficient(x) - exp_.mean(theta0_);
    }
    return 0.0;
}

double ChangeModel::fisher_information_pre() const {
    switch (family_) {
        case Family::Gaussian:
            return 1.0 / (sigma_ * sigma_);
        case Family::Bernoulli:
            return 1.0 / (theta0_ * (1.0 - theta0_));
        case Family::ExponentialFamily:
            if (!exp_.variance) {
                throw CapabilityError(exp_.name + ": Fisher information needs A''");
            }
            return exp_.variance(theta0_);
    }
    return 0.0;
}

StreamSampler::StreamSampler(const ChangeModel& model, std::uint64_t change_point,
                             double post_theta, std::uint64_t seed)
    : model_(&model), change_point_(change_point), post_theta_(post_theta), rng_(seed) {
    if (change_point < 1) {
        throw ParameterError("change point must be >= 1");
    }
    if (change_point != kNoChange && !model.theta_set().contains(post_theta)) {
        throw ParameterError("post-change theta outside theta_set");
    }
}

double StreamSampler::next() {
    ++t_;
    return t_ < change_point_ ? model_->sample_pre(rng_) : model_->sample(rng_, post_theta_);
}

std::vector<double> sample_stream(const StreamSpec& spec) {
    if (spec.horizon < 1) {
        throw ParameterError("sample_stream: horizon must be >= 1");
    }
    StreamSampler sampler(spec.model, spec.change_point, spec.post_theta, spec.seed);
    std::vector<double> out(spec.horizon);
    for (auto& x : out) {
        x = sampler.next();
    }
    return out;
}

}  // namespace cpd
