#include "cpd/edetect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpd/numeric.hpp"

namespace cpd {

IncrementFamily IncrementFamily::sub_gaussian(double mean0, double sigma) {
    if (!(sigma > 0.0)) {
        throw ParameterError("sub_gaussian: sigma must be positive");
    }
    const double s2 = sigma * sigma;
    IncrementFamily f;
    f.name = "sub_gaussian";
    f.s = [mean0](double x) { return x - mean0; };
    f.nu_weight = [](double) { return 1.0; };
    f.phi = [s2](double l) { return 0.5 * s2 * l * l; };
    f.conjugate = [s2](double gap) { return gap > 0.0 ? 0.5 * gap * gap / s2 : 0.0; };
    f.conjugate_argmax = [s2](double gap) { return std::max(gap, 0.0) / s2; };
    return f;
}

IncrementFamily IncrementFamily::sub_bernoulli(double mean0) {
    if (!(mean0 > 0.0 && mean0 < 1.0)) {
        throw ParameterError("sub_bernoulli: mean0 must lie in (0, 1)");
    }
    const double m = mean0;
    IncrementFamily f;
    f.name = "sub_bernoulli";
    f.s = [m](double x) {
        if (!(x >= 0.0 && x <= 1.0)) {
            throw DomainError("sub_bernoulli: observation outside [0, 1]");
        }
        return x - m;
    };
    f.nu_weight = [](double) { return 1.0; };
    f.phi = [m](double l) { return std::log1p(m * std::expm1(l)) - l * m; };
    f.conjugate = [m](double gap) {
        if (gap <= 0.0) {
            return 0.0;
        }
        if (gap >= 1.0 - m) {
            return kInf;
        }
        const double p = m + gap;
        return p * std::log(p / m) + (1.0 - p) * std::log((1.0 - p) / (1.0 - m));
    };
    f.conjugate_argmax = [m](double gap) {
        if (gap <= 0.0) {
            return 0.0;
        }
        if (gap >= 1.0 - m) {
            return kInf;
        }
        const double p = m + gap;
        return std::log(p * (1.0 - m) / (m * (1.0 - p)));
    };
    return f;
}

namespace {

// Finite search bracket for the conjugate maximisation.
double search_hi(const IncrementFamily& f) {
    return std::min(f.lambda_hi, f.lambda_lo + 1e3);
}

}  // namespace

double IncrementFamily::phi_star(double gap) const {
    if (conjugate) {
        return conjugate(gap);
    }
    return golden_section_max([&](double l) { return l * gap - phi(l); }, lambda_lo,
                              search_hi(*this), 1e-8)
        .second;
}

double IncrementFamily::lambda_for_gap(double gap) const {
    const double l = conjugate_argmax
                         ? conjugate_argmax(gap)
                         : golden_section_max([&](double x) { return x * gap - phi(x); }, lambda_lo,
                                              search_hi(*this), 1e-8)
                               .first;
    return std::clamp(l, lambda_lo, lambda_hi);
}

double increment_log(const IncrementFamily& family, double lambda, double x) {
    if (!family.admits(lambda)) {
        throw ParameterError("increment_log: lambda outside the admissible set");
    }
    return lambda * family.s(x) - family.phi(lambda) * family.nu_weight(x);
}

double baseline_update(double log_m, double log_l) {
    if (!std::isfinite(log_l)) {
        throw InputError("baseline_update: non-finite log increment");
    }
    return std::max(log_m, 0.0) + log_l;
}

EDetectorMixture::EDetectorMixture(IncrementFamily family, std::vector<double> lambdas,
                                   std::vector<double> weights, double gap_lo, double gap_hi)
    : family_(std::move(family)),
      lambdas_(std::move(lambdas)),
      weights_(std::move(weights)),
      gap_lo_(gap_lo),
      gap_hi_(gap_hi) {
    if (lambdas_.empty() || lambdas_.size() != weights_.size()) {
        throw ParameterError("mixture: need one positive weight per lambda");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < lambdas_.size(); ++i) {
        if (!family_.admits(lambdas_[i])) {
            throw ParameterError("mixture: lambda outside the admissible set");
        }
        if (!(weights_[i] > 0.0)) {
            throw ParameterError("mixture: weights must be positive");
        }
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw ParameterError("mixture: weights must sum to 1");
    }
    log_weights_.reserve(weights_.size());
    for (double w : weights_) {
        log_weights_.push_back(std::log(w));
    }
    log_m_.assign(lambdas_.size(), -kInf);
}

double EDetectorMixture::update(double x) {
    const double sx = family_.s(x);
    const double nx = family_.nu_weight(x);
    double peak = -kInf;
    for (std::size_t i = 0; i < lambdas_.size(); ++i) {
        const double log_l = lambdas_[i] * sx - family_.phi(lambdas_[i]) * nx;
        log_m_[i] = baseline_update(log_m_[i], log_l);
        peak = std::max(peak, log_weights_[i] + log_m_[i]);
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < lambdas_.size(); ++i) {
        acc += std::exp(log_weights_[i] + log_m_[i] - peak);
    }
    log_stat_ = peak + std::log(acc);
    return log_stat_;
}

void EDetectorMixture::reset() {
    std::fill(log_m_.begin(), log_m_.end(), -kInf);
    log_stat_ = -kInf;
}

namespace {

double ladder_rungs(double ratio, double eta) {
    // Guard against log(16)/log(2) landing a hair above 4.
    return std::ceil(std::log(ratio) / std::log(eta) - 1e-12);
}

void check_gaps(double gap_lo, double gap_hi) {
    if (!(gap_lo > 0.0) || !(gap_hi >= gap_lo)) {
        throw ParameterError("mixture: need 0 < gap_lo <= gap_hi");
    }
}

}  // namespace

std::size_t mixture_size(const IncrementFamily& family, double gap_lo, double gap_hi, double eta) {
    check_gaps(gap_lo, gap_hi);
    if (!(eta > 1.0)) {
        throw ParameterError("mixture: eta must exceed 1");
    }
    const double ratio = family.phi_star(gap_hi) / family.phi_star(gap_lo);
    const double k = 1.0 + ladder_rungs(ratio, eta);
    return static_cast<std::size_t>(std::max(1.0, k));
}

EDetectorMixture design_mixture(const IncrementFamily& family, double gap_lo, double gap_hi,
                                double eta) {
    const std::size_t k = mixture_size(family, gap_lo, gap_hi, eta);
    const double base = family.phi_star(gap_lo);
    const double top = family.phi_star(gap_hi);
    std::vector<double> lambdas;
    lambdas.reserve(k);
    for (std::size_t j = 0; j < k; ++j) {
        const double target = std::min(base * std::pow(eta, static_cast<double>(j)), top);
        // phi* is increasing on positive gaps.
        const double gap = j == 0        ? gap_lo
                           : target >= top ? gap_hi
                                           : bisect_increasing([&](double g) { return family.phi_star(g); },
                                                               target, gap_lo, gap_hi);
        lambdas.push_back(family.lambda_for_gap(gap));
    }
    std::vector<double> weights(k, 1.0 / static_cast<double>(k));
    return EDetectorMixture(family, std::move(lambdas), std::move(weights), gap_lo, gap_hi);
}

AlarmResult e_stop(std::span<const double> log_m_trajectory, double b) {
    if (!(b > 0.0)) {
        throw ParameterError("e_stop: threshold must be positive");
    }
    AlarmResult r;
    r.threshold = b;
    r.rule = CrossingRule::NonStrict;
    for (std::size_t t = 0; t < log_m_trajectory.size(); ++t) {
        r.statistic = log_m_trajectory[t];
        if (crosses(r.statistic, b, r.rule)) {
            r.stopped = true;
            r.stop_time = t + 1;
            return r;
        }
    }
    r.stop_time = log_m_trajectory.size();
    return r;
}

MixtureEddBound edd_bound_mixture(double b, std::span<const double> eta_grid,
                                  const IncrementFamily& family, double gap_lo, double gap_hi,
                                  double divergence, double variance) {
    if (!(divergence > 0.0)) {
        throw ParameterError("edd_bound_mixture: divergence must be positive");
    }
    check_gaps(gap_lo, gap_hi);
    const double ratio = family.phi_star(gap_hi) / family.phi_star(gap_lo);
    MixtureEddBound out;
    out.g_b = kInf;
    for (double eta : eta_grid) {
        if (!(eta > 1.0)) {
            continue;
        }
        const double g = eta * (b + std::log(1.0 + std::max(0.0, ladder_rungs(ratio, eta))));
        if (g < out.g_b) {
            out.g_b = g;
            out.eta_argmin = eta;
        }
    }
    if (!std::isfinite(out.g_b)) {
        throw ParameterError("edd_bound_mixture: eta grid has no point above 1");
    }
    out.bound = out.g_b / divergence + variance / (divergence * divergence) + 1.0;
    return out;
}

std::vector<double> default_eta_grid(double step) {
    std::vector<double> grid;
    for (int j = 1;; ++j) {
        const double eta = 1.0 + step * j;
        if (eta > 10.0 + 1e-12) {
            break;
        }
        grid.push_back(eta);
    }
    return grid;
}

EDetector::EDetector(EDetectorMixture mixture) : mixture_(std::move(mixture)) {}

double EDetector::update(double x) {
    const double v = mixture_.update(x);
    count(6 * mixture_.size() + 2);
    return emit(v);
}

void EDetector::reset() {
    mixture_.reset();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> EDetector::clone() const {
    return std::make_unique<EDetector>(*this);
}

std::size_t EDetector::state_bytes() const {
    return 3 * mixture_.size() * sizeof(double);
}

}  // namespace cpd
