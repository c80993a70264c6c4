#include "cpd/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cpd/normal.hpp"

namespace cpd {

double edd_lower_bound(double gamma, double divergence) {
    if (!(divergence > 0.0)) {
        throw ParameterError("edd_lower_bound: divergence must be positive");
    }
    if (!(gamma > 1.0)) {
        throw ParameterError("edd_lower_bound: gamma must exceed 1");
    }
    return std::log(gamma) / divergence;
}

double cusum_arl_wald_bound(double b) {
    if (!(b >= 0.0)) {
        throw ParameterError("cusum_arl_wald_bound: b must be nonnegative");
    }
    return std::exp(b);
}

namespace {

struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
    double se() const {
        if (n < 2) {
            return 0.0;
        }
        const double m = mean();
        const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) /
                                             static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }
};

}  // namespace

LadderEstimate estimate_ladder(const IncrementSampler& post, const IncrementSampler& pre,
                               const LadderOptions& options) {
    if (options.reps < 2) {
        throw ParameterError("estimate_ladder: need at least two replications");
    }
    if (options.cap < 1) {
        throw ParameterError("estimate_ladder: cap must be >= 1");
    }
    LadderEstimate out;
    out.reps = options.reps;

    // First strict ascent under P1.
    Moments zplus;
    Moments zplus_sq;
    Moments exp_neg;
    Moments tau_plus;
    {
        Rng rng(substream_seed(options.seed, 0));
        for (std::size_t r = 0; r < options.reps; ++r) {
            double s = 0.0;
            std::size_t t = 0;
            while (t < options.cap) {
                s += post(rng);
                ++t;
                if (s > 0.0) {
                    break;
                }
            }
            if (!(s > 0.0)) {
                ++out.unresolved;
                continue;
            }
            zplus.add(s);
            zplus_sq.add(s * s);
            exp_neg.add(std::exp(-s));
            tau_plus.add(static_cast<double>(t));
        }
    }
    if (zplus.n == 0) {
        throw NumericError("estimate_ladder: post-change walk never became positive");
    }

    // No return to (-inf, 0] under P1.
    std::size_t escaped = 0;
    {
        Rng rng(substream_seed(options.seed, 1));
        for (std::size_t r = 0; r < options.reps; ++r) {
            double s = 0.0;
            bool returned = false;
            bool decided = false;
            for (std::size_t t = 0; t < options.cap; ++t) {
                s += post(rng);
                if (s <= 0.0) {
                    returned = true;
                    decided = true;
                    break;
                }
                if (s >= options.escape_level) {
                    decided = true;
                    break;
                }
            }
            if (!returned) {
                ++escaped;
                if (!decided) {
                    ++out.unresolved;
                }
            }
        }
    }

    // Descent time under P0.
    Moments tau_minus;
    {
        Rng rng(substream_seed(options.seed, 2));
        for (std::size_t r = 0; r < options.reps; ++r) {
            double s = 0.0;
            std::size_t t = 0;
            while (t < options.cap) {
                s += pre(rng);
                ++t;
                if (s <= 0.0) {
                    break;
                }
            }
            if (s > 0.0) {
                ++out.unresolved;
            }
            tau_minus.add(static_cast<double>(t));
        }
    }

    const double n = static_cast<double>(options.reps);
    out.mean_zplus = zplus.mean();
    out.second_zplus = zplus_sq.mean();
    out.exp_neg_zplus = exp_neg.mean();
    out.mean_tau_plus = tau_plus.mean();
    out.p_no_return = static_cast<double>(escaped) / n;
    out.mean_tau_minus_0 = tau_minus.mean();
    out.se_mean_zplus = zplus.se();
    out.se_second_zplus = zplus_sq.se();
    out.se_exp_neg_zplus = exp_neg.se();
    out.se_p_no_return = std::sqrt(out.p_no_return * (1.0 - out.p_no_return) / n);
    out.se_mean_tau_minus_0 = tau_minus.se();
    out.cap_warning = out.unresolved > 0;
    return out;
}

LadderEstimate estimate_ladder(const ChangeModel& model, double theta, const LadderOptions& options) {
    if (!(model.kl_divergence(theta) > 0.0)) {
        throw ParameterError("estimate_ladder: post-change parameter equals the pre-change one");
    }
    const IncrementSampler post = [&model, theta](Rng& rng) {
        return model.log_lr(model.sample(rng, theta), theta);
    };
    const IncrementSampler pre = [&model, theta](Rng& rng) {
        return model.log_lr(model.sample_pre(rng), theta);
    };
    return estimate_ladder(post, pre, options);
}

Estimate cusum_arl_approx(const LadderEstimate& ladder, double b) {
    const double denom = ladder.p_no_return * (1.0 - ladder.exp_neg_zplus);
    if (!(denom > 0.0) || !(ladder.mean_zplus > 0.0) || !(ladder.mean_tau_minus_0 > 0.0)) {
        throw NumericError("cusum_arl_approx: degenerate ladder estimate");
    }
    Estimate e;
    e.value = ladder.mean_tau_minus_0 * ladder.mean_zplus * std::exp(b) / denom;
    const auto rel = [](double se, double v) { return se / v; };
    const double r2 = std::pow(rel(ladder.se_mean_tau_minus_0, ladder.mean_tau_minus_0), 2) +
                      std::pow(rel(ladder.se_mean_zplus, ladder.mean_zplus), 2) +
                      std::pow(rel(ladder.se_p_no_return, ladder.p_no_return), 2) +
                      std::pow(rel(ladder.se_exp_neg_zplus, 1.0 - ladder.exp_neg_zplus), 2);
    e.std_error = e.value * std::sqrt(r2);
    return e;
}

std::pair<double, double> cusum_edd_bounds(double b, double divergence, double overshoot) {
    if (!(divergence > 0.0)) {
        throw ParameterError("cusum_edd_bounds: divergence must be positive");
    }
    return {b / divergence, (b + std::max(overshoot, 0.0)) / divergence};
}

std::pair<double, double> cusum_edd_bounds(const LadderEstimate& ladder, double b, double divergence) {
    if (!(ladder.mean_zplus > 0.0)) {
        throw NumericError("cusum_edd_bounds: degenerate ladder estimate");
    }
    return cusum_edd_bounds(b, divergence, ladder.second_zplus / (2.0 * ladder.mean_zplus));
}

double nu_series(double x, double tol) {
    if (!(x > 0.0)) {
        throw DomainError("nu_series: x must be positive");
    }
    if (!(tol > 0.0)) {
        throw ParameterError("nu_series: tol must be positive");
    }
    double sum = 0.0;
    for (std::size_t i = 1;; ++i) {
        const double di = static_cast<double>(i);
        const double term = normal_cdf(-0.5 * x * std::sqrt(di)) / di;
        sum += term;
        if (term < tol) {
            break;
        }
    }
    return 2.0 / (x * x) * std::exp(-2.0 * sum);
}

double nu_approx(double x) {
    if (!(x > 0.0)) {
        throw DomainError("nu_approx: x must be positive");
    }
    if (x < 1e-6) {
        return 1.0;
    }
    const double h = 0.5 * x;
    return (2.0 / x) * (normal_cdf(h) - 0.5) / (h * normal_cdf(h) + normal_pdf(h));
}

double nu(double x, NuVariant variant) {
    return variant == NuVariant::Approx ? nu_approx(x) : nu_series(x);
}

double mills_ratio(double c, NuVariant variant) {
    if (!(c > 0.0)) {
        throw DomainError("mills_ratio: c must be positive");
    }
    return c * nu(std::sqrt(2.0 * c), variant);
}

Estimate mills_ratio_mc(double c, std::size_t reps, std::uint64_t seed, std::size_t truncation) {
    if (!(c > 0.0)) {
        throw DomainError("mills_ratio_mc: c must be positive");
    }
    if (reps < 2) {
        throw ParameterError("mills_ratio_mc: need at least two replications");
    }
    Rng rng(seed);
    const double sd = std::sqrt(2.0 * c);
    std::vector<double> y(2 * truncation + 1);
    Moments m;
    for (std::size_t r = 0; r < reps; ++r) {
        y[truncation] = 0.0;
        for (std::size_t i = 1; i <= truncation; ++i) {
            y[truncation + i] = y[truncation + i - 1] - c + sd * rng.normal();
        }
        for (std::size_t i = 1; i <= truncation; ++i) {
            y[truncation - i] = y[truncation - i + 1] - c + sd * rng.normal();
        }
        const double top = *std::max_element(y.begin(), y.end());
        double s = 0.0;
        for (double v : y) {
            s += std::exp(v - top);
        }
        m.add(1.0 / s);
    }
    return {m.mean(), m.se()};
}

double siegmund_integrand(double x, NuVariant variant) {
    if (x < 0.0) {
        throw DomainError("siegmund_integrand: x must be nonnegative");
    }
    if (x == 0.0) {
        return 1.0;
    }
    const double z = std::sqrt(2.0 / x);
    // Past z = 40 the asymptote 2/z^2 = x is used, giving exactly 1.
    if (z > 40.0) {
        return 1.0;
    }
    const double v = nu(z, variant);
    return v * v / (x * x);
}

namespace {

double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                    double fb, double whole, double tol, int depth, bool& ok) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double diff = left + right - whole;
    if (std::abs(diff) <= 15.0 * tol) {
        return left + right + diff / 15.0;
    }
    if (depth <= 0) {
        ok = false;
        return left + right;
    }
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, ok) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, ok);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi, double rel_tol,
                        int max_depth) {
    if (!(hi > lo)) {
        return 0.0;
    }
    const double fa = f(lo);
    const double fb = f(hi);
    const double fm = f(0.5 * (lo + hi));
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    const double tol = rel_tol * std::max(std::abs(whole), 1e-300);
    bool ok = true;
    const double v = simpson_step(f, lo, hi, fa, fm, fb, whole, tol, max_depth, ok);
    if (!ok || !std::isfinite(v)) {
        throw NumericError("adaptive_simpson: no convergence within the depth budget");
    }
    return v;
}

FormulaReport glr_arl_siegmund(double b, double c_ratio, std::optional<double> horizon,
                               NuVariant variant) {
    if (!(b > 0.0)) {
        throw ParameterError("glr_arl_siegmund: b must be positive");
    }
    if (!(c_ratio > 0.0)) {
        throw ParameterError("glr_arl_siegmund: C must be positive");
    }
    FormulaReport rep;
    rep.formula = "glr_arl_siegmund";
    rep.inputs = {{"b", b}, {"C", c_ratio}};
    const auto f = [variant](double x) { return siegmund_integrand(x, variant); };
    const double upper = 1.0 / c_ratio;
    const double split = 2.0 / 1600.0;  // z = sqrt(2/x) = 40
    double integral = 0.0;
    if (upper <= split) {
        integral = adaptive_simpson(f, 0.0, upper);
    } else {
        integral = adaptive_simpson(f, 0.0, split) + adaptive_simpson(f, split, upper);
    }
    rep.inputs.emplace_back("integral", integral);
    rep.value = std::sqrt(4.0 * std::numbers::pi) / std::sqrt(b) * std::exp(b) / integral;

    const double m_lo = std::log(b);
    const double m_hi = std::exp(b) / std::sqrt(b);
    if (horizon) {
        rep.inputs.emplace_back("m", *horizon);
        if (!(*horizon > m_lo && *horizon < m_hi)) {
            rep.warnings.push_back("horizon m outside log b << m << b^-1/2 e^b");
        }
    } else if (m_hi < 10.0 * std::max(m_lo, 1.0)) {
        rep.warnings.push_back("b too small for the Poisson approximation window");
    }
    return rep;
}

double wl_cusum_edd_bound(double b, double w, double divergence, double j0,
                          std::optional<double> divergence_hat, std::optional<double> j0_hat) {
    const double dh = divergence_hat.value_or(divergence);
    const double jh = j0_hat.value_or(j0);
    if (!(dh > 0.0)) {
        throw ParameterError("wl_cusum_edd_bound: estimated divergence must be positive");
    }
    if (b < 0.0 || w < 0.0 || divergence < 0.0 || jh < 0.0) {
        throw ParameterError("wl_cusum_edd_bound: inputs must be nonnegative");
    }
    const double num = b + jh / dh + std::sqrt(b * jh / dh) + w * divergence +
                       std::sqrt(divergence * w * jh / dh);
    return num / dh;
}

bool ZField::contains(std::size_t t, std::size_t k) const noexcept {
    if (t < 1 || t > m_ || k < 1 || k > t) {
        return false;
    }
    return t - k <= w_;
}

std::size_t ZField::offset(std::size_t t, std::size_t k) const noexcept {
    const std::size_t lo = t > w_ ? t - w_ : 1;
    return row_start_[t - 1] + (k - lo);
}

double ZField::at(std::size_t t, std::size_t k) const {
    if (!contains(t, k)) {
        throw InputError("ZField: index outside the field");
    }
    return values_[offset(t, k)];
}

double ZField::max() const {
    return values_.empty() ? kInactive : *std::max_element(values_.begin(), values_.end());
}

ZField z_field(std::span<const double> samples, std::size_t w) {
    if (samples.empty()) {
        throw InputError("z_field: need at least one sample");
    }
    ZField f(samples.size(), w);
    std::vector<double> prefix(samples.size() + 1, 0.0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        prefix[i + 1] = prefix[i] + samples[i];
    }
    f.row_start_.reserve(samples.size());
    for (std::size_t t = 1; t <= samples.size(); ++t) {
        f.row_start_.push_back(f.values_.size());
        const std::size_t lo = t > w ? t - w : 1;
        for (std::size_t k = lo; k <= t; ++k) {
            const double n = static_cast<double>(t - k + 1);
            f.values_.push_back((prefix[t] - prefix[k - 1]) / std::sqrt(n));
        }
    }
    return f;
}

ZFieldDetector::ZFieldDetector(double mean0, double sigma, std::size_t w)
    : mean0_(mean0), sigma_(sigma), w_(w), window_(w + 1) {
    if (!(sigma > 0.0)) {
        throw ParameterError("zfield detector: sigma must be positive");
    }
}

double ZFieldDetector::update(double x) {
    if (!std::isfinite(x)) {
        throw InputError("zfield detector: non-finite observation");
    }
    window_.push((x - mean0_) / sigma_);
    double s = 0.0;
    double best = kInactive;
    for (std::size_t age = 0; age < window_.size(); ++age) {
        s += window_.recent(age);
        best = std::max(best, s / std::sqrt(static_cast<double>(age + 1)));
    }
    count(4 * window_.size() + 2);
    return emit(best);
}

void ZFieldDetector::reset() {
    window_.clear();
    statistic_ = kInactive;
}

std::unique_ptr<Detector> ZFieldDetector::clone() const {
    return std::make_unique<ZFieldDetector>(*this);
}

}  // namespace cpd
