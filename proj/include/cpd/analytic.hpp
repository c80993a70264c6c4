#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpd/changemodel.hpp"
#include "cpd/detectors.hpp"

namespace cpd {

// log(gamma) / D.
double edd_lower_bound(double gamma, double divergence);

// e^b: ARL lower bound for exact CUSUM at threshold b.
double cusum_arl_wald_bound(double b);

// Ladder quantities of the log-likelihood-ratio random walk S_t.
struct LadderEstimate {
    double mean_zplus = 0.0;        // E1[z+]
    double second_zplus = 0.0;      // E1[(z+)^2]
    double exp_neg_zplus = 0.0;     // E1[exp(-z+)]
    double mean_tau_plus = 0.0;     // E1[tau+]
    double p_no_return = 0.0;       // P1(tau- = infinity)
    double mean_tau_minus_0 = 0.0;  // E0[tau-]
    std::size_t reps = 0;

    double se_mean_zplus = 0.0;
    double se_second_zplus = 0.0;
    double se_exp_neg_zplus = 0.0;
    double se_p_no_return = 0.0;
    double se_mean_tau_minus_0 = 0.0;

    // Post-change walks still undecided at the cap (counted as no-return).
    std::size_t unresolved = 0;
    bool cap_warning = false;
};

struct LadderOptions {
    std::size_t reps = 20000;
    std::uint64_t seed = 0;
    std::size_t cap = 10000;
    // A post-change LR walk above this level returns below 0 with probability
    // at most exp(-level), since exp(-S_t) is a martingale under P1.
    double escape_level = 40.0;
};

using IncrementSampler = std::function<double(Rng&)>;

// tau- is the first t >= 1 with S_t <= 0; tau+ the first with S_t > 0.
LadderEstimate estimate_ladder(const IncrementSampler& post, const IncrementSampler& pre,
                               const LadderOptions& options);
// Increments z = log f1(x, theta)/f0(x) under f1(., theta) and f0.
LadderEstimate estimate_ladder(const ChangeModel& model, double theta, const LadderOptions& options);

// E0[tau-] E1[z+] e^b / (P1(tau- = inf) (1 - E1[exp(-z+)])), with a
// delta-method standard error.
Estimate cusum_arl_approx(const LadderEstimate& ladder, double b);

// (b/D, (b + overshoot)/D).
std::pair<double, double> cusum_edd_bounds(double b, double divergence, double overshoot);
// overshoot = E1[(z+)^2] / (2 E1[z+]).
std::pair<double, double> cusum_edd_bounds(const LadderEstimate& ladder, double b, double divergence);

enum class NuVariant { Approx, Series };

// 2 x^-2 exp(-2 sum_i i^-1 Phi(-x sqrt(i) / 2)); stops once a term is below tol.
double nu_series(double x, double tol = 1e-14);
// (2/x)(Phi(x/2) - 0.5) / ((x/2) Phi(x/2) + phi(x/2)); 1 below x = 1e-6.
double nu_approx(double x);
double nu(double x, NuVariant variant = NuVariant::Approx);

// c nu(sqrt(2c)).
double mills_ratio(double c, NuVariant variant = NuVariant::Approx);

// Direct simulation of E[max_i e^{Y_i} / sum_i e^{Y_i}] for the two-sided
// Gaussian walk with drift -c|i| and increment variance 2c, |i| <= truncation.
Estimate mills_ratio_mc(double c, std::size_t reps, std::uint64_t seed, std::size_t truncation = 200);

struct FormulaReport {
    std::string formula;
    std::vector<std::pair<std::string, double>> inputs;
    double value = 0.0;
    double std_error = 0.0;
    std::vector<std::string> warnings;
};

// x^-2 nu(sqrt(2/x))^2, with the limit 1 at x = 0.
double siegmund_integrand(double x, NuVariant variant = NuVariant::Approx);

// Adaptive Simpson on [lo, hi] to the requested relative tolerance.
// Throws NumericError when the depth budget is exhausted.
double adaptive_simpson(const std::function<double(double)>& f, double lo, double hi,
                        double rel_tol = 1e-8, int max_depth = 60);

// sqrt(4 pi) b^-1/2 e^b / integral_0^{1/C} x^-2 nu^2(sqrt(2/x)) dx.
// `horizon` is the m of the Poisson approximation; when given, it is checked
// against log b << m << b^-1/2 e^b and a warning is attached if it falls outside.
FormulaReport glr_arl_siegmund(double b, double c_ratio, std::optional<double> horizon = std::nullopt,
                               NuVariant variant = NuVariant::Approx);

// (b + J0h/Dh + sqrt(b J0h/Dh) + w D + sqrt(D w J0h/Dh)) / Dh with hatted
// values defaulting to the true ones.
double wl_cusum_edd_bound(double b, double w, double divergence, double j0,
                          std::optional<double> divergence_hat = std::nullopt,
                          std::optional<double> j0_hat = std::nullopt);

// Z_{t,k} = sum_{i=k}^t x_i / sqrt(t-k+1) over 1 <= t <= m, max(t-w, 1) <= k <= t.
class ZField {
public:
    ZField(std::size_t m, std::size_t w) : m_(m), w_(w) {}

    std::size_t length() const noexcept { return m_; }
    std::size_t window() const noexcept { return w_; }
    bool contains(std::size_t t, std::size_t k) const noexcept;
    double at(std::size_t t, std::size_t k) const;
    // Local scale c = b / (t - k + 1).
    static double c(std::size_t t, std::size_t k, double b) {
        return b / static_cast<double>(t - k + 1);
    }
    double max() const;

private:
    friend ZField z_field(std::span<const double> samples, std::size_t w);
    std::size_t offset(std::size_t t, std::size_t k) const noexcept;

    std::size_t m_;
    std::size_t w_;
    std::vector<std::size_t> row_start_;
    std::vector<double> values_;
};

ZField z_field(std::span<const double> samples, std::size_t w);

// Streaming max_k Z_{t,k} over k in [max(t-w, 1), t] for standardised data.
// Alarm rule max Z >= threshold (pass sqrt(2b)).
class ZFieldDetector final : public Detector {
public:
    ZFieldDetector(double mean0, double sigma, std::size_t w);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "zfield"; }
    Robustness robustness() const override { return Robustness::Parametric; }
    CrossingRule crossing_rule() const override { return CrossingRule::NonStrict; }
    std::size_t state_bytes() const override { return window_.capacity() * sizeof(double); }

private:
    double mean0_;
    double sigma_;
    std::size_t w_;
    Window window_;
};

}  // namespace cpd
