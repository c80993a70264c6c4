#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cpd/detectors.hpp"

namespace cpd {

// Increments L(lambda) = exp(lambda s(x) - phi(lambda) nu(x)) with
// E0[L] <= 1 for every lambda in [lambda_lo, lambda_hi] and every null
// distribution of the declared class.
struct IncrementFamily {
    std::string name;
    std::function<double(double)> s;
    std::function<double(double)> nu_weight;
    std::function<double(double)> phi;
    double lambda_lo = 0.0;
    double lambda_hi = kInf;
    // Optional closed forms; numeric convex search is used otherwise.
    std::function<double(double)> conjugate;         // phi*(gap)
    std::function<double(double)> conjugate_argmax;  // argmax_lambda lambda*gap - phi(lambda)

    // s(x) = x - mean0, nu = 1, phi = sigma^2 lambda^2 / 2.
    static IncrementFamily sub_gaussian(double mean0 = 0.0, double sigma = 1.0);
    // Observations in [0, 1] with null mean at most mean0; phi is the centred
    // Bernoulli(mean0) cumulant, so phi* is the Bernoulli KL divergence.
    static IncrementFamily sub_bernoulli(double mean0);

    bool admits(double lambda) const noexcept { return lambda >= lambda_lo && lambda <= lambda_hi; }
    double phi_star(double gap) const;
    double lambda_for_gap(double gap) const;
};

// log L(lambda) at x.
double increment_log(const IncrementFamily& family, double lambda, double x);

// log M_{t+1} = max{log M_t, 0} + log L_{t+1}: max over segments ending at t+1.
double baseline_update(double log_m, double log_l);

// Weighted mixture of baseline e-detectors sharing one increment family.
class EDetectorMixture {
public:
    EDetectorMixture(IncrementFamily family, std::vector<double> lambdas, std::vector<double> weights,
                     double gap_lo = 0.0, double gap_hi = 0.0);

    // Updates every baseline and returns log sum_i w_i M_t(lambda_i).
    double update(double x);
    void reset();

    std::size_t size() const noexcept { return lambdas_.size(); }
    const IncrementFamily& family() const noexcept { return family_; }
    const std::vector<double>& lambdas() const noexcept { return lambdas_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<double>& log_baselines() const noexcept { return log_m_; }
    double log_statistic() const noexcept { return log_stat_; }
    double gap_lo() const noexcept { return gap_lo_; }
    double gap_hi() const noexcept { return gap_hi_; }

private:
    IncrementFamily family_;
    std::vector<double> lambdas_;
    std::vector<double> log_weights_;
    std::vector<double> weights_;
    std::vector<double> log_m_;
    double log_stat_ = -kInf;
    double gap_lo_;
    double gap_hi_;
};

// K = max(1, 1 + ceil(log_eta(phi*(gap_hi) / phi*(gap_lo)))) baselines whose
// target gaps have phi* on a geometric ladder with ratio eta; uniform weights.
EDetectorMixture design_mixture(const IncrementFamily& family, double gap_lo, double gap_hi,
                                double eta);

std::size_t mixture_size(const IncrementFamily& family, double gap_lo, double gap_hi, double eta);

// First t with log M_t >= b over a recorded trajectory.
AlarmResult e_stop(std::span<const double> log_m_trajectory, double b);

struct MixtureEddBound {
    double bound = 0.0;
    double g_b = 0.0;
    double eta_argmin = 0.0;
};

// g_b / D + Var / D^2 + 1 with g_b minimised over the eta grid.
MixtureEddBound edd_bound_mixture(double b, std::span<const double> eta_grid,
                                  const IncrementFamily& family, double gap_lo, double gap_hi,
                                  double divergence, double variance);

// Uniform grid on (1, 10] with the given spacing.
std::vector<double> default_eta_grid(double step = 1e-3);

class EDetector final : public Detector {
public:
    explicit EDetector(EDetectorMixture mixture);

    double update(double x) override;
    void reset() override;
    std::unique_ptr<Detector> clone() const override;
    std::string name() const override { return "e_detector"; }
    Robustness robustness() const override { return Robustness::Nonparametric; }
    CrossingRule crossing_rule() const override { return CrossingRule::NonStrict; }
    std::size_t state_bytes() const override;
    const EDetectorMixture& mixture() const noexcept { return mixture_; }

private:
    EDetectorMixture mixture_;
};

}  // namespace cpd
