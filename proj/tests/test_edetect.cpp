#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cpd/edetect.hpp"

using namespace cpd;

TEST(Increment, SubGaussianExamples) {
    const auto f = IncrementFamily::sub_gaussian();
    EXPECT_DOUBLE_EQ(increment_log(f, 1.0, 0.0), -0.5);
    EXPECT_DOUBLE_EQ(increment_log(f, 0.0, 3.7), 0.0);
    EXPECT_DOUBLE_EQ(increment_log(f, 0.5, 2.0), 0.875);
    EXPECT_THROW(increment_log(f, -0.1, 1.0), ParameterError);
}

TEST(Increment, NullExpectationAtMostOne) {
    // Exact under N(0,1): E[exp(l x - l^2/2)] = 1. Bernoulli(m): exact as well.
    const auto g = IncrementFamily::sub_gaussian();
    const auto b = IncrementFamily::sub_bernoulli(0.3);
    for (double l : {0.1, 0.5, 1.0, 2.0}) {
        const double eb = 0.3 * std::exp(increment_log(b, l, 1.0)) + 0.7 * std::exp(increment_log(b, l, 0.0));
        EXPECT_NEAR(eb, 1.0, 1e-12);
        // Gauss-Hermite free check: numerical integral over a fine grid.
        double acc = 0.0;
        const double h = 1e-3;
        for (double x = -12.0; x <= 12.0; x += h) {
            acc += std::exp(increment_log(g, l, x)) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI) * h;
        }
        EXPECT_NEAR(acc, 1.0, 1e-6);
    }
}

TEST(Baseline, Examples) {
    double m = -kInf;
    for (int t = 0; t < 10; ++t) {
        m = baseline_update(m, 0.0);
        EXPECT_DOUBLE_EQ(m, 0.0);
    }
    EXPECT_DOUBLE_EQ(baseline_update(-2.0, 1.0), 1.0);
    m = -kInf;
    for (double l : {1.5, -1.5, 2.5}) {
        m = baseline_update(m, l);
    }
    EXPECT_DOUBLE_EQ(m, 2.5);
    EXPECT_THROW(baseline_update(0.0, std::nan("")), InputError);
}

TEST(Baseline, MatchesMaxSuffixSum) {
    Rng rng(13);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<double> z(1 + rep % 12);
        double m = -kInf;
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = rng.normal() - 0.2;
            m = baseline_update(m, z[i]);
            const double o = max_suffix_sum(std::span<const double>(z.data(), i + 1));
            ASSERT_NEAR(m, o, 1e-12 * std::max(1.0, std::abs(o)));
        }
    }
}

TEST(Mixture, SingleComponentEqualsBaseline) {
    const auto f = IncrementFamily::sub_gaussian();
    EDetectorMixture mix(f, {0.7}, {1.0});
    double m = -kInf;
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const double x = rng.normal();
        m = baseline_update(m, increment_log(f, 0.7, x));
        ASSERT_NEAR(mix.update(x), m, 1e-12);
    }
}

TEST(Mixture, WeightedLogSumExp) {
    // phi = 0 makes each log increment lambda * x, so baselines read (2, 0).
    IncrementFamily lin = IncrementFamily::sub_gaussian();
    lin.phi = [](double) { return 0.0; };
    EDetectorMixture mix(lin, {2.0, 0.0}, {0.5, 0.5});
    EXPECT_NEAR(mix.update(1.0), std::log(0.5 * std::exp(2.0) + 0.5), 1e-12);
    EXPECT_NEAR(mix.log_statistic(), 1.4338, 5e-5);

    EDetectorMixture same(lin, {1.0, 1.0, 1.0}, {0.2, 0.3, 0.5});
    EXPECT_NEAR(same.update(0.8), 0.8, 1e-12);
}

TEST(Mixture, RejectsBadWeights) {
    const auto f = IncrementFamily::sub_gaussian();
    EXPECT_THROW(EDetectorMixture(f, {1.0, 2.0}, {0.5, 0.4}), ParameterError);
    EXPECT_THROW(EDetectorMixture(f, {1.0}, {0.5, 0.5}), ParameterError);
    EXPECT_THROW(EDetectorMixture(f, {-1.0}, {1.0}), ParameterError);
}

TEST(Design, MixtureSizes) {
    const auto g = IncrementFamily::sub_gaussian();
    EXPECT_EQ(mixture_size(g, 0.5, 2.0, 2.0), 5u);
    EXPECT_EQ(mixture_size(g, 1.0, 1.0, 2.0), 1u);
    EXPECT_EQ(mixture_size(g, 0.5, 2.0, 1e9), 2u);
    EXPECT_THROW(mixture_size(g, 0.0, 1.0, 2.0), ParameterError);
    EXPECT_THROW(mixture_size(g, 2.0, 1.0, 2.0), ParameterError);

    const auto mix = design_mixture(g, 0.5, 2.0, 2.0);
    ASSERT_EQ(mix.size(), 5u);
    // phi*(gap) = gap^2/2 doubles per rung; lambda* = gap.
    const double expect[] = {0.5, 0.5 * std::sqrt(2.0), 1.0, std::sqrt(2.0), 2.0};
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(mix.lambdas()[i], expect[i], 1e-6) << i;
        EXPECT_DOUBLE_EQ(mix.weights()[i], 0.2);
    }
}

TEST(Design, BernoulliConjugateIsKl) {
    const auto f = IncrementFamily::sub_bernoulli(0.2);
    const double p = 0.5;
    const double kl = p * std::log(p / 0.2) + (1 - p) * std::log((1 - p) / 0.8);
    EXPECT_NEAR(f.phi_star(0.3), kl, 1e-12);
    // Numeric conjugate agrees with the closed form.
    IncrementFamily numeric = f;
    numeric.conjugate = nullptr;
    numeric.conjugate_argmax = nullptr;
    EXPECT_NEAR(numeric.phi_star(0.3), kl, 1e-7);
    EXPECT_NEAR(numeric.lambda_for_gap(0.3), f.lambda_for_gap(0.3), 1e-4);
}

TEST(Stop, Examples) {
    const std::vector<double> flat(30, 0.0);
    EXPECT_FALSE(e_stop(flat, 1.0).stopped);
    const std::vector<double> jump{1.0, 0.2};
    const auto r = e_stop(jump, 1.0);
    EXPECT_TRUE(r.stopped);
    EXPECT_EQ(r.stop_time, 1u);
    EXPECT_EQ(r.rule, CrossingRule::NonStrict);
}

TEST(EddBound, DegenerateLadderApproachesB) {
    const auto g = IncrementFamily::sub_gaussian();
    const auto grid = default_eta_grid();
    EXPECT_NEAR(grid.front(), 1.001, 1e-12);
    EXPECT_NEAR(grid.back(), 10.0, 1e-9);
    const auto r = edd_bound_mixture(4.0, grid, g, 1.0, 1.0, 0.5, 1.0);
    EXPECT_NEAR(r.g_b, 1.001 * 4.0, 1e-9);
    EXPECT_NEAR(r.bound, r.g_b / 0.5 + 1.0 / 0.25 + 1.0, 1e-12);
    EXPECT_THROW(edd_bound_mixture(4.0, grid, g, 1.0, 1.0, 0.0, 1.0), ParameterError);
}

TEST(EddBound, MinimisesOverGrid) {
    const auto g = IncrementFamily::sub_gaussian();
    const std::vector<double> grid{1.5, 2.0, 4.0};
    const auto r = edd_bound_mixture(3.0, grid, g, 0.5, 2.0, 0.5, 1.0);
    double best = kInf;
    for (double eta : grid) {
        const double k = std::ceil(std::log(16.0) / std::log(eta) - 1e-12);
        best = std::min(best, eta * (3.0 + std::log(1.0 + k)));
    }
    EXPECT_NEAR(r.g_b, best, 1e-12);
}

TEST(EDetector, NonStrictAndNonparametric) {
    EDetector d(design_mixture(IncrementFamily::sub_gaussian(), 0.5, 2.0, 2.0));
    EXPECT_EQ(d.crossing_rule(), CrossingRule::NonStrict);
    EXPECT_EQ(d.robustness(), Robustness::Nonparametric);
    const double v = d.update(0.3);
    auto c = d.clone();
    EXPECT_DOUBLE_EQ(c->update(1.0), d.update(1.0));
    d.reset();
    EXPECT_DOUBLE_EQ(d.update(0.3), v);
}
