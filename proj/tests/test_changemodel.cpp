#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "cpd/changemodel.hpp"
#include "cpd/errors.hpp"

using namespace cpd;

TEST(LogLr, GaussianMidpointIsZero) {
    const auto m = ChangeModel::gaussian(0.0, 1.0);
    EXPECT_NEAR(m.log_lr(0.5, 1.0), 0.0, 1e-15);
    EXPECT_NEAR(m.log_lr(2.0, 1.0), 1.5, 1e-15);
}

TEST(LogLr, IdenticalBernoulliIsZero) {
    const auto m = ChangeModel::bernoulli(0.5);
    EXPECT_DOUBLE_EQ(m.log_lr(0.0, 0.5), 0.0);
    EXPECT_DOUBLE_EQ(m.log_lr(1.0, 0.5), 0.0);
}

TEST(LogLr, Errors) {
    const auto b = ChangeModel::bernoulli(0.5);
    EXPECT_THROW(b.log_lr(0.3, 0.8), DomainError);
    EXPECT_THROW(b.log_lr(1.0, 1.5), ParameterError);
    const auto g = ChangeModel::gaussian(0.0, 1.0, {0.2, kInf});
    EXPECT_THROW(g.log_lr(0.0, 0.1), ParameterError);
    EXPECT_THROW(g.log_lr(std::nan(""), 1.0), DomainError);
}

TEST(Divergence, ClosedForms) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    EXPECT_NEAR(g.kl_divergence(1.0), 0.5, 1e-15);
    EXPECT_NEAR(g.kl_divergence(0.0), 0.0, 1e-15);
    const auto b = ChangeModel::bernoulli(0.5);
    EXPECT_NEAR(b.kl_divergence(0.8), 0.8 * std::log(1.6) + 0.2 * std::log(0.4), 1e-12);
    EXPECT_NEAR(b.kl_divergence(0.8), 0.1927, 5e-5);
}

TEST(Divergence, SecondMoment) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    EXPECT_NEAR(g.second_moment_loglr(1.0).value, 1.25, 1e-12);
    EXPECT_NEAR(g.second_moment_loglr(0.0).value, 0.0, 1e-15);

    const auto b = ChangeModel::bernoulli(0.5);
    const double z1 = std::log(0.8 / 0.5);
    const double z0 = std::log(0.2 / 0.5);
    EXPECT_NEAR(b.second_moment_loglr(0.8).value, 0.8 * z1 * z1 + 0.2 * z0 * z0, 1e-12);
}

TEST(Divergence, PoissonMatchesGaussianStyleOracle) {
    // KL(Poisson(l1) || Poisson(l0)) = l1 log(l1/l0) - l1 + l0; eta = log rate.
    const auto p = ChangeModel::exponential_family(ExpFamilySpec::poisson(2.0), {-5.0, 5.0});
    const double l1 = 3.0;
    EXPECT_NEAR(p.kl_divergence(std::log(l1)), l1 * std::log(l1 / 2.0) - l1 + 2.0, 1e-10);
}

TEST(Divergence, NonnegativeOnGrid) {
    const auto g = ChangeModel::gaussian(0.3, 2.0);
    const auto b = ChangeModel::bernoulli(0.3);
    for (double t = -3.0; t <= 3.0; t += 0.25) {
        EXPECT_GE(g.kl_divergence(t), 0.0);
    }
    for (double p = 0.05; p < 1.0; p += 0.05) {
        EXPECT_GE(b.kl_divergence(p), 0.0);
    }
}

TEST(Stream, ChangeAtInfinityIsAllPre) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    StreamSpec pre{g, kNoChange, 5.0, 50, 11};
    StreamSpec post{g, 1, 5.0, 50, 11};
    const auto a = sample_stream(pre);
    const auto c = sample_stream(post);
    ASSERT_EQ(a.size(), 50u);
    double mean_a = 0.0;
    double mean_c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        mean_a += a[i] / 50.0;
        mean_c += c[i] / 50.0;
    }
    EXPECT_LT(std::abs(mean_a), 0.6);
    EXPECT_GT(mean_c, 4.4);
}

TEST(Stream, SplitsAtChangePoint) {
    const auto g = ChangeModel::gaussian(0.0, 0.01);
    StreamSpec s{g, 4, 10.0, 6, 1};
    const auto x = sample_stream(s);
    for (std::size_t t = 0; t < 3; ++t) {
        EXPECT_LT(std::abs(x[t]), 0.1) << t;
    }
    for (std::size_t t = 3; t < 6; ++t) {
        EXPECT_NEAR(x[t], 10.0, 0.1) << t;
    }
}

TEST(Stream, Deterministic) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    StreamSpec s{g, 10, 1.0, 100, 42};
    EXPECT_EQ(sample_stream(s), sample_stream(s));
    s.seed = 43;
    const auto other = sample_stream(s);
    s.seed = 42;
    EXPECT_NE(sample_stream(s), other);
}

TEST(Stream, RejectsBadChangePoint) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    EXPECT_THROW(sample_stream(StreamSpec{g, 0, 1.0, 5, 1}), ParameterError);
}

TEST(Estimators, WindowMle) {
    const auto g = ChangeModel::gaussian(0.0, 1.0, {0.2, kInf});
    const std::vector<double> w1{1.0, 1.6, 1.3};
    EXPECT_NEAR(g.mle(w1), 1.3, 1e-12);
    const std::vector<double> w2{-0.4};
    EXPECT_DOUBLE_EQ(g.mle(w2), 0.2);
    EXPECT_THROW(g.mle(std::vector<double>{}), StateError);

    const auto b = ChangeModel::bernoulli(0.5, {0.01, 0.99}, 0.1);
    EXPECT_NEAR(b.mle(std::vector<double>{1, 1, 0, 1}), 0.75, 1e-12);
    EXPECT_NEAR(b.mle(std::vector<double>{1, 1, 1, 1}), 0.99, 1e-12);
}

TEST(Estimators, ProjectionKeepsSeparation) {
    const auto g = ChangeModel::gaussian(0.0, 1.0, {-kInf, kInf}, 0.25);
    EXPECT_DOUBLE_EQ(std::abs(g.project(0.1)), 0.25);
    EXPECT_DOUBLE_EQ(g.project(-0.1), -0.25);
    EXPECT_DOUBLE_EQ(g.project(0.7), 0.7);
}

TEST(Estimators, Ewma) {
    const auto g = ChangeModel::gaussian(0.0, 1.0, {-kInf, kInf}, 0.0);
    EXPECT_DOUBLE_EQ(g.ewma_update(0.0, 2.0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(g.ewma_update(0.7, 0.7, 0.3), 0.7);
    EXPECT_NEAR(g.ewma_update(1.0, 0.0, 0.1), 0.9, 1e-15);
    const auto floor = ChangeModel::gaussian(0.0, 1.0, {0.95, kInf});
    EXPECT_DOUBLE_EQ(floor.ewma_update(1.0, 0.0, 0.1), 0.95);
    EXPECT_THROW(g.ewma_update(0.0, 1.0, 0.0), ParameterError);
    EXPECT_THROW(g.ewma_update(0.0, 1.0, 1.0), ParameterError);
}

TEST(SegmentSup, GaussianClosedForm) {
    const auto g = ChangeModel::gaussian(0.0, 1.0);
    EXPECT_NEAR(g.segment_sup(6.0, 2.0), 9.0, 1e-12);
    const auto pos = ChangeModel::gaussian(0.0, 1.0, {0.0, kInf}, 0.0);
    EXPECT_NEAR(pos.segment_sup(-3.0, 1.0), 0.0, 1e-12);
}

TEST(SegmentSup, BernoulliMatchesGridSearch) {
    const auto b = ChangeModel::bernoulli(0.3, {0.01, 0.99}, 0.0);
    for (int ones = 0; ones <= 6; ++ones) {
        double best = -kInf;
        for (double p = 0.01; p <= 0.99 + 1e-12; p += 1e-4) {
            best = std::max(best, ones * std::log(p / 0.3) + (6 - ones) * std::log((1 - p) / 0.7));
        }
        EXPECT_NEAR(b.segment_sup(ones, 6.0), best, 1e-6) << ones;
    }
}
