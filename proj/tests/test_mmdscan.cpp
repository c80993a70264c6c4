#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "cpd/mmdscan.hpp"

using namespace cpd;

namespace {

std::shared_ptr<const PointSet> gaussian_pool(std::size_t n, std::size_t dim, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> data(n * dim);
    for (auto& v : data) {
        v = rng.normal();
    }
    return std::make_shared<const PointSet>(dim, std::move(data));
}

PointSet points(std::initializer_list<double> xs) {
    return PointSet(1, std::vector<double>(xs));
}

}  // namespace

TEST(Mmd, Examples) {
    const auto lin = Kernel::linear();
    EXPECT_DOUBLE_EQ(mmd_u(points({1, 1}), points({0, 0}), lin), 1.0);
    EXPECT_DOUBLE_EQ(mmd_u(points({2, 0}), points({0, 0}), lin), 0.0);
    const auto x = points({0.3, -1.2, 2.0, 0.7});
    EXPECT_DOUBLE_EQ(mmd_u(x, x, Kernel::gaussian(1.0)), 0.0);
}

TEST(Mmd, Errors) {
    const auto lin = Kernel::linear();
    EXPECT_THROW(mmd_u(points({1}), points({0}), lin), InputError);
    EXPECT_THROW(mmd_u(points({1, 2}), points({0, 1, 2}), lin), InputError);
    EXPECT_THROW(mmd_u(PointSet(2, {1, 2, 3, 4}), points({0, 1}), lin), InputError);
    EXPECT_THROW(Kernel::gaussian(0.0), ParameterError);
}

TEST(Mmd, LinearKernelClosedForm) {
    const auto x = points({1.0, 2.0, -0.5});
    const auto y = points({0.5, 0.0, 1.0});
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) {
                const double xi = x[i][0], xj = x[j][0], yi = y[i][0], yj = y[j][0];
                s += xi * xj + yi * yj - xi * yj - yi * xj;
            }
        }
    }
    EXPECT_NEAR(mmd_u(x, y, Kernel::linear()), s / 6.0, 1e-15);
}

TEST(HTerm, Examples) {
    const std::vector<double> a{0.4};
    const auto g = Kernel::gaussian(1.3);
    EXPECT_DOUBLE_EQ(h_term(a, a, a, a, g), 2.0);
    const std::vector<double> one{1.0};
    const std::vector<double> zero{0.0};
    const auto lin = Kernel::linear();
    EXPECT_DOUBLE_EQ(h_term(one, one, zero, zero, lin), 1.0);
    EXPECT_DOUBLE_EQ(h_term(zero, zero, zero, zero, lin), 0.0);
    // The scan's summand has both cross terms negative.
    EXPECT_DOUBLE_EQ(h_pair(a, a, a, a, g), 0.0);
}

TEST(Bandwidth, MedianHeuristic) {
    const PointSet p = points({0.0, 1.0, 3.0});
    // distances {1, 3, 2}: median 2.
    EXPECT_DOUBLE_EQ(median_heuristic_bandwidth(p), 2.0);
    EXPECT_THROW(median_heuristic_bandwidth(points({1, 1, 1})), NumericError);
}

TEST(NullSd, ConstantPoolRejected) {
    const auto pool = std::make_shared<const PointSet>(1, std::vector<double>(200, 1.5));
    ScanConfig cfg{10, 3, 50, 1, true};
    EXPECT_THROW(estimate_null_sd(*pool, cfg, Kernel::gaussian(1.0)), NumericError);
    EXPECT_THROW(ScanState(pool, cfg, Kernel::gaussian(1.0)), NumericError);
}

TEST(NullSd, PoolTooSmall) {
    const auto pool = gaussian_pool(50, 1, 3);
    ScanConfig cfg{10, 5, 50, 1, true};
    EXPECT_THROW(ScanState(pool, cfg, Kernel::gaussian(1.0), 1.0), InputError);
}

TEST(NullSd, ReproducibleAndPositive) {
    const auto pool = gaussian_pool(10000, 1, 4);
    ScanConfig cfg{20, 5, 200, 9, true};
    const auto k = Kernel::gaussian(1.0);
    const double a = estimate_null_sd(*pool, cfg, k);
    EXPECT_GT(a, 0.0);
    EXPECT_DOUBLE_EQ(a, estimate_null_sd(*pool, cfg, k));
}

TEST(NullSd, SingleBlockMatchesDirectTwoSampleSimulation) {
    const auto pool = gaussian_pool(20000, 1, 5);
    const auto k = Kernel::gaussian(1.0);
    ScanConfig cfg{20, 1, 2000, 10, true};
    const double sd = estimate_null_sd(*pool, cfg, k);
    // Independent oracle: fresh N(0,1) samples rather than pool draws.
    Rng rng(99);
    double s1 = 0.0;
    double s2 = 0.0;
    const int reps = 2000;
    for (int r = 0; r < reps; ++r) {
        PointSet x(1);
        PointSet y(1);
        for (int i = 0; i < 20; ++i) {
            x.push_back(rng.normal());
            y.push_back(rng.normal());
        }
        const double v = mmd_u(x, y, k);
        s1 += v;
        s2 += v * v;
    }
    const double direct = std::sqrt((s2 - s1 * s1 / reps) / (reps - 1));
    EXPECT_NEAR(sd / direct, 1.0, 0.1);
}

TEST(Scan, InactiveDuringBurnIn) {
    const auto pool = gaussian_pool(500, 1, 6);
    ScanState s(pool, {10, 3, 50, 2, true}, Kernel::gaussian(1.0), 0.05);
    for (int t = 0; t < 9; ++t) {
        const double x = 0.1 * t;
        EXPECT_EQ(s.update(std::span<const double>(&x, 1)), kInactive);
        EXPECT_FALSE(s.active());
    }
    const double x = 1.0;
    EXPECT_NE(s.update(std::span<const double>(&x, 1)), kInactive);
    EXPECT_TRUE(s.active());
}

TEST(Scan, RecursionMatchesRecomputation) {
    for (std::size_t dim : {1u, 3u}) {
        const auto pool = gaussian_pool(400, dim, 7 + dim);
        ScanState s(pool, {8, 4, 50, 3, true}, Kernel::gaussian(1.2), 0.1);
        Rng rng(11);
        std::vector<double> x(dim);
        for (int t = 0; t < 600; ++t) {
            for (auto& v : x) {
                v = rng.normal() + (t > 300 ? 1.0 : 0.0);
            }
            const double stat = s.update(x);
            if (s.active()) {
                const double direct = s.recompute_z();
                ASSERT_NEAR(s.z(), direct, 1e-9 * std::max(1.0, std::abs(direct))) << t;
                ASSERT_DOUBLE_EQ(stat, s.z() / 0.1);
            }
        }
    }
}

TEST(Scan, PoolExhaustionWithoutRecycling) {
    const auto pool = gaussian_pool(40, 1, 12);
    ScanState s(pool, {5, 3, 50, 4, false}, Kernel::gaussian(1.0), 1.0);
    // 15 reference points at start; each active step draws N = 3 more.
    Rng rng(1);
    bool threw = false;
    for (int t = 0; t < 40 && !threw; ++t) {
        const double x = rng.normal();
        try {
            s.update(std::span<const double>(&x, 1));
        } catch (const StateError&) {
            threw = true;
        }
    }
    EXPECT_TRUE(threw);

    ScanState r(pool, {5, 3, 50, 4, true}, Kernel::gaussian(1.0), 1.0);
    for (int t = 0; t < 200; ++t) {
        const double x = rng.normal();
        r.update(std::span<const double>(&x, 1));
    }
    EXPECT_NEAR(r.z(), r.recompute_z(), 1e-9);
}

TEST(Scan, OpsLinearInBlocksAndBlockSize) {
    const auto pool = gaussian_pool(2000, 1, 13);
    auto per_step = [&](std::size_t b, std::size_t n) {
        ScanState s(pool, {b, n, 50, 5, true}, Kernel::gaussian(1.0), 1.0);
        Rng rng(2);
        for (std::size_t t = 0; t < b + 5; ++t) {
            const double x = rng.normal();
            s.update(std::span<const double>(&x, 1));
        }
        const auto before = s.ops();
        const double x = 0.0;
        s.update(std::span<const double>(&x, 1));
        return static_cast<double>(s.ops() - before);
    };
    EXPECT_NEAR(per_step(20, 8) / per_step(20, 4), 2.0, 0.05);
    EXPECT_NEAR(per_step(40, 4) / per_step(20, 4), 39.0 / 19.0, 0.05);
}

TEST(Scan, StopRule) {
    const std::vector<double> traj{kInactive, 0.5, 3.0, 3.5};
    EXPECT_FALSE(mmd_stop(traj, kInf).stopped);
    const auto r = mmd_stop(traj, 0.4);
    EXPECT_TRUE(r.stopped);
    EXPECT_EQ(r.stop_time, 2u);
    EXPECT_EQ(mmd_stop(traj, 3.0).stop_time, 4u);
}

TEST(Scan, DetectorAdapter) {
    const auto pool = gaussian_pool(500, 1, 14);
    MmdDetector d(ScanState(pool, {10, 2, 50, 2, true}, Kernel::gaussian(1.0), 0.1));
    EXPECT_EQ(d.robustness(), Robustness::Nonparametric);
    for (int t = 0; t < 12; ++t) {
        d.update(0.01 * t);
    }
    EXPECT_EQ(d.ops(), d.state().ops());
    auto c = d.clone();
    EXPECT_DOUBLE_EQ(c->update(0.5), d.update(0.5));
    const auto multi = gaussian_pool(500, 2, 15);
    EXPECT_THROW(MmdDetector(ScanState(multi, {10, 2, 50, 2, true}, Kernel::gaussian(1.0), 0.1)),
                 ParameterError);
}
