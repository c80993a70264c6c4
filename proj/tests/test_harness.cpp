#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "cpd/harness.hpp"

using namespace cpd;

namespace {

// Alarms on the first observation whatever the threshold.
class ImmediateDetector final : public Detector {
public:
    double update(double) override { return emit(1e300); }
    void reset() override { statistic_ = kInactive; }
    std::unique_ptr<Detector> clone() const override { return std::make_unique<ImmediateDetector>(*this); }
    std::string name() const override { return "immediate"; }
    Robustness robustness() const override { return Robustness::Nonparametric; }
    std::size_t state_bytes() const override { return 0; }
};

const ChangeModel kModel = ChangeModel::gaussian(0.0, 1.0);

DetectorFactory cusum_factory() {
    return [](std::uint64_t) { return std::make_unique<CusumDetector>(kModel, 1.0); };
}

DetectorFactory immediate_factory() {
    return [](std::uint64_t) { return std::make_unique<ImmediateDetector>(); };
}

}  // namespace

TEST(Arl, ImmediateAlarmGivesOne) {
    const auto r = estimate_arl(immediate_factory(), kModel, 3.0, {200, 100, 1, 1});
    EXPECT_DOUBLE_EQ(r.arl, 1.0);
    EXPECT_EQ(r.censored, 0u);
    EXPECT_FALSE(r.lower_bound);
}

TEST(Arl, InfiniteThresholdCensorsEverything) {
    const auto r = estimate_arl(cusum_factory(), kModel, kInf, {100, 500, 1, 1});
    EXPECT_EQ(r.censored, 100u);
    EXPECT_TRUE(r.lower_bound);
    EXPECT_DOUBLE_EQ(r.arl, 500.0);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Arl, Errors) {
    EXPECT_THROW(estimate_arl(cusum_factory(), kModel, 2.0, {99, 100, 1, 1}), ParameterError);
    EXPECT_THROW(estimate_arl(cusum_factory(), kModel, 2.0, {100, 0, 1, 1}), ParameterError);
    EXPECT_THROW(estimate_arl(cusum_factory(), kModel, 0.0, {100, 10, 1, 1}), ParameterError);
}

TEST(Arl, CusumAboveWaldBound) {
    const auto r = estimate_arl(cusum_factory(), kModel, 3.0, {2000, 100000, 5, 1});
    EXPECT_GT(r.arl - 1.645 * r.arl_se, std::exp(3.0));
}

TEST(Arl, DeterministicAndJobInvariant) {
    const RunOptions serial{300, 100000, 9, 1};
    const RunOptions parallel{300, 100000, 9, 3};
    const auto a = estimate_arl(cusum_factory(), kModel, 2.5, serial);
    const auto b = estimate_arl(cusum_factory(), kModel, 2.5, serial);
    const auto c = estimate_arl(cusum_factory(), kModel, 2.5, parallel);
    EXPECT_DOUBLE_EQ(a.arl, b.arl);
    EXPECT_DOUBLE_EQ(a.arl, c.arl);
    EXPECT_DOUBLE_EQ(a.arl_se, c.arl_se);
    EXPECT_DOUBLE_EQ(a.ops_per_step, c.ops_per_step);
}

TEST(Arl, CensoringKeepsLowerBoundSemantics) {
    const RunOptions capped{200, 50, 3, 1};
    const RunOptions open{200, 1000000, 3, 1};
    const auto c = estimate_arl(cusum_factory(), kModel, 3.0, capped);
    const auto o = estimate_arl(cusum_factory(), kModel, 3.0, open);
    EXPECT_TRUE(c.lower_bound);
    EXPECT_LE(c.arl, o.arl);
}

TEST(Arl, RunSetRecordsMatchFreshRuns) {
    const RunOptions opt{150, 100000, 21, 1};
    NullRunSet set(cusum_factory(), kModel, opt);
    set.extend(4.0);
    for (double b : {0.5, 1.7, 3.0, 4.0}) {
        const auto fresh = estimate_arl(cusum_factory(), kModel, b, opt);
        EXPECT_DOUBLE_EQ(set.report(b).arl, fresh.arl) << b;
    }
    EXPECT_THROW(set.report(4.5), StateError);
}

TEST(Arl, MonotoneInThreshold) {
    NullRunSet set(cusum_factory(), kModel, {200, 100000, 4, 1});
    set.extend(5.0);
    double prev = 0.0;
    for (double b = 0.25; b <= 5.0; b += 0.25) {
        const double arl = set.report(b).arl;
        EXPECT_GE(arl, prev);
        prev = arl;
    }
}

TEST(Calibrate, CusumThresholdBelowLogGamma) {
    const double gamma = std::exp(4.0);
    const auto r = calibrate_threshold(cusum_factory(), kModel, gamma, {1000, 100000, 7, 1});
    EXPECT_LE(r.b, 4.0);
    EXPECT_GE(r.arl, gamma);
    ASSERT_TRUE(r.gamma.has_value());
    // Just below the returned b the estimate falls short of gamma.
    NullRunSet set(cusum_factory(), kModel, {1000, 100000, 7, 1});
    set.extend(r.b);
    EXPECT_LT(set.report(r.b * (1.0 - 1e-6)).arl, gamma);
}

TEST(Calibrate, GammaOneReturnsLowerEdge) {
    CalibrationOptions cal;
    const auto r = calibrate_threshold(cusum_factory(), kModel, 1.0, {100, 1000, 7, 1}, cal);
    EXPECT_DOUBLE_EQ(r.b, cal.b_lo);
}

TEST(Calibrate, NoBracketThrows) {
    CalibrationOptions cal;
    cal.max_expansions = 3;
    EXPECT_THROW(calibrate_threshold(cusum_factory(), kModel, 1e6, {100, 1000, 7, 1}, cal), StateError);
}

TEST(Edd, ImmediateAlarm) {
    const auto r = estimate_edd(immediate_factory(), kModel, 1.0, 1.0, {1, 5}, {50, 100, 1, 1});
    ASSERT_EQ(r.cells.size(), 2u);
    EXPECT_DOUBLE_EQ(r.cells[0].edd, 1.0);
    EXPECT_FALSE(r.cells[0].flagged);
    EXPECT_TRUE(r.cells[1].flagged);
    EXPECT_EQ(r.cells[1].discarded, 50u);
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_THROW(estimate_edd(immediate_factory(), kModel, 1.0, 1.0, {}, {50, 100, 1, 1}), ParameterError);
}

TEST(Edd, CusumWorstCaseAtOne) {
    const auto r = estimate_edd(cusum_factory(), kModel, 1.0, 3.0, {1, 5, 20}, {2000, 100000, 8, 1});
    const auto& c1 = r.cells[0];
    for (std::size_t i = 1; i < r.cells.size(); ++i) {
        EXPECT_GE(c1.edd + 2.0 * (c1.se + r.cells[i].se), r.cells[i].edd);
    }
    EXPECT_GE(r.worst, c1.edd);
}

TEST(Edd, DiscardsEarlyAlarms) {
    const auto r = estimate_edd(cusum_factory(), kModel, 1.0, 0.5, {50}, {300, 100000, 8, 1});
    EXPECT_GT(r.cells[0].discarded, 0u);
    EXPECT_EQ(r.cells[0].kept + r.cells[0].discarded, 300u);
    for (double d : r.cells[0].delays) {
        EXPECT_GE(d, 1.0);
    }
}

TEST(Fit, PowerLaw) {
    const std::vector<double> x{10, 100, 1000, 10000};
    std::vector<double> y;
    for (double v : x) {
        y.push_back(3.0 * std::pow(v, 0.75));
    }
    const auto f = fit_loglog(x, y);
    EXPECT_NEAR(f.slope, 0.75, 1e-12);
    EXPECT_NEAR(f.intercept, std::log(3.0), 1e-10);
    EXPECT_NEAR(f.r2, 1.0, 1e-12);
    ASSERT_EQ(f.residuals.size(), 4u);
    EXPECT_THROW(fit_loglog({1, 2}, {1, -1}), DomainError);
}

TEST(Bench, CounterSlopes) {
    std::vector<BenchTarget> targets;
    targets.push_back({"cusum", [](std::size_t) { return std::make_unique<CusumDetector>(kModel, 1.0); }, false});
    targets.push_back({"glr", [](std::size_t) { return std::make_unique<GlrDetector>(kModel); }, false});
    targets.push_back(
        {"wl_glr", [](std::size_t w) { return std::make_unique<WindowGlrDetector>(kModel, w); }, true});
    const auto rep = bench_complexity(targets, kModel, {100, 300, 1000, 3000}, {4, 16, 64}, 1);
    double cusum = 0.0, glr = 0.0, wl_t = 0.0, wl_w = 0.0;
    for (const auto& f : rep.fits) {
        if (f.detector == "cusum") cusum = f.ops.slope;
        if (f.detector == "glr") glr = f.ops.slope;
        if (f.detector == "wl_glr" && f.axis == "t") wl_t = f.ops.slope;
        if (f.detector == "wl_glr" && f.axis == "w") wl_w = f.ops.slope;
    }
    EXPECT_LT(std::abs(cusum), 0.1);
    EXPECT_GE(glr, 0.9);
    EXPECT_LT(std::abs(wl_t), 0.1);
    EXPECT_GT(wl_w, 0.5);
    EXPECT_THROW(bench_complexity(targets, kModel, {1, 2, 3}, {}, 1), ParameterError);
}

TEST(Frontier, SingleRowCsv) {
    const std::vector<FrontierEntry> entries{{"cusum", cusum_factory()}};
    const auto rows = frontier(entries, kModel, 1.0, 50.0, {1}, {200, 100000, 3, 1}, {200, 100000, 4, 1});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].robustness, "known-f1");
    std::ostringstream out;
    write_frontier_csv(out, rows);
    std::istringstream in(out.str());
    std::string header, line, extra;
    std::getline(in, header);
    std::getline(in, line);
    EXPECT_EQ(header, "detector,robustness,edd,arl,opcount_per_step,bytes_state");
    EXPECT_EQ(line.rfind("cusum,known-f1,", 0), 0u);
    EXPECT_FALSE(std::getline(in, extra));
}

TEST(Parallel, FirstExceptionPropagates) {
    EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                     if (i == 4) {
                         throw NumericError("boom");
                     }
                 }),
                 NumericError);
    EXPECT_EQ(resolve_jobs(4), 4u);
}
