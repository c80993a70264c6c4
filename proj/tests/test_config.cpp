#include <sstream>

#include <gtest/gtest.h>

#include "cpd/config.hpp"
#include "cpd/edetect.hpp"
#include "cpd/io.hpp"

using namespace cpd;
using nlohmann::json;

namespace {

json base() {
    return json::parse(R"({
        "model": {"family": "gaussian", "mean0": 0, "sigma": 1, "theta_lo": 0, "delta_min": 0.1},
        "post_theta": 1.0,
        "gamma": 100,
        "reps": 200,
        "seed": 5,
        "detectors": [{"kind": "cusum", "id": "c", "b": 3.0}]
    })");
}

}  // namespace

TEST(Config, ParsesDefaultsAndOverrides) {
    const auto c = parse_config(base());
    EXPECT_EQ(c.model.family, "gaussian");
    EXPECT_EQ(*c.model.theta_lo, 0.0);
    EXPECT_EQ(c.reps, 200u);
    EXPECT_EQ(c.seed, 5u);
    EXPECT_EQ(c.v_grid, (std::vector<std::uint64_t>{1, 5, 20, 100}));
    ASSERT_EQ(c.detectors.size(), 1u);
    EXPECT_EQ(*threshold_for(c, c.detectors[0]), 3.0);
}

TEST(Config, RejectsMalformedInput) {
    auto j = base();
    j["bogus"] = 1;
    EXPECT_THROW(parse_config(j), ConfigError);

    j = base();
    j["detectors"][0]["kind"] = "nope";
    EXPECT_THROW(parse_config(j), ConfigError);

    j = base();
    j["detectors"].push_back(j["detectors"][0]);
    EXPECT_THROW(parse_config(j), ConfigError);

    j = base();
    j["reps"] = "many";
    EXPECT_THROW(parse_config(j), ConfigError);

    j = base();
    j["model"]["sigmaa"] = 1;
    try {
        parse_config(j);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("model"), std::string::npos);
    }
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, BuildsEveryDetectorKind) {
    auto j = base();
    j["detectors"] = json::parse(R"([
        {"kind": "cusum"}, {"kind": "sr"}, {"kind": "glr"}, {"kind": "wl_glr", "w": 8},
        {"kind": "shewhart_glr", "w": 8}, {"kind": "score", "w": 8},
        {"kind": "wl_cusum", "w": 8}, {"kind": "wl_cusum", "id": "ew", "policy": "ewma", "alpha": 0.2},
        {"kind": "e_detector"}, {"kind": "zfield", "w": 6},
        {"kind": "mmd", "B": 10, "N": 2, "pool_size": 300, "variance_reps": 50}
    ])");
    const auto c = parse_config(j);
    const auto model = build_model(c.model);
    for (const auto& spec : c.detectors) {
        auto det = make_factory(spec, model, c.post_theta, c.seed)(1);
        ASSERT_TRUE(det) << spec.id;
        for (int t = 0; t < 30; ++t) {
            det->update(0.1 * (t % 7));
        }
        EXPECT_GT(det->ops(), 0u) << spec.id;
    }
}

TEST(Config, ExplicitMixtureOverridesDesign) {
    auto j = base();
    j["detectors"] = json::parse(R"([{"kind": "e_detector", "lambdas": [0.5, 1.5], "weights": [0.25, 0.75]}])");
    const auto c = parse_config(j);
    auto det = make_factory(c.detectors[0], build_model(c.model), 1.0, 1)(1);
    const auto& mix = dynamic_cast<const EDetector&>(*det).mixture();
    EXPECT_EQ(mix.lambdas(), (std::vector<double>{0.5, 1.5}));
    EXPECT_EQ(mix.weights(), (std::vector<double>{0.25, 0.75}));

    j["detectors"][0]["weights"] = json::array({1.0});
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, ModelFamilies) {
    ModelSpec s;
    s.family = "bernoulli";
    s.p0 = 0.2;
    EXPECT_EQ(build_model(s).family(), Family::Bernoulli);
    s.family = "poisson";
    s.rate0 = 3.0;
    EXPECT_EQ(build_model(s).family(), Family::ExponentialFamily);
    s.family = "cauchy";
    EXPECT_THROW(build_model(s), ConfigError);
}

TEST(Io, CsvWithHeaderAndBlankLines) {
    std::istringstream in("x,y\n1,2\n\n3.5,-4\n");
    const auto p = read_points_csv(in);
    EXPECT_EQ(p.dim(), 2u);
    EXPECT_EQ(p.size(), 2u);
    EXPECT_DOUBLE_EQ(p[1][1], -4.0);
}

TEST(Io, CsvErrors) {
    std::istringstream ragged("1,2\n3\n");
    EXPECT_THROW(read_points_csv(ragged), InputError);
    std::istringstream junk("1\nabc\n");
    EXPECT_THROW(read_points_csv(junk), InputError);
    std::istringstream inf("1\ninf\n");
    EXPECT_THROW(read_points_csv(inf), InputError);
    std::istringstream empty("");
    EXPECT_THROW(read_points_csv(empty), InputError);
}

TEST(Io, ObservationsTakeFirstColumn) {
    std::istringstream in("0.5\n1.5\n-2\n");
    EXPECT_EQ(read_observations(in), (std::vector<double>{0.5, 1.5, -2.0}));
}

TEST(Io, JsonEncodesInfinity) {
    CalibrationReport r;
    r.b = kInf;
    const auto j = to_json(r);
    EXPECT_EQ(j["b"], "inf");
    EXPECT_TRUE(j["gamma"].is_null());
}
