#include "cpd/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "cpd/analytic.hpp"
#include "cpd/edetect.hpp"
#include "cpd/io.hpp"
#include "cpd/mmdscan.hpp"

namespace cpd {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key())) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

double get_number(const json& j, const std::string& key, const std::string& where, double fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + ": expected a number");
    }
    return v.get<double>();
}

std::optional<double> get_optional(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) {
        return std::nullopt;
    }
    return get_number(j, key, where, 0.0);
}

std::uint64_t get_count(const json& j, const std::string& key, const std::string& where,
                        std::uint64_t fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(where + "." + key + ": expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

std::string get_string(const json& j, const std::string& key, const std::string& where,
                       const std::string& fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_string()) {
        throw ConfigError(where + "." + key + ": expected a string");
    }
    return v.get<std::string>();
}

std::vector<double> get_number_list(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key)) {
        return {};
    }
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + "." + key + ": expected a nonempty array");
    }
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) {
            throw ConfigError(where + "." + key + ": expected numbers");
        }
        out.push_back(e.get<double>());
    }
    return out;
}

template <class T>
std::vector<T> get_count_list(const json& j, const std::string& key, const std::string& where,
                              std::vector<T> fallback) {
    if (!j.contains(key)) {
        return fallback;
    }
    const json& v = j.at(key);
    if (!v.is_array() || v.empty()) {
        throw ConfigError(where + "." + key + ": expected a nonempty array");
    }
    std::vector<T> out;
    for (const auto& e : v) {
        if (!e.is_number_unsigned() && !(e.is_number_integer() && e.get<std::int64_t>() >= 0)) {
            throw ConfigError(where + "." + key + ": expected nonnegative integers");
        }
        out.push_back(e.get<T>());
    }
    return out;
}

ModelSpec parse_model(const json& j) {
    const std::string w = "model";
    check_keys(j, w, {"family", "mean0", "sigma", "p0", "rate0", "theta_lo", "theta_hi", "delta_min"});
    ModelSpec m;
    m.family = get_string(j, "family", w, m.family);
    m.mean0 = get_number(j, "mean0", w, m.mean0);
    m.sigma = get_number(j, "sigma", w, m.sigma);
    m.p0 = get_number(j, "p0", w, m.p0);
    m.rate0 = get_number(j, "rate0", w, m.rate0);
    m.theta_lo = get_optional(j, "theta_lo", w);
    m.theta_hi = get_optional(j, "theta_hi", w);
    m.delta_min = get_number(j, "delta_min", w, m.delta_min);
    return m;
}

EstimatorPolicy parse_policy(const std::string& s, const std::string& where) {
    if (s == "window_mle") {
        return EstimatorPolicy::WindowMle;
    }
    if (s == "ewma") {
        return EstimatorPolicy::Ewma;
    }
    if (s == "fixed") {
        return EstimatorPolicy::Fixed;
    }
    throw ConfigError(where + ".policy: expected window_mle, ewma or fixed");
}

const std::set<std::string> kKinds = {"cusum", "sr",       "glr",        "wl_glr", "shewhart_glr",
                                      "score", "wl_cusum", "e_detector", "mmd",    "zfield"};

DetectorSpec parse_detector(const json& j, std::size_t index) {
    const std::string w = "detectors[" + std::to_string(index) + "]";
    check_keys(j, w,
               {"kind", "id", "b", "theta", "w", "policy", "alpha", "theta_init", "increment_family",
                "gap_lo", "gap_hi", "eta", "lambdas", "weights", "B", "N", "kernel", "bandwidth", "variance_reps",
                "pool_size", "pool_csv"});
    DetectorSpec d;
    d.kind = get_string(j, "kind", w, "");
    if (!kKinds.count(d.kind)) {
        throw ConfigError(w + ".kind: unknown detector kind '" + d.kind + "'");
    }
    d.id = get_string(j, "id", w, d.kind);
    d.b = get_optional(j, "b", w);
    d.theta = get_optional(j, "theta", w);
    d.w = get_count(j, "w", w, d.w);
    d.policy = parse_policy(get_string(j, "policy", w, "window_mle"), w);
    d.alpha = get_number(j, "alpha", w, d.alpha);
    d.theta_init = get_optional(j, "theta_init", w);
    d.increment_family = get_string(j, "increment_family", w, "");
    d.gap_lo = get_number(j, "gap_lo", w, d.gap_lo);
    d.gap_hi = get_number(j, "gap_hi", w, d.gap_hi);
    d.eta = get_number(j, "eta", w, d.eta);
    d.lambdas = get_number_list(j, "lambdas", w);
    d.weights = get_number_list(j, "weights", w);
    if (!d.weights.empty() && d.weights.size() != d.lambdas.size()) {
        throw ConfigError(w + ".weights: needs one weight per entry of lambdas");
    }
    d.block = get_count(j, "B", w, d.block);
    d.blocks = get_count(j, "N", w, d.blocks);
    d.kernel = get_string(j, "kernel", w, d.kernel);
    if (d.kernel != "gaussian" && d.kernel != "linear") {
        throw ConfigError(w + ".kernel: expected gaussian or linear");
    }
    d.bandwidth = get_optional(j, "bandwidth", w);
    d.variance_reps = get_count(j, "variance_reps", w, d.variance_reps);
    d.pool_size = get_count(j, "pool_size", w, d.pool_size);
    d.pool_csv = get_string(j, "pool_csv", w, "");
    return d;
}

}  // namespace

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"model", "post_theta", "detectors", "b", "gamma", "v_grid", "reps", "edd_reps", "cap",
                "seed", "tol", "jobs", "bench"});
    ExperimentConfig c;
    if (j.contains("model")) {
        c.model = parse_model(j.at("model"));
    }
    c.post_theta = get_number(j, "post_theta", "config", c.post_theta);
    if (!j.contains("detectors") || !j.at("detectors").is_array() || j.at("detectors").empty()) {
        throw ConfigError("config.detectors: expected a nonempty array");
    }
    std::set<std::string> ids;
    for (std::size_t i = 0; i < j.at("detectors").size(); ++i) {
        c.detectors.push_back(parse_detector(j.at("detectors")[i], i));
        if (!ids.insert(c.detectors.back().id).second) {
            throw ConfigError("config.detectors: duplicate id '" + c.detectors.back().id + "'");
        }
    }
    c.b = get_optional(j, "b", "config");
    c.gamma = get_number(j, "gamma", "config", c.gamma);
    c.v_grid = get_count_list<std::uint64_t>(j, "v_grid", "config", c.v_grid);
    c.reps = get_count(j, "reps", "config", c.reps);
    c.edd_reps = get_count(j, "edd_reps", "config", c.reps);
    c.cap = get_count(j, "cap", "config", c.cap);
    c.seed = get_count(j, "seed", "config", c.seed);
    c.tol = get_number(j, "tol", "config", c.tol);
    c.jobs = get_count(j, "jobs", "config", c.jobs);
    if (j.contains("bench")) {
        const json& b = j.at("bench");
        check_keys(b, "config.bench", {"t_grid", "w_grid"});
        c.bench.t_grid = get_count_list<std::uint64_t>(b, "t_grid", "config.bench", c.bench.t_grid);
        c.bench.w_grid = get_count_list<std::size_t>(b, "w_grid", "config.bench", c.bench.w_grid);
    }
    if (c.cap < 1) {
        throw ConfigError("config.cap: must be >= 1");
    }
    if (!(c.gamma >= 1.0)) {
        throw ConfigError("config.gamma: must be >= 1");
    }
    if (!(c.tol > 0.0)) {
        throw ConfigError("config.tol: must be positive");
    }
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path);
    }
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_config(j);
}

ChangeModel build_model(const ModelSpec& spec) {
    const double lo = spec.theta_lo.value_or(-kInf);
    const double hi = spec.theta_hi.value_or(kInf);
    if (spec.family == "gaussian") {
        return ChangeModel::gaussian(spec.mean0, spec.sigma, {lo, hi}, spec.delta_min);
    }
    if (spec.family == "bernoulli") {
        return ChangeModel::bernoulli(spec.p0, {spec.theta_lo.value_or(1e-6), spec.theta_hi.value_or(1.0 - 1e-6)},
                                      spec.delta_min);
    }
    if (spec.family == "poisson") {
        return ChangeModel::exponential_family(ExpFamilySpec::poisson(spec.rate0), {lo, hi}, spec.delta_min);
    }
    if (spec.family == "exponential") {
        return ChangeModel::exponential_family(ExpFamilySpec::exponential(spec.rate0), {lo, hi},
                                               spec.delta_min);
    }
    throw ConfigError("model.family: unknown family '" + spec.family + "'");
}

std::optional<double> threshold_for(const ExperimentConfig& cfg, const DetectorSpec& spec) {
    return spec.b ? spec.b : cfg.b;
}

namespace {

IncrementFamily increment_family_for(const DetectorSpec& spec, const ChangeModel& model) {
    std::string name = spec.increment_family;
    if (name.empty()) {
        name = model.family() == Family::Bernoulli ? "sub_bernoulli" : "sub_gaussian";
    }
    if (name == "sub_gaussian") {
        if (model.family() != Family::Gaussian) {
            throw ConfigError("e_detector: sub_gaussian increments need a gaussian model");
        }
        return IncrementFamily::sub_gaussian(model.pre_theta(), model.sigma());
    }
    if (name == "sub_bernoulli") {
        if (model.family() != Family::Bernoulli) {
            throw ConfigError("e_detector: sub_bernoulli increments need a bernoulli model");
        }
        return IncrementFamily::sub_bernoulli(model.pre_theta());
    }
    throw ConfigError("e_detector: unknown increment family '" + name + "'");
}

struct MmdSetup {
    std::shared_ptr<const PointSet> fixed_pool;  // from CSV; null when pools are simulated
    Kernel kernel = Kernel::linear();
    double null_sd = 0.0;
};

std::shared_ptr<const PointSet> simulate_pool(const ChangeModel& model, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    auto pool = std::make_shared<PointSet>(1);
    for (std::size_t i = 0; i < n; ++i) {
        pool->push_back(model.sample_pre(rng));
    }
    return pool;
}

MmdSetup mmd_setup(const DetectorSpec& spec, const ChangeModel& model, std::uint64_t seed) {
    MmdSetup s;
    std::shared_ptr<const PointSet> reference;
    if (!spec.pool_csv.empty()) {
        s.fixed_pool = std::make_shared<const PointSet>(read_points_csv_file(spec.pool_csv));
        if (s.fixed_pool->dim() != 1) {
            throw ConfigError("mmd: pool CSV must have one column for scalar streams");
        }
        reference = s.fixed_pool;
    } else {
        reference = simulate_pool(model, spec.pool_size, substream_seed(seed, 7));
    }
    if (spec.kernel == "gaussian") {
        s.kernel = Kernel::gaussian(spec.bandwidth.value_or(median_heuristic_bandwidth(*reference)));
    }
    ScanConfig cfg{spec.block, spec.blocks, spec.variance_reps, substream_seed(seed, 8), true};
    s.null_sd = estimate_null_sd(*reference, cfg, s.kernel);
    return s;
}

}  // namespace

DetectorFactory make_factory(const DetectorSpec& spec, const ChangeModel& model, double post_theta,
                             std::uint64_t seed) {
    const double theta = spec.theta.value_or(post_theta);
    const std::string& k = spec.kind;
    if (k == "cusum") {
        CusumDetector proto(model, theta);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "sr") {
        ShiryaevRobertsDetector proto(model, theta);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "glr") {
        GlrDetector proto(model);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "wl_glr") {
        WindowGlrDetector proto(model, spec.w);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "shewhart_glr") {
        ShewhartGlrDetector proto(model, spec.w);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "score") {
        ScoreChartDetector proto(model, spec.w);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "wl_cusum") {
        WlCusumConfig cfg;
        cfg.w = spec.w;
        cfg.policy = spec.policy;
        cfg.alpha = spec.alpha;
        cfg.theta_init = spec.theta_init.value_or(kInf);
        WlCusumDetector proto(model, cfg);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "e_detector") {
        const IncrementFamily fam = increment_family_for(spec, model);
        if (!spec.lambdas.empty()) {
            std::vector<double> weights = spec.weights;
            if (weights.empty()) {
                weights.assign(spec.lambdas.size(), 1.0 / static_cast<double>(spec.lambdas.size()));
            }
            EDetector proto(EDetectorMixture(fam, spec.lambdas, weights, spec.gap_lo, spec.gap_hi));
            return [proto](std::uint64_t) { return proto.clone(); };
        }
        EDetector proto(design_mixture(fam, spec.gap_lo, spec.gap_hi, spec.eta));
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "zfield") {
        if (model.family() != Family::Gaussian) {
            throw ConfigError("zfield: needs a gaussian model");
        }
        ZFieldDetector proto(model.pre_theta(), model.sigma(), spec.w);
        return [proto](std::uint64_t) { return proto.clone(); };
    }
    if (k == "mmd") {
        const MmdSetup setup = mmd_setup(spec, model, seed);
        const ScanConfig base{spec.block, spec.blocks, spec.variance_reps, 0, true};
        const std::size_t pool_size = spec.pool_size;
        return [setup, base, pool_size, model](std::uint64_t rep_seed) -> std::unique_ptr<Detector> {
            ScanConfig cfg = base;
            cfg.seed = rep_seed;
            auto pool = setup.fixed_pool ? setup.fixed_pool
                                         : simulate_pool(model, pool_size, substream_seed(rep_seed, 9));
            return std::make_unique<MmdDetector>(ScanState(pool, cfg, setup.kernel, setup.null_sd));
        };
    }
    throw ConfigError("unknown detector kind '" + k + "'");
}

BenchTarget make_bench_target(const DetectorSpec& spec, const ChangeModel& model, double post_theta,
                              std::uint64_t seed) {
    BenchTarget t;
    t.name = spec.id;
    t.windowed = spec.kind == "wl_glr" || spec.kind == "shewhart_glr" || spec.kind == "score" ||
                 spec.kind == "wl_cusum" || spec.kind == "zfield";
    t.make = [spec, model, post_theta, seed](std::size_t w) {
        DetectorSpec s = spec;
        s.w = w;
        return make_factory(s, model, post_theta, seed)(seed);
    };
    if (!t.windowed) {
        // Build once; the window argument is irrelevant.
        auto factory = make_factory(spec, model, post_theta, seed);
        t.make = [factory, seed](std::size_t) { return factory(seed); };
    }
    return t;
}

}  // namespace cpd
