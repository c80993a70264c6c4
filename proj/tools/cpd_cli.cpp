#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cpd/config.hpp"
#include "cpd/harness.hpp"
#include "cpd/io.hpp"

namespace {

using nlohmann::json;

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> reps;
    std::optional<std::uint64_t> cap;
    std::optional<std::size_t> jobs;
    std::string out;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--config", c.config, "experiment config (JSON)")->required();
    sub->add_option("--seed", c.seed, "root seed override");
    sub->add_option("--reps", c.reps, "replication count override");
    sub->add_option("--cap", c.cap, "censoring cap override");
    sub->add_option("--jobs", c.jobs, "worker threads (default: CPD_JOBS or 1)");
    sub->add_option("--out", c.out, "output directory (default: stdout)");
}

cpd::ExperimentConfig load(const Common& c) {
    cpd::ExperimentConfig cfg = cpd::load_config(c.config);
    if (c.seed) {
        cfg.seed = *c.seed;
    }
    if (c.reps) {
        cfg.reps = *c.reps;
        cfg.edd_reps = *c.reps;
    }
    if (c.cap) {
        cfg.cap = *c.cap;
    }
    if (c.jobs) {
        cfg.jobs = *c.jobs;
    }
    return cfg;
}

cpd::RunOptions arl_options(const cpd::ExperimentConfig& cfg) {
    return {cfg.reps, cfg.cap, cfg.seed, cfg.jobs};
}

cpd::RunOptions edd_options(const cpd::ExperimentConfig& cfg) {
    return {cfg.edd_reps, cfg.cap, cpd::substream_seed(cfg.seed, 2), cfg.jobs};
}

void emit(const Common& c, const std::string& file, const std::string& content) {
    if (c.out.empty()) {
        std::cout << content;
        return;
    }
    std::filesystem::create_directories(c.out);
    const std::string path = (std::filesystem::path(c.out) / file).string();
    cpd::write_text_file(path, content);
    std::cerr << "wrote " << path << '\n';
}

void warn(const std::string& who, const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) {
        std::cerr << "warning [" << who << "]: " << w << '\n';
    }
}

int run_detect(const Common& c, const std::string& input, const std::string& detector_id) {
    const cpd::ExperimentConfig cfg = load(c);
    const cpd::ChangeModel model = cpd::build_model(cfg.model);
    const cpd::DetectorSpec* spec = &cfg.detectors.front();
    if (!detector_id.empty()) {
        spec = nullptr;
        for (const auto& d : cfg.detectors) {
            if (d.id == detector_id) {
                spec = &d;
            }
        }
        if (!spec) {
            throw cpd::ConfigError("no detector with id '" + detector_id + "'");
        }
    }
    const auto b = cpd::threshold_for(cfg, *spec);
    if (!b) {
        throw cpd::ConfigError("detect: detector '" + spec->id + "' has no threshold b");
    }
    std::vector<double> stream;
    if (input == "-") {
        stream = cpd::read_observations(std::cin);
    } else {
        stream = cpd::read_observations_file(input);
    }
    auto det = cpd::make_factory(*spec, model, cfg.post_theta, cfg.seed)(cfg.seed);
    std::ostringstream trace;
    trace << std::setprecision(10) << "t,statistic\n";
    const cpd::CrossingRule rule = det->crossing_rule();
    std::uint64_t tau = 0;
    for (std::size_t t = 0; t < stream.size(); ++t) {
        const double s = det->update(stream[t]);
        trace << (t + 1) << ',' << s << '\n';
        if (cpd::crosses(s, *b, rule)) {
            tau = t + 1;
            break;
        }
    }
    if (tau > 0) {
        trace << "# alarm tau=" << tau << '\n';
    } else {
        trace << "# censored tau>" << stream.size() << '\n';
    }
    emit(c, "detect.csv", trace.str());
    return 0;
}

int run_calibrate(const Common& c) {
    const cpd::ExperimentConfig cfg = load(c);
    const cpd::ChangeModel model = cpd::build_model(cfg.model);
    cpd::CalibrationOptions cal;
    cal.tol = cfg.tol;
    json out = json::array();
    for (const auto& spec : cfg.detectors) {
        auto factory = cpd::make_factory(spec, model, cfg.post_theta, cfg.seed);
        cpd::CalibrationReport rep = cpd::calibrate_threshold(factory, model, cfg.gamma, arl_options(cfg), cal);
        rep.detector = spec.id;
        warn(spec.id, rep.warnings);
        out.push_back(cpd::to_json(rep));
    }
    emit(c, "calibration.json", out.dump(2) + "\n");
    return 0;
}

int run_evaluate(const Common& c) {
    const cpd::ExperimentConfig cfg = load(c);
    const cpd::ChangeModel model = cpd::build_model(cfg.model);
    cpd::CalibrationOptions cal;
    cal.tol = cfg.tol;
    json out = json::array();
    for (const auto& spec : cfg.detectors) {
        auto factory = cpd::make_factory(spec, model, cfg.post_theta, cfg.seed);
        const auto b = cpd::threshold_for(cfg, spec);
        cpd::CalibrationReport arl = b ? cpd::estimate_arl(factory, model, *b, arl_options(cfg))
                                       : cpd::calibrate_threshold(factory, model, cfg.gamma, arl_options(cfg), cal);
        arl.detector = spec.id;
        cpd::EddReport edd =
            cpd::estimate_edd(factory, model, cfg.post_theta, arl.b, cfg.v_grid, edd_options(cfg));
        edd.detector = spec.id;
        warn(spec.id, arl.warnings);
        warn(spec.id, edd.warnings);
        out.push_back({{"detector", spec.id}, {"arl", cpd::to_json(arl)}, {"edd", cpd::to_json(edd)}});
    }
    emit(c, "evaluate.json", out.dump(2) + "\n");
    return 0;
}

int run_bench(const Common& c) {
    const cpd::ExperimentConfig cfg = load(c);
    const cpd::ChangeModel model = cpd::build_model(cfg.model);
    std::vector<cpd::BenchTarget> targets;
    for (const auto& spec : cfg.detectors) {
        targets.push_back(cpd::make_bench_target(spec, model, cfg.post_theta, cfg.seed));
    }
    const cpd::BenchReport rep =
        cpd::bench_complexity(targets, model, cfg.bench.t_grid, cfg.bench.w_grid, cfg.seed);
    emit(c, "bench.json", cpd::to_json(rep).dump(2) + "\n");
    return 0;
}

int run_frontier(const Common& c) {
    const cpd::ExperimentConfig cfg = load(c);
    const cpd::ChangeModel model = cpd::build_model(cfg.model);
    std::vector<cpd::FrontierEntry> entries;
    for (const auto& spec : cfg.detectors) {
        entries.push_back({spec.id, cpd::make_factory(spec, model, cfg.post_theta, cfg.seed)});
    }
    cpd::CalibrationOptions cal;
    cal.tol = cfg.tol;
    const auto rows = cpd::frontier(entries, model, cfg.post_theta, cfg.gamma, cfg.v_grid, arl_options(cfg),
                                    edd_options(cfg), cal);
    std::ostringstream csv;
    cpd::write_frontier_csv(csv, rows);
    emit(c, "frontier.csv", csv.str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sequential change-point detection toolkit"};
    app.require_subcommand(1);

    Common detect_opts;
    Common calibrate_opts;
    Common evaluate_opts;
    Common bench_opts;
    Common frontier_opts;
    std::string input = "-";
    std::string detector_id;

    auto* detect = app.add_subcommand("detect", "run one detector over a stream and print its trace");
    add_common(detect, detect_opts);
    detect->add_option("--input", input, "observation file, one per line ('-' for stdin)");
    detect->add_option("--detector", detector_id, "detector id (default: first in config)");
    auto* calibrate = app.add_subcommand("calibrate", "find thresholds reaching the target ARL");
    add_common(calibrate, calibrate_opts);
    auto* evaluate = app.add_subcommand("evaluate", "ARL and EDD tables");
    add_common(evaluate, evaluate_opts);
    auto* bench = app.add_subcommand("bench", "per-step cost versus t and w");
    add_common(bench, bench_opts);
    auto* front = app.add_subcommand("frontier", "EDD, cost and robustness at a common ARL (CSV)");
    add_common(front, frontier_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*detect) {
            return run_detect(detect_opts, input, detector_id);
        }
        if (*calibrate) {
            return run_calibrate(calibrate_opts);
        }
        if (*evaluate) {
            return run_evaluate(evaluate_opts);
        }
        if (*bench) {
            return run_bench(bench_opts);
        }
        if (*front) {
            return run_frontier(frontier_opts);
        }
    } catch (const cpd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
