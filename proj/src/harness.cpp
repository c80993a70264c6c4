#include "cpd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include "cpd/rng.hpp"

namespace cpd {

std::size_t resolve_jobs(std::size_t requested) {
    if (requested > 0) {
        return requested;
    }
    if (const char* env = std::getenv("CPD_JOBS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) {
            return v;
        }
    }
    return 1;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::min(resolve_jobs(jobs), n);
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (std::size_t j = 0; j < jobs; ++j) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) {
                        error = std::current_exception();
                    }
                    next = n;
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

namespace {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    if (v.empty()) {
        return out;
    }
    double s = 0.0;
    for (double x : v) {
        s += x;
    }
    out.mean = s / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) {
            ss += (x - out.mean) * (x - out.mean);
        }
        out.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
    return out;
}

constexpr double kZ95 = 1.959963984540054;

}  // namespace

struct NullRunSet::Run {
    Run(std::unique_ptr<Detector> d, const ChangeModel& model, std::uint64_t seed)
        : detector(std::move(d)), sampler(model, kNoChange, model.pre_theta(), seed) {}

    std::unique_ptr<Detector> detector;
    StreamSampler sampler;
    std::uint64_t t = 0;
    double running_max = -kInf;
    std::vector<std::pair<std::uint64_t, double>> records;
    std::size_t max_bytes = 0;
};

NullRunSet::NullRunSet(DetectorFactory factory, ChangeModel model, RunOptions options)
    : model_(std::make_shared<const ChangeModel>(std::move(model))),
      factory_(std::move(factory)),
      options_(options) {
    if (options_.cap < 1) {
        throw ParameterError("ARL estimation: cap must be >= 1");
    }
    if (options_.reps < 100) {
        throw ParameterError("ARL estimation: need at least 100 replications");
    }
    runs_.resize(options_.reps);
    parallel_for(options_.reps, options_.jobs, [&](std::size_t r) {
        const std::uint64_t s = substream_seed(options_.seed, r);
        runs_[r] = std::make_unique<Run>(factory_(substream_seed(s, 1)), *model_, substream_seed(s, 0));
    });
    rule_ = runs_.front()->detector->crossing_rule();
    name_ = runs_.front()->detector->name();
}

NullRunSet::NullRunSet(NullRunSet&&) noexcept = default;
NullRunSet& NullRunSet::operator=(NullRunSet&&) noexcept = default;
NullRunSet::~NullRunSet() = default;

void NullRunSet::extend(double level) {
    if (std::isnan(level)) {
        throw ParameterError("ARL estimation: threshold is NaN");
    }
    if (level <= level_) {
        return;
    }
    parallel_for(runs_.size(), options_.jobs, [&](std::size_t r) {
        Run& run = *runs_[r];
        while (!crosses(run.running_max, level, rule_) && run.t < options_.cap) {
            const double s = run.detector->update(run.sampler.next());
            ++run.t;
            if (s > run.running_max) {
                run.running_max = s;
                run.records.emplace_back(run.t, s);
            }
        }
        run.max_bytes = std::max(run.max_bytes, run.detector->state_bytes());
    });
    level_ = level;
}

std::uint64_t NullRunSet::run_length(const Run& run, double b) const {
    for (const auto& [t, s] : run.records) {
        if (crosses(s, b, rule_)) {
            return t;
        }
    }
    return options_.cap;
}

CalibrationReport NullRunSet::report(double b) const {
    if (b > level_) {
        throw StateError("ARL estimation: threshold above the simulated level");
    }
    CalibrationReport rep;
    rep.detector = name_;
    rep.b = b;
    rep.reps = runs_.size();
    rep.cap = options_.cap;
    rep.seed = options_.seed;
    std::vector<double> lengths;
    lengths.reserve(runs_.size());
    double ops = 0.0;
    double steps = 0.0;
    for (const auto& run : runs_) {
        const std::uint64_t len = run_length(*run, b);
        const bool alarmed = !run->records.empty() && crosses(run->running_max, b, rule_);
        if (!alarmed) {
            ++rep.censored;
        }
        lengths.push_back(static_cast<double>(len));
        ops += static_cast<double>(run->detector->ops());
        steps += static_cast<double>(run->detector->steps());
        rep.state_bytes = std::max(rep.state_bytes, run->max_bytes);
    }
    const MeanSe m = mean_se(lengths);
    rep.arl = m.mean;
    rep.arl_se = m.se;
    rep.ci_lo = m.mean - kZ95 * m.se;
    rep.ci_hi = m.mean + kZ95 * m.se;
    rep.ops_per_step = steps > 0.0 ? ops / steps : 0.0;
    rep.lower_bound = static_cast<double>(rep.censored) > 0.01 * static_cast<double>(rep.reps);
    if (rep.lower_bound) {
        rep.warnings.push_back("more than 1% of runs censored at the cap; ARL is a lower bound");
    }
    if (std::isfinite(b) && static_cast<double>(options_.cap) < 10.0 * std::exp(b)) {
        rep.warnings.push_back("cap below 10 e^b");
    }
    return rep;
}

CalibrationReport estimate_arl(const DetectorFactory& factory, const ChangeModel& model, double b,
                               const RunOptions& options) {
    if (!(b > 0.0)) {
        throw ParameterError("estimate_arl: threshold must be positive");
    }
    NullRunSet set(factory, model, options);
    set.extend(b);
    return set.report(b);
}

CalibrationReport calibrate_threshold(const DetectorFactory& factory, const ChangeModel& model,
                                      double gamma, const RunOptions& options,
                                      const CalibrationOptions& cal) {
    if (!(gamma >= 1.0)) {
        throw ParameterError("calibrate_threshold: target ARL must be >= 1");
    }
    if (!(cal.b_lo > 0.0) || !(cal.expand > 1.0) || !(cal.tol > 0.0)) {
        throw ParameterError("calibrate_threshold: invalid bracket settings");
    }
    NullRunSet set(factory, model, options);
    set.extend(cal.b_lo);
    CalibrationReport best = set.report(cal.b_lo);
    if (best.arl >= gamma) {
        best.gamma = gamma;
        return best;
    }
    double lo = cal.b_lo;
    double hi = std::max(cal.b_hi, cal.b_lo * cal.expand);
    bool bracketed = false;
    for (int i = 0; i <= cal.max_expansions; ++i) {
        set.extend(hi);
        if (set.report(hi).arl >= gamma) {
            bracketed = true;
            break;
        }
        lo = hi;
        hi *= cal.expand;
    }
    if (!bracketed) {
        throw StateError("calibrate_threshold: no threshold bracket reaches the target ARL (cap " +
                         std::to_string(options.cap) + ")");
    }
    // ARL(b) is a nondecreasing step function on the recorded runs.
    for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (set.report(mid).arl >= gamma) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    best = set.report(hi);
    best.gamma = gamma;
    if (best.arl > gamma * (1.0 + cal.tol)) {
        best.warnings.push_back("ARL jumps past the target by more than the tolerance");
    }
    return best;
}

EddReport estimate_edd(const DetectorFactory& factory, const ChangeModel& model, double post_theta,
                       double b, const std::vector<std::uint64_t>& v_grid, const RunOptions& options) {
    if (v_grid.empty()) {
        throw ParameterError("estimate_edd: change-time grid is empty");
    }
    if (options.reps < 1) {
        throw ParameterError("estimate_edd: need at least one replication");
    }
    for (std::uint64_t v : v_grid) {
        if (v < 1 || v > options.cap) {
            throw ParameterError("estimate_edd: change times must lie in [1, cap]");
        }
    }
    EddReport rep;
    rep.b = b;
    rep.post_theta = post_theta;
    rep.seed = options.seed;
    rep.detector = factory(0)->name();
    for (std::uint64_t v : v_grid) {
        struct Outcome {
            bool kept = false;
            bool censored = false;
            double delay = 0.0;
        };
        std::vector<Outcome> out(options.reps);
        parallel_for(options.reps, options.jobs, [&](std::size_t r) {
            const std::uint64_t s = substream_seed(options.seed, v, r);
            StreamSampler sampler(model, v, post_theta, substream_seed(s, 0));
            auto det = factory(substream_seed(s, 1));
            const AlarmResult a = run_detector(*det, [&] { return sampler.next(); }, b, options.cap);
            if (a.stop_time >= v) {
                out[r].kept = true;
                out[r].censored = !a.stopped;
                out[r].delay = static_cast<double>(a.stop_time - v + 1);
            }
        });
        EddCell cell;
        cell.v = v;
        for (const auto& o : out) {
            if (o.kept) {
                ++cell.kept;
                cell.censored += o.censored ? 1 : 0;
                cell.delays.push_back(o.delay);
            } else {
                ++cell.discarded;
            }
        }
        if (cell.kept == 0) {
            cell.flagged = true;
            rep.warnings.push_back("every run alarmed before v = " + std::to_string(v));
        } else {
            const MeanSe m = mean_se(cell.delays);
            cell.edd = m.mean;
            cell.se = m.se;
            cell.ci_lo = m.mean - kZ95 * m.se;
            cell.ci_hi = m.mean + kZ95 * m.se;
            if (cell.censored > 0) {
                rep.warnings.push_back("censored post-change runs at v = " + std::to_string(v));
            }
            if (cell.edd > rep.worst || rep.worst_v == 0) {
                rep.worst = cell.edd;
                rep.worst_v = v;
            }
        }
        rep.cells.push_back(std::move(cell));
    }
    return rep;
}

SlopeFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ParameterError("fit_loglog: need at least two paired points");
    }
    const std::size_t n = x.size();
    std::vector<double> lx(n);
    std::vector<double> ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            throw DomainError("fit_loglog: values must be positive");
        }
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw DomainError("fit_loglog: x values must not all coincide");
    }
    SlopeFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (f.intercept + f.slope * lx[i]);
        f.residuals.push_back(r);
        sse += r * r;
    }
    f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
    return f;
}

namespace {

// Ops and median wall time of the step following `warm_steps` null observations.
BenchPoint measure_step(Detector& det, StreamSampler& sampler, std::uint64_t warm_steps) {
    for (std::uint64_t i = 0; i < warm_steps; ++i) {
        det.warm(sampler.next());
    }
    const double x = sampler.next();
    BenchPoint p;
    {
        auto probe = det.clone();
        const std::uint64_t before = probe->ops();
        probe->update(x);
        p.ops_per_step = static_cast<double>(probe->ops() - before);
    }
    std::vector<double> wall;
    for (int rep = 0; rep < 5; ++rep) {
        auto probe = det.clone();
        const auto start = std::chrono::steady_clock::now();
        probe->update(x);
        const auto stop = std::chrono::steady_clock::now();
        wall.push_back(std::max(1.0, std::chrono::duration<double, std::nano>(stop - start).count()));
    }
    std::nth_element(wall.begin(), wall.begin() + 2, wall.end());
    p.wall_ns = wall[2];
    return p;
}

}  // namespace

BenchReport bench_complexity(const std::vector<BenchTarget>& targets, const ChangeModel& model,
                             const std::vector<std::uint64_t>& t_grid,
                             const std::vector<std::size_t>& w_grid, std::uint64_t seed,
                             std::size_t default_w) {
    if (t_grid.size() < 4) {
        throw ParameterError("bench_complexity: t grid needs at least 4 points");
    }
    if (!w_grid.empty() && w_grid.size() < 2) {
        throw ParameterError("bench_complexity: w grid needs at least 2 points");
    }
    BenchReport rep;
    for (std::size_t ti = 0; ti < targets.size(); ++ti) {
        const BenchTarget& target = targets[ti];
        std::vector<double> xs;
        std::vector<double> ops;
        std::vector<double> wall;
        for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
            const std::uint64_t t = t_grid[gi];
            if (t < 1) {
                throw ParameterError("bench_complexity: t must be >= 1");
            }
            auto det = target.make(default_w);
            StreamSampler sampler(model, kNoChange, model.pre_theta(), substream_seed(seed, ti, gi));
            // Warm-up: one untimed step on a throwaway detector.
            target.make(default_w)->update(sampler.next());
            BenchPoint p = measure_step(*det, sampler, t - 1);
            p.detector = target.name;
            p.axis = "t";
            p.at = static_cast<double>(t);
            xs.push_back(p.at);
            ops.push_back(p.ops_per_step);
            wall.push_back(p.wall_ns);
            rep.points.push_back(p);
        }
        rep.fits.push_back({target.name, "t", fit_loglog(xs, ops), fit_loglog(xs, wall)});

        if (!target.windowed || w_grid.empty()) {
            continue;
        }
        xs.clear();
        ops.clear();
        wall.clear();
        const std::uint64_t t_fixed = 2 * *std::max_element(w_grid.begin(), w_grid.end()) + 2;
        for (std::size_t gi = 0; gi < w_grid.size(); ++gi) {
            auto det = target.make(w_grid[gi]);
            StreamSampler sampler(model, kNoChange, model.pre_theta(),
                                  substream_seed(seed, ti, 1000 + gi));
            BenchPoint p = measure_step(*det, sampler, t_fixed - 1);
            p.detector = target.name;
            p.axis = "w";
            p.at = static_cast<double>(w_grid[gi]);
            xs.push_back(p.at);
            ops.push_back(p.ops_per_step);
            wall.push_back(p.wall_ns);
            rep.points.push_back(p);
        }
        rep.fits.push_back({target.name, "w", fit_loglog(xs, ops), fit_loglog(xs, wall)});
    }
    return rep;
}

std::vector<FrontierRow> frontier(const std::vector<FrontierEntry>& entries, const ChangeModel& model,
                                  double post_theta, double gamma,
                                  const std::vector<std::uint64_t>& v_grid, const RunOptions& arl_options,
                                  const RunOptions& edd_options, const CalibrationOptions& calibration) {
    if (entries.empty()) {
        throw ParameterError("frontier: no detectors given");
    }
    std::vector<FrontierRow> rows;
    for (const auto& e : entries) {
        if (!e.factory) {
            throw StateError("frontier: detector " + e.name + " has no factory");
        }
        const CalibrationReport cal = calibrate_threshold(e.factory, model, gamma, arl_options, calibration);
        const EddReport edd = estimate_edd(e.factory, model, post_theta, cal.b, v_grid, edd_options);
        FrontierRow row;
        row.detector = e.name;
        row.robustness = to_string(e.factory(0)->robustness());
        row.edd = edd.worst;
        row.arl = cal.arl;
        row.opcount_per_step = cal.ops_per_step;
        row.bytes_state = cal.state_bytes;
        row.b = cal.b;
        row.gamma = gamma;
        rows.push_back(row);
    }
    return rows;
}

void write_frontier_csv(std::ostream& out, const std::vector<FrontierRow>& rows) {
    out << "detector,robustness,edd,arl,opcount_per_step,bytes_state\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        out << r.detector << ',' << r.robustness << ',' << r.edd << ',' << r.arl << ','
            << r.opcount_per_step << ',' << r.bytes_state << '\n';
    }
}

}  // namespace cpd
