#include "cpd/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>

namespace cpd {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Parses a row of comma-separated numbers; nullopt if any field is not a number.
std::optional<std::vector<double>> parse_row(const std::string& line) {
    std::vector<double> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        field = trim(field);
        if (field.empty()) {
            return std::nullopt;
        }
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size()) {
            return std::nullopt;
        }
        out.push_back(v);
    }
    if (out.empty()) {
        return std::nullopt;
    }
    return out;
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InputError("cannot open " + path);
    }
    return in;
}

}  // namespace

PointSet read_points_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    std::optional<PointSet> points;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) {
            continue;
        }
        auto row = parse_row(line);
        if (!row) {
            if (!points && lineno == 1) {
                continue;  // header
            }
            throw InputError("csv line " + std::to_string(lineno) + ": not a numeric row");
        }
        for (double v : *row) {
            if (!std::isfinite(v)) {
                throw InputError("csv line " + std::to_string(lineno) + ": non-finite value");
            }
        }
        if (!points) {
            points.emplace(row->size());
        } else if (row->size() != points->dim()) {
            throw InputError("csv line " + std::to_string(lineno) + ": expected " +
                             std::to_string(points->dim()) + " columns");
        }
        points->push_back(*row);
    }
    if (!points) {
        throw InputError("csv input holds no observations");
    }
    return std::move(*points);
}

PointSet read_points_csv_file(const std::string& path) {
    auto in = open_input(path);
    return read_points_csv(in);
}

std::vector<double> read_observations(std::istream& in) {
    const PointSet p = read_points_csv(in);
    std::vector<double> out;
    out.reserve(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        out.push_back(p[i][0]);
    }
    return out;
}

std::vector<double> read_observations_file(const std::string& path) {
    auto in = open_input(path);
    return read_observations(in);
}

namespace {

// JSON has no infinities; encode them as strings.
nlohmann::json number(double v) {
    if (std::isfinite(v)) {
        return v;
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v > 0 ? "inf" : "-inf";
}

nlohmann::json fit_json(const SlopeFit& f) {
    nlohmann::json res = nlohmann::json::array();
    for (double r : f.residuals) {
        res.push_back(number(r));
    }
    return {{"slope", number(f.slope)},
            {"intercept", number(f.intercept)},
            {"r2", number(f.r2)},
            {"residuals", res}};
}

}  // namespace

nlohmann::json to_json(const CalibrationReport& r) {
    nlohmann::json j = {{"detector", r.detector},
                        {"b", number(r.b)},
                        {"arl", number(r.arl)},
                        {"arl_se", number(r.arl_se)},
                        {"arl_ci95", {number(r.ci_lo), number(r.ci_hi)}},
                        {"reps", r.reps},
                        {"censored", r.censored},
                        {"cap", r.cap},
                        {"seed", r.seed},
                        {"lower_bound", r.lower_bound},
                        {"ops_per_step", number(r.ops_per_step)},
                        {"state_bytes", r.state_bytes},
                        {"warnings", r.warnings}};
    j["gamma"] = r.gamma ? number(*r.gamma) : nlohmann::json();
    return j;
}

nlohmann::json to_json(const EddReport& r) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : r.cells) {
        cells.push_back({{"v", c.v},
                         {"edd", number(c.edd)},
                         {"se", number(c.se)},
                         {"ci95", {number(c.ci_lo), number(c.ci_hi)}},
                         {"kept", c.kept},
                         {"discarded", c.discarded},
                         {"discard_fraction",
                          number(static_cast<double>(c.discarded) /
                                 static_cast<double>(std::max<std::size_t>(1, c.kept + c.discarded)))},
                         {"censored", c.censored},
                         {"flagged", c.flagged}});
    }
    return {{"detector", r.detector}, {"b", number(r.b)},   {"post_theta", number(r.post_theta)},
            {"cells", cells},         {"worst", number(r.worst)}, {"worst_v", r.worst_v},
            {"seed", r.seed},         {"warnings", r.warnings}};
}

nlohmann::json to_json(const BenchReport& r) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& p : r.points) {
        points.push_back({{"detector", p.detector},
                          {"axis", p.axis},
                          {"at", number(p.at)},
                          {"ops_per_step", number(p.ops_per_step)},
                          {"wall_ns", number(p.wall_ns)}});
    }
    nlohmann::json fits = nlohmann::json::array();
    for (const auto& f : r.fits) {
        fits.push_back({{"detector", f.detector}, {"axis", f.axis}, {"ops", fit_json(f.ops)},
                        {"wall", fit_json(f.wall)}});
    }
    return {{"points", points}, {"fits", fits}};
}

nlohmann::json to_json(const FormulaReport& r) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [k, v] : r.inputs) {
        inputs[k] = number(v);
    }
    return {{"formula", r.formula},
            {"inputs", inputs},
            {"value", number(r.value)},
            {"std_error", number(r.std_error)},
            {"warnings", r.warnings}};
}

nlohmann::json to_json(const LadderEstimate& r) {
    return {{"mean_zplus", number(r.mean_zplus)},
            {"second_zplus", number(r.second_zplus)},
            {"exp_neg_zplus", number(r.exp_neg_zplus)},
            {"mean_tau_plus", number(r.mean_tau_plus)},
            {"p_no_return", number(r.p_no_return)},
            {"mean_tau_minus_0", number(r.mean_tau_minus_0)},
            {"reps", r.reps},
            {"se",
             {{"mean_zplus", number(r.se_mean_zplus)},
              {"second_zplus", number(r.se_second_zplus)},
              {"exp_neg_zplus", number(r.se_exp_neg_zplus)},
              {"p_no_return", number(r.se_p_no_return)},
              {"mean_tau_minus_0", number(r.se_mean_tau_minus_0)}}},
            {"unresolved", r.unresolved},
            {"cap_warning", r.cap_warning}};
}

nlohmann::json to_json(const AlarmResult& r) {
    return {{"stopped", r.stopped},
            {"stop_time", r.stop_time},
            {"statistic", number(r.statistic)},
            {"threshold", number(r.threshold)},
            {"rule", to_string(r.rule)}};
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot write " + path);
    }
    out << content;
    if (!out) {
        throw InputError("write failed for " + path);
    }
}

}  // namespace cpd
