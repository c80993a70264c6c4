#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "cpd/analytic.hpp"
#include "cpd/harness.hpp"
#include "cpd/mmdscan.hpp"

namespace cpd {

// Comma-separated rows of d numbers. A first row that does not parse as
// numbers is taken as a header. Blank lines are skipped.
PointSet read_points_csv(std::istream& in);
PointSet read_points_csv_file(const std::string& path);

// One observation per line (the first column of a CSV row).
std::vector<double> read_observations(std::istream& in);
std::vector<double> read_observations_file(const std::string& path);

nlohmann::json to_json(const CalibrationReport& r);
nlohmann::json to_json(const EddReport& r);
nlohmann::json to_json(const BenchReport& r);
nlohmann::json to_json(const FormulaReport& r);
nlohmann::json to_json(const LadderEstimate& r);
nlohmann::json to_json(const AlarmResult& r);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace cpd
