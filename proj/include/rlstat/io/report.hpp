#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "rlstat/bootstrap.hpp"
#include "rlstat/io/analysis.hpp"
#include "rlstat/io/config.hpp"

namespace rlstat::io {

// Writes `content` to `path` through a temporary file and a rename, so
// readers never observe a partially written file.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Shortest decimal text that reads back to the same double ("nan", "inf",
// "-inf" for non-finite values).
std::string format_double(double v);

// Human-readable table: one row per statistic plus a joint row.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};
Table comparison_table(const ComparisonResult& result);
std::string render_table(const Table& table);

// Machine-readable results with sorted keys.
nlohmann::json results_json(const AnalysisConfig& config, const AnalysisResult& result);
std::string render_report(const AnalysisConfig& config, const AnalysisResult& result);
nlohmann::json mc_json(const McResult& result);

// Bootstrap draws as CSV: draw_index,stat_1,...,stat_d with failed draws
// written as nan.
std::string draws_csv(const BootstrapResult& boot);
// Parses a draws CSV back (failed flags from non-finite rows).
BootstrapResult parse_draws_csv(const std::string& text);

std::string draws_path(const std::string& output_dir, const std::string& comparison);

// Writes results.json, report.txt and (for bootstrap and test stages) one
// draws CSV per comparison into config.output.
void write_outputs(const AnalysisConfig& config, const AnalysisResult& result);

}  // namespace rlstat::io
