#include "rlstat/io/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/io/csv.hpp"

namespace rlstat::io {

namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string general(double v) {
  if (!std::isfinite(v)) return format_double(v);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return nullptr;
  return format_double(v);
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(number(v(i)));
  return out;
}

json matrix_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
    out.push_back(row);
  }
  return out;
}

json test_json(const TestReport& t, const std::string& label) {
  return json{{"statistic_label", label},
              {"statistic", number(t.statistic)},
              {"critical_value", number(t.critical_value)},
              {"p_value_formal", number(t.p_value_formal)},
              {"p_value_heuristic", number(t.p_value_heuristic)},
              {"reject", t.reject},
              {"exact", t.exact},
              {"degenerate", t.degenerate},
              {"h", t.h},
              {"alpha", t.alpha},
              {"covariance_difference", matrix_json(t.sigma)},
              {"norm_matrix", matrix_json(t.norm_matrix)}};
}

const char* unit_name(ResampleUnit u) { return u == ResampleUnit::kCluster ? "cluster" : "row"; }
const char* engine_name(Engine e) { return e == Engine::kMultinomial ? "multinomial" : "multiplier"; }
const char* law_name(MultiplierLaw l) { return l == MultiplierLaw::kNormal ? "normal" : "poisson"; }
const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kEstimate:
      return "estimate";
    case Stage::kBootstrap:
      return "bootstrap";
    case Stage::kTest:
      return "test";
  }
  return "?";
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw UsageError("cli_io", "cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw UsageError("cli_io", "write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cli_io", "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

Table comparison_table(const ComparisonResult& r) {
  Table t;
  t.columns = {"statistic", "baseline", "se_baseline", "adjusted", "se_adjusted", "p_formal", "p_heuristic"};
  const auto d = static_cast<Eigen::Index>(r.labels.size());
  const bool have_cov = r.cov_stacked.rows() == 2 * d;
  for (Eigen::Index k = 0; k < d; ++k) {
    std::vector<std::string> row{r.labels[static_cast<std::size_t>(k)], general(r.baseline(k))};
    row.push_back(have_cov ? general(std::sqrt(r.cov_stacked(k, k))) : "-");
    row.push_back(general(r.adjusted(k)));
    row.push_back(have_cov ? general(std::sqrt(r.cov_stacked(d + k, d + k))) : "-");
    if (!r.tests.empty()) {
      row.push_back(fixed(r.tests[static_cast<std::size_t>(k)].p_value_formal, 4));
      row.push_back(fixed(r.tests[static_cast<std::size_t>(k)].p_value_heuristic, 4));
    } else {
      row.insert(row.end(), {"-", "-"});
    }
    t.rows.push_back(std::move(row));
  }
  if (r.joint && d > 1)
    t.rows.push_back({"joint", "-", "-", "-", "-", fixed(r.joint->p_value_formal, 4),
                      fixed(r.joint->p_value_heuristic, 4)});
  return t;
}

std::string render_table(const Table& t) {
  std::vector<std::size_t> width(t.columns.size());
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    width[c] = t.columns[c].size();
    for (const auto& row : t.rows) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == 0)
        os << std::left << std::setw(static_cast<int>(width[c])) << cells[c];
      else
        os << "  " << std::right << std::setw(static_cast<int>(width[c])) << cells[c];
    }
    os << "\n";
  };
  line(t.columns);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  os << std::string(total - 2, '-') << "\n";
  for (const auto& row : t.rows) line(row);
  return os.str();
}

json results_json(const AnalysisConfig& config, const AnalysisResult& result) {
  json doc;
  doc["stage"] = stage_name(result.stage);
  doc["data"] = {{"rows", result.load.rows}, {"clusters", result.load.clusters}, {"dropped", result.load.dropped}};
  if (result.stage != Stage::kEstimate) {
    const auto& b = config.bootstrap;
    doc["bootstrap"] = {{"iterations", b.iterations}, {"seed", b.seed}, {"unit", unit_name(b.unit)},
                        {"engine", engine_name(b.engine)}, {"multiplier_law", law_name(b.law)},
                        {"max_failure_rate", b.max_failure_rate}};
  }
  if (result.stage == Stage::kTest) {
    const auto& t = config.test;
    doc["test"] = {{"h", t.h}, {"alpha", t.alpha}, {"norm", to_string(t.norm)}, {"mc_draws", t.mc_draws},
                   {"seed", t.seed}};
    if (t.norm == NormKind::kUser) doc["test"]["norm_matrix"] = matrix_json(t.norm_matrix);
  }
  json comps = json::array();
  for (const auto& r : result.comparisons) {
    json c;
    c["name"] = r.name;
    c["kind"] = to_string(r.kind);
    c["statistics"] = r.labels;
    c["clusters"] = r.clusters;
    c["baseline"] = vector_json(r.baseline);
    c["adjusted"] = vector_json(r.adjusted);
    if (r.boot) {
      c["bootstrap"] = {{"failed_draws", r.boot->failed_count},
                        {"draws_file", std::filesystem::path(draws_path("", r.name)).filename().string()}};
      c["covariance"] = {
          {"stacked", {{"source", to_string(CovSource::kBootstrap)}, {"matrix", matrix_json(r.cov_stacked)}}},
          {"difference", {{"source", to_string(CovSource::kBootstrap)}, {"matrix", matrix_json(r.cov_diff)}}}};
    }
    if (r.analytic) {
      c["analytic"] = {{"role", "diagnostic"},
                       {"source", to_string(r.analytic->cov_source)},
                       {"scale", "sqrt(n)"},
                       {"n", r.analytic->n},
                       {"degenerate", r.analytic->degenerate},
                       {"matrix", matrix_json(r.analytic->cov)}};
    }
    if (!r.tests.empty()) {
      json tests = json::array();
      for (std::size_t k = 0; k < r.tests.size(); ++k) tests.push_back(test_json(r.tests[k], r.labels[k]));
      c["tests"] = tests;
    }
    if (r.joint) c["joint"] = test_json(*r.joint, "joint");
    const Table t = comparison_table(r);
    c["table"] = {{"columns", t.columns}, {"rows", t.rows}};
    comps.push_back(c);
  }
  doc["comparisons"] = comps;
  return doc;
}

std::string render_report(const AnalysisConfig& config, const AnalysisResult& result) {
  std::ostringstream os;
  os << "Outlier robustness report (" << stage_name(result.stage) << ")\n";
  if (config.timestamps) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    os << "generated: " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << "\n";
  }
  os << "data: " << result.load.rows << " rows, " << result.load.clusters << " clusters, "
     << result.load.dropped << " rows dropped for missing values\n";
  if (result.stage != Stage::kEstimate) {
    const auto& b = config.bootstrap;
    os << "bootstrap: " << b.iterations << " " << engine_name(b.engine) << " draws over "
       << unit_name(b.unit) << "s, seed " << b.seed << "\n";
  }
  if (result.stage == Stage::kTest) {
    const auto& t = config.test;
    os << "test: H0 ||beta1 - beta2|| <= " << format_double(t.h) << ", alpha " << format_double(t.alpha)
       << ", norm " << to_string(t.norm) << ", " << t.mc_draws << " Monte Carlo draws\n";
  }
  for (const auto& r : result.comparisons) {
    os << "\n[" << r.name << "] " << to_string(r.kind) << "\n";
    os << render_table(comparison_table(r));
    if (r.boot && r.boot->failed_count > 0) os << "failed bootstrap draws: " << r.boot->failed_count << "\n";
    if (r.analytic)
      os << "analytic covariance (diagnostic): " << (r.analytic->degenerate ? "degenerate" : "computed") << "\n";
    if (r.analytic && r.analytic->degenerate)
      os << "note: the analytic covariance formula degenerates for unit weights; use the bootstrap covariance\n";
  }
  return os.str();
}

json mc_json(const McResult& result) {
  json doc;
  const auto& mc = result.config;
  doc["reps"] = mc.reps;
  doc["seed"] = mc.seed;
  doc["study"] = mc.study;
  doc["n"] = mc.dgp.n;
  json comps = json::array();
  for (const auto& c : result.comparisons) {
    json j;
    j["name"] = c.name;
    j["statistics"] = c.labels;
    if (c.covariance) {
      const auto& cov = *c.covariance;
      j["mean"] = vector_json(cov.mean);
      j["covariance"] = {{"source", to_string(CovSource::kOracle)}, {"scale", "n"}, {"matrix", matrix_json(cov.cov)}};
      Eigen::MatrixXd corr = cov.cov;
      for (Eigen::Index a = 0; a < corr.rows(); ++a)
        for (Eigen::Index b = 0; b < corr.cols(); ++b) corr(a, b) = cov.cov(a, b) / std::sqrt(cov.cov(a, a) * cov.cov(b, b));
      j["correlation"] = matrix_json(corr);
      j["failed_reps"] = cov.failed;
    }
    if (c.size) {
      j["size"] = {{"alpha", c.size->alpha},
                   {"rejection_rate", c.size->rejection_rate},
                   {"rejections", c.size->rejections},
                   {"reps", c.size->reps},
                   {"standard_error", c.size->standard_error}};
    }
    comps.push_back(j);
  }
  doc["comparisons"] = comps;
  return doc;
}

std::string draws_csv(const BootstrapResult& boot) {
  std::ostringstream os;
  os << "draw_index";
  for (Eigen::Index j = 0; j < boot.draws.cols(); ++j) os << ",stat_" << (j + 1);
  os << "\n";
  for (Eigen::Index b = 0; b < boot.draws.rows(); ++b) {
    os << b;
    for (Eigen::Index j = 0; j < boot.draws.cols(); ++j) {
      const bool failed = boot.failed[static_cast<std::size_t>(b)];
      os << "," << (failed ? std::string("nan") : format_double(boot.draws(b, j)));
    }
    os << "\n";
  }
  return os.str();
}

BootstrapResult parse_draws_csv(const std::string& text) {
  std::istringstream in(text);
  const CsvTable t = read_csv(in);
  if (t.header.empty() || t.header[0] != "draw_index")
    throw DataError("cli_io", "draws file must start with a draw_index column");
  const auto d = static_cast<Eigen::Index>(t.header.size() - 1);
  BootstrapResult boot;
  boot.iterations = t.rows.size();
  boot.draws.resize(static_cast<Eigen::Index>(t.rows.size()), d);
  boot.failed.assign(t.rows.size(), false);
  for (std::size_t b = 0; b < t.rows.size(); ++b) {
    if (t.rows[b][0] != std::to_string(b))
      throw DataError("cli_io", "draws file row " + std::to_string(b + 1) + " has draw_index " + t.rows[b][0]);
    for (Eigen::Index j = 0; j < d; ++j) {
      const std::string& cell = t.rows[b][static_cast<std::size_t>(j + 1)];
      double v;
      if (cell == "nan") {
        v = std::numeric_limits<double>::quiet_NaN();
      } else if (!parse_double(cell, v)) {
        throw DataError("cli_io", "bad value '" + cell + "' in draws file row " + std::to_string(b + 1));
      }
      boot.draws(static_cast<Eigen::Index>(b), j) = v;
      if (!std::isfinite(v)) boot.failed[b] = true;
    }
    boot.failed_count += boot.failed[b] ? 1 : 0;
  }
  return boot;
}

std::string draws_path(const std::string& output_dir, const std::string& comparison) {
  return (std::filesystem::path(output_dir) / ("draws_" + comparison + ".csv")).string();
}

void write_outputs(const AnalysisConfig& config, const AnalysisResult& result) {
  const std::filesystem::path dir(config.output);
  for (const auto& r : result.comparisons)
    if (r.boot) write_file_atomic(draws_path(config.output, r.name), draws_csv(*r.boot));
  write_file_atomic((dir / "results.json").string(), results_json(config, result).dump(2) + "\n");
  write_file_atomic((dir / "report.txt").string(), render_report(config, result));
}

}  // namespace rlstat::io
