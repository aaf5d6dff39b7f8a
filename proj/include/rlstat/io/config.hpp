#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rlstat/bootstrap.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/mc_oracle.hpp"
#include "rlstat/regress.hpp"
#include "rlstat/robustness.hpp"
#include "rlstat/weights.hpp"

namespace rlstat::io {

enum class ComparisonKind { kOls, kIv, kLStat };
const char* to_string(ComparisonKind kind);

// Long-run, 25-period and persistence parameters computed from a
// coefficient and its four lag coefficients.
struct DerivedSpec {
  std::string beta0;
  std::array<std::string, 4> lags;
};

// A baseline and an adjusted estimator that share everything but the
// observation weights.
struct ComparisonSpec {
  std::string name;
  ComparisonKind kind = ComparisonKind::kOls;
  RegressionModel model;              // ols / iv
  std::vector<LStatSpec> statistics;  // lstat; their own schemes are ignored
  WeightScheme baseline = AllOnes{};
  WeightScheme adjusted = ResidualTrim{};
  // Reported regression coefficients; defaults to the regressors.
  std::vector<std::string> coefficients;
  std::optional<DerivedSpec> derived;
};

// Within-cluster lags added before estimation.
struct LagSpec {
  std::string column;
  std::size_t count = 1;
};

struct McConfig {
  DGPSpec dgp;
  std::size_t reps = 1000;
  std::uint64_t seed = 1;
  // "covariance" (n * Cov of the stacked estimators) or "size" (rejection
  // rate of the joint formal test).
  std::string study = "covariance";
};

struct AnalysisConfig {
  std::string input;
  std::string cluster;
  std::string output = "out";
  std::vector<LagSpec> lags;
  BootstrapPlan bootstrap;
  TestSpec test;
  std::vector<ComparisonSpec> comparisons;
  std::optional<McConfig> mc;
  // Report timestamps in report.txt (off keeps outputs byte-stable).
  bool timestamps = false;
};

// Parses and validates a config document. Relative input/output paths are
// resolved against `base_dir` when it is non-empty.
AnalysisConfig parse_config(const nlohmann::json& doc, const std::string& base_dir = "");
AnalysisConfig load_config(const std::string& path);

// Numeric columns every comparison reads (plus lag sources).
std::vector<std::string> role_columns(const AnalysisConfig& config);

// Statistic labels of one side of a comparison, in estimator order.
std::vector<std::string> statistic_labels(const ComparisonSpec& spec);

}  // namespace rlstat::io
