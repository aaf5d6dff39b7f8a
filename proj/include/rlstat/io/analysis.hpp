#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "rlstat/bootstrap.hpp"
#include "rlstat/dataset.hpp"
#include "rlstat/io/config.hpp"
#include "rlstat/io/csv.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/mc_oracle.hpp"
#include "rlstat/robustness.hpp"

namespace rlstat::io {

// Loads the input CSV, adds configured within-cluster lags and drops rows
// with a missing value in any column the comparisons read.
PanelDataset prepare_data(const AnalysisConfig& config, LoadReport* report = nullptr);
// Same from an in-memory dataset (lags are added, missing rows dropped).
PanelDataset prepare_data(const AnalysisConfig& config, PanelDataset data, LoadReport* report = nullptr);

// Observation weights of one side of a comparison on `data`. For residual
// trimming the model is first fitted with unit weights; IV models also trim
// on every first-stage residual.
std::vector<double> regression_weights(const ComparisonSpec& spec, const WeightScheme& scheme,
                                       const PanelDataset& data);

// Estimator returning [baseline statistics..., adjusted statistics...].
// Weights are recomputed on every dataset it sees.
Estimator make_comparison_estimator(const ComparisonSpec& spec);

enum class Stage { kEstimate, kBootstrap, kTest };

struct ComparisonResult {
  std::string name;
  ComparisonKind kind = ComparisonKind::kOls;
  std::vector<std::string> labels;
  std::size_t clusters = 0;
  Eigen::VectorXd baseline;
  Eigen::VectorXd adjusted;
  // Bootstrap stage onwards.
  std::optional<BootstrapResult> boot;
  Eigen::MatrixXd cov_stacked;  // covariance of the stacked estimates
  Eigen::MatrixXd cov_diff;     // covariance of baseline - adjusted
  // Test stage.
  std::vector<TestReport> tests;  // one per statistic
  std::optional<TestReport> joint;
  // L-statistic comparisons only: analytic covariance of the stacked
  // statistics (sqrt(n) scale), skipped for large samples.
  std::optional<JointEstimate> analytic;
};

struct AnalysisResult {
  Stage stage = Stage::kTest;
  LoadReport load;
  std::vector<ComparisonResult> comparisons;
};

// Rows above which the O(n^2) analytic covariance is not computed.
inline constexpr std::size_t kAnalyticMaxRows = 5000;

// Analytic covariance of the stacked statistics of an lstat comparison
// (diagnostic only); empty for regressions and above kAnalyticMaxRows rows.
std::optional<JointEstimate> analytic_diagnostic(const ComparisonSpec& spec, const PanelDataset& data,
                                                 unsigned threads = 1);

AnalysisResult run_analysis(const AnalysisConfig& config, Stage stage = Stage::kTest);
AnalysisResult run_analysis(const AnalysisConfig& config, const PanelDataset& prepared,
                            const LoadReport& load, Stage stage);

// Covariances and tests from point estimates and stored bootstrap draws; the
// part of the pipeline that `report` re-runs.
ComparisonResult assemble_comparison(const ComparisonSpec& spec, const Eigen::VectorXd& stacked_point,
                                     BootstrapResult boot, const TestSpec& test, bool run_tests);

// Joint formal p-value of a comparison on one dataset, for size studies.
TestProcedure make_test_procedure(const ComparisonSpec& spec, BootstrapPlan plan, TestSpec test);

struct McComparison {
  std::string name;
  std::vector<std::string> labels;  // stacked: baseline then adjusted
  std::optional<MonteCarloCovariance> covariance;
  std::optional<CoverageReport> size;
};

struct McResult {
  McConfig config;
  std::vector<McComparison> comparisons;
};

McResult run_mc(const AnalysisConfig& config, unsigned threads);

}  // namespace rlstat::io
