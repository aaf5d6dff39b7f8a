#include "rlstat/io/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rlstat/error.hpp"
#include "rlstat/regress.hpp"

namespace rlstat::io {

namespace {

std::vector<double> trim_band(std::span<const double> residuals, const PanelDataset& data,
                              Normalization normalization, double c) {
  return weights_residual_trim(residuals, sigma_hat(residuals, data, normalization), c);
}

// Coefficients (and derived parameters) of a fit, in label order.
std::vector<double> report_values(const ComparisonSpec& spec, const RegressionFit& fit) {
  std::vector<double> out;
  for (const auto& name : spec.coefficients) out.push_back(fit[name]);
  if (spec.derived) {
    const auto& d = *spec.derived;
    const auto p = derived_params(fit[d.beta0], {fit[d.lags[0]], fit[d.lags[1]], fit[d.lags[2]], fit[d.lags[3]]});
    if (p.beta5_infinite)
      throw NumericalError("regress", "long-run effect is infinite (lag coefficients sum to 1)");
    out.push_back(p.beta5);
    out.push_back(p.beta6);
    out.push_back(p.beta7);
  }
  return out;
}

// 1{|e| < c sigma_e}, times 1{|v| < c sigma_v} for every first-stage residual.
std::vector<double> residual_trim_weights(const ComparisonSpec& spec, double c, const PanelDataset& data,
                                          const RegressionFit& full) {
  auto w = trim_band(std::span<const double>(full.residuals.data(), static_cast<std::size_t>(full.residuals.size())),
                     data, spec.model.normalization, c);
  for (Eigen::Index k = 0; k < full.first_stage_residuals.cols(); ++k) {
    const Eigen::VectorXd v = full.first_stage_residuals.col(k);
    const auto wv = trim_band(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), data,
                              spec.model.normalization, c);
    for (std::size_t r = 0; r < w.size(); ++r) w[r] *= wv[r];
  }
  return w;
}

std::vector<double> regression_side(const ComparisonSpec& spec, const WeightScheme& scheme,
                                    const PanelDataset& data, const RegressionFit& unit_fit) {
  if (std::holds_alternative<AllOnes>(scheme)) return report_values(spec, unit_fit);
  const auto* rt = std::get_if<ResidualTrim>(&scheme);
  const auto w = rt ? residual_trim_weights(spec, rt->c, data, unit_fit)
                    : compute_weights(scheme, data, spec.model.outcome);
  return report_values(spec, fit(spec.model, data, w));
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TestSpec scalar_spec(const TestSpec& test, Eigen::Index k) {
  TestSpec s = test;
  if (test.norm == NormKind::kUser) s.norm_matrix = test.norm_matrix.block(k, k, 1, 1);
  return s;
}

}  // namespace

PanelDataset prepare_data(const AnalysisConfig& config, PanelDataset data, LoadReport* report) {
  for (const auto& lag : config.lags)
    for (std::size_t s = 1; s <= lag.count; ++s) add_within_cluster_lag(data, lag.column, s);
  std::vector<std::string> needed;
  for (const auto& col : role_columns(config)) {
    if (!data.has_column(col)) throw DataError("cli_io", "unknown column '" + col + "'");
    needed.push_back(col);
  }
  for (const auto& c : config.comparisons)
    for (const auto& fe : c.model.fixed_effects)
      if (fe != kClusterFactor && !data.has_column(fe))
        throw DataError("cli_io", "unknown fixed-effect column '" + fe + "'");
  std::size_t dropped = 0;
  data = data.drop_missing(needed, &dropped);
  if (data.rows() == 0) throw DataError("cli_io", "no rows left after dropping missing values");
  if (report) {
    report->dropped += dropped;
    report->rows = data.rows();
    report->clusters = data.clusters();
  }
  return data;
}

PanelDataset prepare_data(const AnalysisConfig& config, LoadReport* report) {
  if (config.input.empty()) throw UsageError("cli_io", "config has no input file");
  if (config.cluster.empty()) throw UsageError("cli_io", "config has no cluster column");
  // Lag outputs do not exist in the file; only their sources are checked here.
  std::vector<std::string> in_file;
  std::vector<std::string> generated;
  for (const auto& lag : config.lags)
    for (std::size_t s = 1; s <= lag.count; ++s) generated.push_back(lag.column + "_lag" + std::to_string(s));
  for (const auto& col : role_columns(config))
    if (std::find(generated.begin(), generated.end(), col) == generated.end()) in_file.push_back(col);
  LoadReport load;
  PanelDataset raw = load_csv(config.input, config.cluster, in_file, &load);
  auto out = prepare_data(config, std::move(raw), &load);
  if (report) *report = load;
  return out;
}

std::vector<double> regression_weights(const ComparisonSpec& spec, const WeightScheme& scheme,
                                       const PanelDataset& data) {
  if (const auto* rt = std::get_if<ResidualTrim>(&scheme))
    return residual_trim_weights(spec, rt->c, data, fit(spec.model, data));
  return compute_weights(scheme, data, spec.model.outcome);
}

Estimator make_comparison_estimator(const ComparisonSpec& spec) {
  if (spec.kind == ComparisonKind::kLStat) {
    std::vector<LStatSpec> stacked;
    for (const auto* scheme : {&spec.baseline, &spec.adjusted})
      for (auto s : spec.statistics) {
        s.scheme = *scheme;
        stacked.push_back(std::move(s));
      }
    return lstat_estimator(std::move(stacked));
  }
  return [spec](const PanelDataset& data) {
    // The unit-weight fit serves the unweighted side and residual trimming.
    const RegressionFit unit = fit(spec.model, data);
    auto out = regression_side(spec, spec.baseline, data, unit);
    const auto adj = regression_side(spec, spec.adjusted, data, unit);
    out.insert(out.end(), adj.begin(), adj.end());
    return out;
  };
}

ComparisonResult assemble_comparison(const ComparisonSpec& spec, const Eigen::VectorXd& stacked_point,
                                     BootstrapResult boot, const TestSpec& test, bool run_tests) {
  ComparisonResult res;
  res.name = spec.name;
  res.kind = spec.kind;
  res.labels = statistic_labels(spec);
  const auto d = static_cast<Eigen::Index>(res.labels.size());
  if (stacked_point.size() != 2 * d) throw UsageError("cli_io", "stacked estimate has the wrong length");
  res.baseline = stacked_point.head(d);
  res.adjusted = stacked_point.tail(d);
  if (boot.draws.cols() != 2 * d)
    throw UsageError("cli_io", "bootstrap draws for '" + spec.name + "' have the wrong number of columns");

  std::vector<bool> use(boot.failed.size());
  for (std::size_t b = 0; b < use.size(); ++b) use[b] = !boot.failed[b];
  const std::size_t ok = static_cast<std::size_t>(std::count(use.begin(), use.end(), true));
  if (ok >= 2) {
    res.cov_stacked = sample_cov(boot.draws, use);
    const Eigen::MatrixXd diff_draws = boot.draws.leftCols(d) - boot.draws.rightCols(d);
    res.cov_diff = sample_cov(diff_draws, use);
  } else {
    res.cov_stacked = Eigen::MatrixXd::Zero(2 * d, 2 * d);
    res.cov_diff = Eigen::MatrixXd::Zero(d, d);
  }
  boot.cov = res.cov_stacked;
  res.boot = std::move(boot);

  if (run_tests) {
    const Eigen::MatrixXd v1 = res.cov_stacked.topLeftCorner(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      res.tests.push_back(robustness_test(res.baseline.segment(k, 1), res.adjusted.segment(k, 1),
                                          res.cov_diff.block(k, k, 1, 1), v1.block(k, k, 1, 1),
                                          scalar_spec(test, k)));
    }
    res.joint = robustness_test(res.baseline, res.adjusted, res.cov_diff, v1, test);
  }
  return res;
}

std::optional<JointEstimate> analytic_diagnostic(const ComparisonSpec& spec, const PanelDataset& data,
                                                 unsigned threads) {
  if (spec.kind != ComparisonKind::kLStat || data.rows() > kAnalyticMaxRows) return std::nullopt;
  std::vector<LStatSpec> stacked;
  for (const auto* scheme : {&spec.baseline, &spec.adjusted})
    for (auto s : spec.statistics) {
      s.scheme = *scheme;
      stacked.push_back(std::move(s));
    }
  return analytic_estimate(stacked, data, threads);
}

AnalysisResult run_analysis(const AnalysisConfig& config, const PanelDataset& data, const LoadReport& load,
                            Stage stage) {
  AnalysisResult out;
  out.stage = stage;
  out.load = load;
  for (const auto& spec : config.comparisons) {
    const Estimator est = make_comparison_estimator(spec);
    if (stage == Stage::kEstimate) {
      const auto point = est(data);
      ComparisonResult res;
      res.name = spec.name;
      res.kind = spec.kind;
      res.labels = statistic_labels(spec);
      res.clusters = data.clusters();
      const auto d = static_cast<Eigen::Index>(res.labels.size());
      res.baseline = to_vector(point).head(d);
      res.adjusted = to_vector(point).tail(d);
      res.analytic = analytic_diagnostic(spec, data, config.bootstrap.threads);
      out.comparisons.push_back(std::move(res));
      continue;
    }
    BootstrapResult boot = bootstrap_pipeline(data, config.bootstrap, est);
    const Eigen::VectorXd point = boot.point;
    auto res = assemble_comparison(spec, point, std::move(boot), config.test, stage == Stage::kTest);
    res.clusters = data.clusters();
    res.analytic = analytic_diagnostic(spec, data, config.bootstrap.threads);
    out.comparisons.push_back(std::move(res));
  }
  return out;
}

AnalysisResult run_analysis(const AnalysisConfig& config, Stage stage) {
  LoadReport load;
  const PanelDataset data = prepare_data(config, &load);
  return run_analysis(config, data, load, stage);
}

TestProcedure make_test_procedure(const ComparisonSpec& spec, BootstrapPlan plan, TestSpec test) {
  validate(test);
  return [spec, plan, test](const PanelDataset& data, std::uint64_t seed) {
    BootstrapPlan p = plan;
    p.seed = seed;
    p.threads = 1;
    TestSpec t = test;
    t.threads = 1;
    BootstrapResult boot = bootstrap_pipeline(data, p, make_comparison_estimator(spec));
    const Eigen::VectorXd point = boot.point;
    const auto res = assemble_comparison(spec, point, std::move(boot), t, true);
    return res.joint->p_value_formal;
  };
}

McResult run_mc(const AnalysisConfig& config, unsigned threads) {
  if (!config.mc) throw UsageError("cli_io", "config has no 'mc' section");
  McResult out;
  out.config = *config.mc;
  const auto& mc = *config.mc;
  for (const auto& spec : config.comparisons) {
    McComparison c;
    c.name = spec.name;
    for (const auto& l : statistic_labels(spec)) c.labels.push_back("baseline:" + l);
    for (const auto& l : statistic_labels(spec)) c.labels.push_back("adjusted:" + l);
    if (mc.study == "covariance") {
      c.covariance = mc_covariance(mc.dgp, make_comparison_estimator(spec), mc.reps, mc.seed, threads);
    } else {
      c.size = size_study(mc.dgp, make_test_procedure(spec, config.bootstrap, config.test), config.test.alpha,
                          mc.reps, mc.seed, threads);
    }
    out.comparisons.push_back(std::move(c));
  }
  return out;
}

}  // namespace rlstat::io
