#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rlstat/dataset.hpp"

namespace rlstat {

// Fixed-effect name that refers to the dataset's cluster labels.
inline constexpr const char* kClusterFactor = "@cluster";

// How observations are averaged in Gram matrices and residual scales.
// kClusterEqual is n^-1 sum_i T_i^-1 sum_t (every cluster counts equally);
// kPooled is (sum_i T_i)^-1 sum_i sum_t.
enum class Normalization { kClusterEqual, kPooled };

struct RegressionModel {
  std::string outcome;
  std::vector<std::string> regressors;
  // Excluded instruments; empty for OLS.
  std::vector<std::string> instruments;
  // Regressors replaced by instruments in the first stage. When instruments
  // are given and this is empty, the first regressor is endogenous.
  std::vector<std::string> endogenous;
  std::vector<std::string> fixed_effects;
  bool intercept = true;
  Normalization normalization = Normalization::kClusterEqual;

  bool is_iv() const { return !instruments.empty(); }
  std::vector<std::string> endogenous_regressors() const;
  // Every numeric column the model reads.
  std::vector<std::string> numeric_columns() const;
};

// Dummy-expanded design. Per factor the first level (in sorted order) is the
// baseline unless the model has no intercept, in which case the first
// factor keeps all of its levels.
struct Design {
  Eigen::MatrixXd x;  // regressors, intercept, dummies
  Eigen::MatrixXd z;  // instruments for IV (same layout as x for OLS)
  Eigen::VectorXd y;
  Eigen::MatrixXd endog;               // columns of x that are instrumented
  Eigen::VectorXd base_weight;         // normalization times row multiplier
  std::vector<std::string> x_names;
  std::vector<bool> x_is_dummy;
  std::vector<bool> z_is_dummy;
  // Factor index of every dummy column (-1 for other columns).
  std::vector<int> x_factor;
  std::vector<int> z_factor;
  // Row indicator of each factor's baseline level; empty when the factor
  // keeps all of its levels.
  std::vector<Eigen::VectorXd> factor_baseline;
};

Design build_design(const RegressionModel& model, const PanelDataset& data);

struct RegressionFit {
  Eigen::VectorXd coef;  // aligned with names
  std::vector<std::string> names;
  Eigen::VectorXd residuals;               // y - x'beta for every row
  Eigen::MatrixXd first_stage_residuals;   // one column per endogenous regressor
  std::vector<std::size_t> dropped_dummies;

  // Coefficient by name; throws UsageError if absent.
  double operator[](const std::string& name) const;
};

// w: per-row observation weights (empty means all ones).
RegressionFit ols_weighted(const RegressionModel& model, const PanelDataset& data,
                           std::span<const double> w = {});
RegressionFit iv_2sls_weighted(const RegressionModel& model, const PanelDataset& data,
                               std::span<const double> w = {});
RegressionFit fit(const RegressionModel& model, const PanelDataset& data,
                  std::span<const double> w = {});

// sigma_hat^2 = n^-1 sum_i T_i^-1 sum_t e_it^2 over residuals grouped by
// cluster; returns sigma_hat.
double sigma_hat(std::span<const std::vector<double>> residuals_by_cluster);
// Same on a dataset's cluster structure, honouring row multipliers and the
// chosen normalization.
double sigma_hat(std::span<const double> residuals, const PanelDataset& data,
                 Normalization normalization = Normalization::kClusterEqual);

struct DerivedParams {
  double beta5 = 0.0;  // long-run effect beta0 / (1 - persistence)
  double beta6 = 0.0;  // cumulative effect after 25 periods
  double beta7 = 0.0;  // persistence, sum of the four lag coefficients
  bool beta5_infinite = false;
};

// e_j = beta0 + sum_s lag_s e_{j-s} with e_0 = e_-1 = e_-2 = e_-3 = 0.
double dynamic_effect(double beta0, const std::array<double, 4>& lags, int horizon);
DerivedParams derived_params(double beta0, const std::array<double, 4>& lags);

}  // namespace rlstat
