#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rlstat/dataset.hpp"

namespace rlstat {

// Declarative weight schemes.
struct AllOnes {};

// w_i = 1 iff every listed column lies within its own
// [v_(ceil(lower*n)), v_(ceil(upper*n))] order-statistic band.
struct QuantileTrim {
  std::vector<std::string> columns;
  double lower = 0.02;
  double upper = 0.98;
};

// w = 1{|residual| < c * sigma_hat}; residuals come from the full-sample fit
// of the model being compared.
struct ResidualTrim {
  double c = 1.96;
};

// Ratio weights clamp(v, L, U) / v, so that mean(v * w) is the Winsorized
// mean of v.
struct Winsorize {
  std::string column;  // empty: the statistic's own target column
  double lower = 0.02;
  double upper = 0.98;
};

// Weights read from a data column, or given explicitly.
struct CustomWeights {
  std::string column;
  std::vector<double> values;
};

using WeightScheme = std::variant<AllOnes, QuantileTrim, ResidualTrim, Winsorize, CustomWeights>;

// Throws UsageError when the scheme parameters are out of range.
void validate(const WeightScheme& scheme);
std::string describe(const WeightScheme& scheme);

// Order-statistic thresholds [L, U] for quantile levels (lower, upper).
// L = -inf when ceil(lower*n) = 0. With non-unit row multipliers the levels
// refer to the multiplier-weighted empirical distribution.
std::pair<double, double> quantile_band(std::span<const double> values, double lower, double upper,
                                        std::span<const double> row_weights = {});

std::vector<double> quantile_trim(std::span<const std::span<const double>> columns, double lower,
                                  double upper, std::span<const double> row_weights = {});
std::vector<double> weights_quantile_trim(const PanelDataset& data,
                                          std::span<const std::string> columns, double lower,
                                          double upper);

std::vector<double> weights_residual_trim(std::span<const double> residuals, double sigma_hat,
                                          double c);

std::vector<double> weights_winsorize(std::span<const double> values, double lower, double upper,
                                      std::span<const double> row_weights = {});

// Weights for a scheme that depends only on data columns (everything but
// ResidualTrim). `target` names the statistic's column, used by Winsorize
// when the scheme does not name one.
std::vector<double> compute_weights(const WeightScheme& scheme, const PanelDataset& data,
                                    const std::string& target);

// Weights aligned with the ascending order of the target variable
// (stable for ties), defining the random weight function K_n.
class WeightFunction {
 public:
  WeightFunction(std::span<const double> target, std::span<const double> weights);

  std::size_t size() const { return ordered_.size(); }
  std::span<const double> ordered_weights() const { return ordered_; }
  std::span<const double> sorted_target() const { return sorted_target_; }
  // max |w_(i)|
  double bound() const { return bound_; }
  // Cumulative weight of the first k order statistics, k = 0..n.
  double prefix(std::size_t k) const { return prefix_[k]; }

 private:
  std::vector<double> sorted_target_;
  std::vector<double> ordered_;
  std::vector<double> prefix_;
  double bound_ = 0.0;
};

// K_n(u) = n^-1 sum_i w_(i) * clamp(n*u - i + 1, 0, 1) for u in [0, 1]:
// piecewise linear with slope w_(i) on ((i-1)/n, i/n].
double build_K_n(const WeightFunction& wf, double u);

// E_n[w | X <= x]; 0 when no observation satisfies X <= x.
double K_F_hat(std::span<const double> x_values, std::span<const double> w, double x);

// E_n[w_j w_k | X_j <= x, X_k <= y]; 0 on an empty conditioning set.
double K_F_hat_joint(std::span<const double> xj, std::span<const double> xk,
                     std::span<const double> wj, std::span<const double> wk, double x, double y);

}  // namespace rlstat
