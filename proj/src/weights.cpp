#include "rlstat/weights.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/numeric.hpp"

namespace rlstat {

namespace {

void check_levels(double lower, double upper) {
  if (!(lower >= 0.0 && lower < upper && upper <= 1.0))
    throw UsageError("weights", "quantile levels must satisfy 0 <= lower < upper <= 1");
}

bool all_unit(std::span<const double> w) {
  return std::all_of(w.begin(), w.end(), [](double x) { return x == 1.0; });
}

// Value of the order statistic selected by level q. Returns -inf when the
// selected rank is 0.
double band_edge(std::span<const double> sorted, std::span<const std::size_t> order,
                 std::span<const double> row_weights, double q) {
  const std::size_t n = sorted.size();
  if (row_weights.empty()) {
    const std::size_t k = quantile_rank(q, n);
    return k == 0 ? -INFINITY : sorted[k - 1];
  }
  // Weighted version: first order statistic whose cumulative multiplier
  // reaches q * total. Identical to the unweighted rule on the expanded
  // sample when multipliers are integers.
  double total = 0.0;
  for (double r : row_weights) total += r;
  const double target = q * total;
  const double slack = 1e-9 * std::max(1.0, std::abs(target));
  if (target - slack <= 0.0) return -INFINITY;
  double cum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    cum += row_weights[order[k]];
    if (cum >= target - slack) return sorted[k];
  }
  return sorted[n - 1];
}

}  // namespace

void validate(const WeightScheme& scheme) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, QuantileTrim>) {
          check_levels(s.lower, s.upper);
          if (s.columns.empty()) throw UsageError("weights", "quantile_trim needs at least one column");
        } else if constexpr (std::is_same_v<T, Winsorize>) {
          check_levels(s.lower, s.upper);
        } else if constexpr (std::is_same_v<T, ResidualTrim>) {
          if (!(s.c > 0.0)) throw UsageError("weights", "residual_trim multiplier must be positive");
        } else if constexpr (std::is_same_v<T, CustomWeights>) {
          if (s.column.empty() && s.values.empty())
            throw UsageError("weights", "custom weights need a column or explicit values");
        }
      },
      scheme);
}

std::string describe(const WeightScheme& scheme) {
  std::ostringstream os;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AllOnes>) {
          os << "all_ones";
        } else if constexpr (std::is_same_v<T, QuantileTrim>) {
          os << "quantile_trim(";
          for (std::size_t i = 0; i < s.columns.size(); ++i) os << (i ? "," : "") << s.columns[i];
          os << "; " << s.lower << ", " << s.upper << ")";
        } else if constexpr (std::is_same_v<T, ResidualTrim>) {
          os << "residual_trim(" << s.c << ")";
        } else if constexpr (std::is_same_v<T, Winsorize>) {
          os << "winsorize(" << s.column << "; " << s.lower << ", " << s.upper << ")";
        } else {
          os << "custom(" << (s.column.empty() ? "explicit" : s.column) << ")";
        }
      },
      scheme);
  return os.str();
}

std::pair<double, double> quantile_band(std::span<const double> values, double lower, double upper,
                                        std::span<const double> row_weights) {
  check_levels(lower, upper);
  if (values.empty()) throw DataError("weights", "empty sample");
  if (!row_weights.empty() && row_weights.size() != values.size())
    throw UsageError("weights", "row weight length mismatch");
  if (all_unit(row_weights)) row_weights = {};
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(values.size());
  for (std::size_t k = 0; k < order.size(); ++k) sorted[k] = values[order[k]];
  return {band_edge(sorted, order, row_weights, lower), band_edge(sorted, order, row_weights, upper)};
}

std::vector<double> quantile_trim(std::span<const std::span<const double>> columns, double lower,
                                  double upper, std::span<const double> row_weights) {
  check_levels(lower, upper);
  if (columns.empty()) throw UsageError("weights", "quantile_trim needs at least one column");
  const std::size_t n = columns.front().size();
  std::vector<double> w(n, 1.0);
  for (auto col : columns) {
    if (col.size() != n) throw UsageError("weights", "trim columns differ in length");
    auto [lo, hi] = quantile_band(col, lower, upper, row_weights);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(col[i] >= lo && col[i] <= hi)) w[i] = 0.0;
    }
  }
  return w;
}

std::vector<double> weights_quantile_trim(const PanelDataset& data,
                                          std::span<const std::string> columns, double lower,
                                          double upper) {
  std::vector<std::span<const double>> cols;
  for (const auto& name : columns) cols.push_back(data.numeric(name));
  return quantile_trim(cols, lower, upper, data.row_weights());
}

std::vector<double> weights_residual_trim(std::span<const double> residuals, double sigma_hat,
                                          double c) {
  if (!(sigma_hat > 0.0)) throw DataError("weights", "residual scale must be positive");
  if (!(c > 0.0)) throw UsageError("weights", "residual_trim multiplier must be positive");
  std::vector<double> w(residuals.size());
  const double cut = c * sigma_hat;
  for (std::size_t i = 0; i < residuals.size(); ++i) w[i] = std::abs(residuals[i]) < cut ? 1.0 : 0.0;
  return w;
}

std::vector<double> weights_winsorize(std::span<const double> values, double lower, double upper,
                                      std::span<const double> row_weights) {
  auto [lo, hi] = quantile_band(values, lower, upper, row_weights);
  std::vector<double> w(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    const double clamped = std::min(std::max(v, lo), hi);
    if (v == 0.0) {
      if (clamped != 0.0) throw DataError("weights", "winsorize ratio undefined at zero");
      w[i] = 1.0;
    } else {
      w[i] = clamped / v;
    }
  }
  return w;
}

std::vector<double> compute_weights(const WeightScheme& scheme, const PanelDataset& data,
                                    const std::string& target) {
  validate(scheme);
  return std::visit(
      [&](const auto& s) -> std::vector<double> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, AllOnes>) {
          return std::vector<double>(data.rows(), 1.0);
        } else if constexpr (std::is_same_v<T, QuantileTrim>) {
          return weights_quantile_trim(data, s.columns, s.lower, s.upper);
        } else if constexpr (std::is_same_v<T, Winsorize>) {
          return weights_winsorize(data.numeric(s.column.empty() ? target : s.column), s.lower,
                                   s.upper, data.row_weights());
        } else if constexpr (std::is_same_v<T, CustomWeights>) {
          if (!s.column.empty()) {
            auto v = data.numeric(s.column);
            return std::vector<double>(v.begin(), v.end());
          }
          if (s.values.size() != data.rows())
            throw DataError("weights", "custom weight vector length differs from row count");
          return s.values;
        } else {
          throw UsageError("weights", "residual_trim requires a fitted model");
        }
      },
      scheme);
}

WeightFunction::WeightFunction(std::span<const double> target, std::span<const double> weights) {
  if (target.empty()) throw DataError("weights", "empty sample");
  if (target.size() != weights.size()) throw UsageError("weights", "weights and sample lengths differ");
  std::vector<std::size_t> order(target.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return target[a] < target[b]; });
  sorted_target_.reserve(order.size());
  ordered_.reserve(order.size());
  prefix_.assign(order.size() + 1, 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_target_.push_back(target[order[k]]);
    ordered_.push_back(weights[order[k]]);
    prefix_[k + 1] = prefix_[k] + weights[order[k]];
    bound_ = std::max(bound_, std::abs(weights[order[k]]));
  }
}

double build_K_n(const WeightFunction& wf, double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw UsageError("weights", "K_n is defined on [0, 1]");
  const std::size_t n = wf.size();
  const double nd = static_cast<double>(n);
  const double nu = nd * u;
  // Cells 1..j are complete, cell j+1 is partially covered.
  const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(std::floor(nu)), n);
  double value = wf.prefix(j);
  if (j < n) value += wf.ordered_weights()[j] * (nu - static_cast<double>(j));
  return value / nd;
}

double K_F_hat(std::span<const double> x_values, std::span<const double> w, double x) {
  if (x_values.size() != w.size()) throw UsageError("weights", "weights and sample lengths differ");
  double num = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < x_values.size(); ++i) {
    if (x_values[i] <= x) {
      num += w[i];
      ++count;
    }
  }
  return count == 0 ? 0.0 : num / static_cast<double>(count);
}

double K_F_hat_joint(std::span<const double> xj, std::span<const double> xk,
                     std::span<const double> wj, std::span<const double> wk, double x, double y) {
  const std::size_t n = xj.size();
  if (xk.size() != n || wj.size() != n || wk.size() != n)
    throw UsageError("weights", "joint inputs differ in length");
  double num = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (xj[i] <= x && xk[i] <= y) {
      num += wj[i] * wk[i];
      ++count;
    }
  }
  return count == 0 ? 0.0 : num / static_cast<double>(count);
}

}  // namespace rlstat
