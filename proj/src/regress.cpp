#include "rlstat/regress.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/numeric.hpp"

namespace rlstat {

namespace {

constexpr double kRankTolerance = 1e-10;

std::string level_key(const PanelDataset& data, const std::string& factor, std::size_t row) {
  if (factor == kClusterFactor) return data.cluster_labels()[data.row_cluster_index()[row]];
  const Column& c = data.column(factor);
  if (!c.numeric) return c.labels[row];
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", c.values[row]);
  return buf;
}

struct DummyBlock {
  std::vector<std::string> names;
  std::vector<std::vector<double>> cols;
  std::vector<int> factor;
  std::vector<std::vector<double>> baseline;  // empty when all levels are kept
};

DummyBlock expand_factors(const RegressionModel& model, const PanelDataset& data) {
  DummyBlock out;
  const std::size_t n = data.rows();
  bool keep_all_next = !model.intercept;
  for (const auto& factor : model.fixed_effects) {
    std::vector<std::string> keys(n);
    std::map<std::string, std::size_t> levels;
    for (std::size_t r = 0; r < n; ++r) {
      keys[r] = level_key(data, factor, r);
      levels.emplace(keys[r], 0);
    }
    std::size_t idx = 0;
    for (auto& [k, v] : levels) v = idx++;
    const std::size_t first = keep_all_next ? 0 : 1;
    keep_all_next = false;
    const std::size_t base = out.cols.size();
    const int index = static_cast<int>(out.baseline.size());
    out.baseline.emplace_back(first == 1 ? n : 0, 0.0);
    for (auto& [k, v] : levels) {
      if (v < first) continue;
      out.names.push_back(factor + "=" + k);
      out.cols.emplace_back(n, 0.0);
      out.factor.push_back(index);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t v = levels[keys[r]];
      if (v >= first)
        out.cols[base + v - first][r] = 1.0;
      else
        out.baseline.back()[r] = 1.0;
    }
  }
  return out;
}

Eigen::VectorXd column_vector(std::span<const double> v, const std::string& name) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i]))
      throw DataError("regress", "missing or non-finite value in column '" + name + "' at row " +
                                     std::to_string(i + 1));
    out(static_cast<Eigen::Index>(i)) = v[i];
  }
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

// Solves gram * b = rhs with a rank-revealing QR; throws naming the stage.
Eigen::MatrixXd solve_gram(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& rhs,
                           const std::string& stage) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(gram);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < gram.cols()) {
    std::ostringstream os;
    os << stage << ": singular Gram matrix (rank " << qr.rank() << " of " << gram.cols() << ")";
    throw NumericalError("regress", os.str());
  }
  return qr.solve(rhs);
}

// Dummy columns whose coefficients are not identified in this (re)sample:
// levels without weighted mass and, for a factor whose baseline level has
// no mass, the first level that does (it becomes the new baseline).
std::vector<Eigen::Index> empty_dummies(const Eigen::MatrixXd& m, const std::vector<int>& factor,
                                        const std::vector<Eigen::VectorXd>& baseline,
                                        const Eigen::VectorXd& weight) {
  const Eigen::ArrayXd mass = weight.array().abs();
  std::vector<bool> rebase(baseline.size());
  for (std::size_t f = 0; f < baseline.size(); ++f)
    rebase[f] = baseline[f].size() > 0 && (baseline[f].array() * mass).sum() == 0.0;
  std::vector<Eigen::Index> out;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const int f = factor[static_cast<std::size_t>(c)];
    if (f < 0) continue;
    if ((m.col(c).array().abs() * mass).sum() == 0.0) {
      out.push_back(c);
    } else if (rebase[static_cast<std::size_t>(f)]) {
      out.push_back(c);
      rebase[static_cast<std::size_t>(f)] = false;
    }
  }
  return out;
}

Eigen::MatrixXd drop_columns(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& drop) {
  if (drop.empty()) return m;
  Eigen::MatrixXd out(m.rows(), m.cols() - static_cast<Eigen::Index>(drop.size()));
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (std::find(drop.begin(), drop.end(), c) != drop.end()) continue;
    out.col(k++) = m.col(c);
  }
  return out;
}

Eigen::VectorXd observation_weights(const Design& d, std::span<const double> w) {
  Eigen::VectorXd out = d.base_weight;
  if (!w.empty()) {
    if (static_cast<Eigen::Index>(w.size()) != out.size())
      throw UsageError("regress", "weight vector length differs from row count");
    for (Eigen::Index i = 0; i < out.size(); ++i) out(i) *= w[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

std::vector<std::string> RegressionModel::endogenous_regressors() const {
  if (!is_iv()) return {};
  if (!endogenous.empty()) return endogenous;
  if (regressors.empty()) return {};
  return {regressors.front()};
}

std::vector<std::string> RegressionModel::numeric_columns() const {
  std::vector<std::string> out{outcome};
  for (const auto& r : regressors) out.push_back(r);
  for (const auto& z : instruments)
    if (!contains(out, z)) out.push_back(z);
  return out;
}

Design build_design(const RegressionModel& model, const PanelDataset& data) {
  if (model.outcome.empty()) throw UsageError("regress", "model has no outcome column");
  if (model.regressors.empty() && !model.intercept && model.fixed_effects.empty())
    throw UsageError("regress", "model has no regressors");
  const std::size_t n = data.rows();
  if (n == 0) throw DataError("regress", "no observations");
  const auto endog = model.endogenous_regressors();
  for (const auto& e : endog)
    if (!contains(model.regressors, e))
      throw UsageError("regress", "endogenous variable '" + e + "' is not a regressor");
  if (model.is_iv() && model.instruments.size() < endog.size())
    throw UsageError("regress", "fewer instruments than endogenous regressors");

  Design d;
  d.y = column_vector(data.numeric(model.outcome), model.outcome);
  auto dummies = expand_factors(model, data);

  std::vector<Eigen::VectorXd> xcols, zcols;
  std::vector<std::string> znames;
  for (const auto& r : model.regressors) {
    xcols.push_back(column_vector(data.numeric(r), r));
    d.x_names.push_back(r);
    d.x_is_dummy.push_back(false);
    d.x_factor.push_back(-1);
  }
  if (model.is_iv()) {
    for (const auto& z : model.instruments) {
      zcols.push_back(column_vector(data.numeric(z), z));
      d.z_is_dummy.push_back(false);
      d.z_factor.push_back(-1);
    }
    for (std::size_t k = 0; k < model.regressors.size(); ++k) {
      if (contains(endog, model.regressors[k]) || contains(model.instruments, model.regressors[k]))
        continue;
      zcols.push_back(xcols[k]);
      d.z_is_dummy.push_back(false);
      d.z_factor.push_back(-1);
    }
  }
  auto add_shared = [&](Eigen::VectorXd col, const std::string& name, int factor) {
    xcols.push_back(col);
    d.x_names.push_back(name);
    d.x_is_dummy.push_back(factor >= 0);
    d.x_factor.push_back(factor);
    if (model.is_iv()) {
      zcols.push_back(std::move(col));
      d.z_is_dummy.push_back(factor >= 0);
      d.z_factor.push_back(factor);
    }
  };
  if (model.intercept) add_shared(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)), "(intercept)", -1);
  for (std::size_t k = 0; k < dummies.cols.size(); ++k)
    add_shared(Eigen::Map<const Eigen::VectorXd>(dummies.cols[k].data(), static_cast<Eigen::Index>(n)),
               dummies.names[k], dummies.factor[k]);
  for (const auto& b : dummies.baseline)
    d.factor_baseline.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));

  auto assemble = [n](const std::vector<Eigen::VectorXd>& cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = cols[c];
    return m;
  };
  d.x = assemble(xcols);
  if (model.is_iv()) {
    d.z = assemble(zcols);
    d.endog.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(endog.size()));
    for (std::size_t e = 0; e < endog.size(); ++e)
      d.endog.col(static_cast<Eigen::Index>(e)) = column_vector(data.numeric(endog[e]), endog[e]);
  } else {
    d.z = d.x;
    d.z_is_dummy = d.x_is_dummy;
    d.z_factor = d.x_factor;
  }

  d.base_weight.resize(static_cast<Eigen::Index>(n));
  auto rw = data.row_weights();
  for (std::size_t r = 0; r < n; ++r) {
    const double norm = model.normalization == Normalization::kClusterEqual
                            ? 1.0 / static_cast<double>(data.cluster_size(data.row_cluster_index()[r]))
                            : 1.0;
    d.base_weight(static_cast<Eigen::Index>(r)) = norm * rw[r];
  }
  return d;
}

double RegressionFit::operator[](const std::string& name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return coef(static_cast<Eigen::Index>(k));
  throw UsageError("regress", "no coefficient named '" + name + "'");
}

RegressionFit ols_weighted(const RegressionModel& model, const PanelDataset& data,
                           std::span<const double> w) {
  RegressionModel ols = model;
  ols.instruments.clear();
  ols.endogenous.clear();
  const Design d = build_design(ols, data);
  const Eigen::VectorXd omega = observation_weights(d, w);
  const auto drop = empty_dummies(d.x, d.x_factor, d.factor_baseline, omega);
  const Eigen::MatrixXd x = drop_columns(d.x, drop);
  const Eigen::MatrixXd xw = x.array().colwise() * omega.array();
  const Eigen::MatrixXd gram = x.transpose() * xw;
  const Eigen::VectorXd moment = xw.transpose() * d.y;

  RegressionFit out;
  out.coef = solve_gram(gram, moment, "OLS");
  for (std::size_t c = 0; c < d.x_names.size(); ++c) {
    if (std::find(drop.begin(), drop.end(), static_cast<Eigen::Index>(c)) == drop.end())
      out.names.push_back(d.x_names[c]);
    else
      out.dropped_dummies.push_back(c);
  }
  out.residuals = d.y - x * out.coef;
  return out;
}

RegressionFit iv_2sls_weighted(const RegressionModel& model, const PanelDataset& data,
                               std::span<const double> w) {
  if (!model.is_iv()) throw UsageError("regress", "IV estimation needs instruments");
  const Design d = build_design(model, data);
  const Eigen::VectorXd omega = observation_weights(d, w);
  const auto drop_x = empty_dummies(d.x, d.x_factor, d.factor_baseline, omega);
  const auto drop_z = empty_dummies(d.z, d.z_factor, d.factor_baseline, omega);
  const Eigen::MatrixXd x = drop_columns(d.x, drop_x);
  const Eigen::MatrixXd z = drop_columns(d.z, drop_z);

  const Eigen::MatrixXd zw = z.array().colwise() * omega.array();
  const Eigen::MatrixXd zz = z.transpose() * zw;
  // First stage: project every regressor on the instruments.
  const Eigen::MatrixXd pi = solve_gram(zz, zw.transpose() * x, "first stage");
  const Eigen::MatrixXd xhat = z * pi;
  const Eigen::MatrixXd xhat_w = xhat.array().colwise() * omega.array();
  const Eigen::MatrixXd gram = xhat_w.transpose() * x;
  const Eigen::VectorXd moment = xhat_w.transpose() * d.y;

  RegressionFit out;
  out.coef = solve_gram(gram, moment, "second stage");
  for (std::size_t c = 0; c < d.x_names.size(); ++c) {
    if (std::find(drop_x.begin(), drop_x.end(), static_cast<Eigen::Index>(c)) == drop_x.end())
      out.names.push_back(d.x_names[c]);
    else
      out.dropped_dummies.push_back(c);
  }
  out.residuals = d.y - x * out.coef;
  const Eigen::MatrixXd pi_e = solve_gram(zz, zw.transpose() * d.endog, "first stage");
  out.first_stage_residuals = d.endog - z * pi_e;
  return out;
}

RegressionFit fit(const RegressionModel& model, const PanelDataset& data, std::span<const double> w) {
  return model.is_iv() ? iv_2sls_weighted(model, data, w) : ols_weighted(model, data, w);
}

double sigma_hat(std::span<const std::vector<double>> residuals_by_cluster) {
  if (residuals_by_cluster.empty()) throw DataError("regress", "no clusters");
  std::vector<double> per_cluster;
  per_cluster.reserve(residuals_by_cluster.size());
  for (const auto& cl : residuals_by_cluster) {
    if (cl.empty()) throw DataError("regress", "empty cluster");
    double s = 0.0;
    for (double e : cl) s += e * e;
    per_cluster.push_back(s / static_cast<double>(cl.size()));
  }
  return std::sqrt(pairwise_sum(per_cluster) / static_cast<double>(per_cluster.size()));
}

double sigma_hat(std::span<const double> residuals, const PanelDataset& data,
                 Normalization normalization) {
  if (residuals.size() != data.rows()) throw UsageError("regress", "residual length mismatch");
  if (data.rows() == 0) throw DataError("regress", "no observations");
  auto rw = data.row_weights();
  std::vector<double> num(data.rows()), den(data.rows());
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double norm = normalization == Normalization::kClusterEqual
                            ? 1.0 / static_cast<double>(data.cluster_size(data.row_cluster_index()[r]))
                            : 1.0;
    num[r] = norm * rw[r] * residuals[r] * residuals[r];
    den[r] = norm * rw[r];
  }
  const double total = pairwise_sum(den);
  if (!(total > 0.0)) throw NumericalError("regress", "total observation weight is not positive");
  const double var = pairwise_sum(num) / total;
  if (!(var >= 0.0)) throw NumericalError("regress", "negative residual variance");
  return std::sqrt(var);
}

double dynamic_effect(double beta0, const std::array<double, 4>& lags, int horizon) {
  // history[0] = e_{j-1}, ..., history[3] = e_{j-4}
  std::array<double, 4> history{0.0, 0.0, 0.0, 0.0};
  double e = 0.0;
  for (int j = 1; j <= horizon; ++j) {
    e = beta0 + lags[0] * history[0] + lags[1] * history[1] + lags[2] * history[2] +
        lags[3] * history[3];
    history = {e, history[0], history[1], history[2]};
  }
  return e;
}

DerivedParams derived_params(double beta0, const std::array<double, 4>& lags) {
  DerivedParams p;
  p.beta7 = lags[0] + lags[1] + lags[2] + lags[3];
  if (p.beta7 == 1.0) {
    p.beta5 = beta0 == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                           : std::copysign(std::numeric_limits<double>::infinity(), beta0);
    p.beta5_infinite = true;
  } else {
    p.beta5 = beta0 / (1.0 - p.beta7);
  }
  p.beta6 = dynamic_effect(beta0, lags, 25);
  return p;
}

}  // namespace rlstat
