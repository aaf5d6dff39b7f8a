#include "rlstat/mc_oracle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/numeric.hpp"
#include "rlstat/parallel.hpp"

namespace rlstat {

namespace {

void validate_distribution(const Distribution& d, const std::string& where) {
  auto fail = [&](const std::string& what) {
    throw UsageError("mc_oracle", where + ": " + d.describe() + " " + what);
  };
  if (!std::isfinite(d.a) || !std::isfinite(d.b)) fail("has non-finite parameters");
  switch (d.law) {
    case Law::kNormal:
    case Law::kLognormal:
      if (!(d.b > 0.0)) fail("needs a positive scale");
      break;
    case Law::kUniform:
      if (!(d.b > d.a)) fail("needs lower < upper");
      break;
    case Law::kStudentT:
      if (!(d.a > 0.0) || !(d.b > 0.0)) fail("needs positive df and scale");
      break;
    case Law::kPointMass:
      break;
  }
}

void require_moment(const Distribution& d, const std::string& where) {
  if (!d.has_2c_moment())
    throw UsageError("mc_oracle", where + ": " + d.describe() +
                                      " lacks finite (2+c)th moments for every c > 0; trimmed "
                                      "statistics require them (student-t needs df > 2)");
}

PanelDataset make_dataset(std::vector<std::string> labels, std::vector<std::string> names,
                          std::vector<std::vector<double>> values) {
  std::vector<Column> cols;
  for (std::size_t k = 0; k < names.size(); ++k)
    cols.push_back(numeric_column(std::move(names[k]), std::move(values[k])));
  return PanelDataset(std::move(labels), std::move(cols));
}

struct RegressionRow {
  double y, x, z;
};

RegressionRow draw_regression(const RegressionDGP& m, Rng& rng, std::normal_distribution<double>& normal) {
  const double z = normal(rng);
  const double v = normal(rng);
  const double u = m.error.sample(rng);
  const double x = m.instrument_strength * z + v;
  return {m.beta0 + m.beta1 * x + m.endogeneity * v + u, x, z};
}

}  // namespace

const char* to_string(Law law) {
  switch (law) {
    case Law::kNormal:
      return "normal";
    case Law::kUniform:
      return "uniform";
    case Law::kLognormal:
      return "lognormal";
    case Law::kStudentT:
      return "student_t";
    case Law::kPointMass:
      return "point_mass";
  }
  return "?";
}

Law parse_law(const std::string& name) {
  for (Law l : {Law::kNormal, Law::kUniform, Law::kLognormal, Law::kStudentT, Law::kPointMass})
    if (name == to_string(l)) return l;
  throw UsageError("mc_oracle", "unknown law '" + name + "'");
}

double Distribution::sample(Rng& rng) const {
  switch (law) {
    case Law::kNormal:
      return std::normal_distribution<double>(a, b)(rng);
    case Law::kUniform:
      return a + (b - a) * uniform_open01(rng);
    case Law::kLognormal:
      return std::exp(a + b * std::normal_distribution<double>()(rng));
    case Law::kStudentT:
      return b * std::student_t_distribution<double>(a)(rng);
    case Law::kPointMass:
      return a;
  }
  return 0.0;
}

double Distribution::mean() const {
  switch (law) {
    case Law::kNormal:
    case Law::kPointMass:
      return a;
    case Law::kUniform:
      return 0.5 * (a + b);
    case Law::kLognormal:
      return std::exp(a + 0.5 * b * b);
    case Law::kStudentT:
      return a > 1.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
  }
  return 0.0;
}

double Distribution::variance() const {
  switch (law) {
    case Law::kNormal:
      return b * b;
    case Law::kUniform:
      return (b - a) * (b - a) / 12.0;
    case Law::kLognormal:
      return std::expm1(b * b) * std::exp(2.0 * a + b * b);
    case Law::kStudentT:
      return a > 2.0 ? b * b * a / (a - 2.0) : std::numeric_limits<double>::infinity();
    case Law::kPointMass:
      return 0.0;
  }
  return 0.0;
}

bool Distribution::has_2c_moment() const { return law != Law::kStudentT || a > 2.0; }

std::string Distribution::describe() const {
  std::ostringstream os;
  os << to_string(law) << "(" << a;
  if (law != Law::kPointMass) os << ", " << b;
  os << ")";
  return os.str();
}

void validate(const DGPSpec& dgp) {
  if (dgp.n == 0) throw UsageError("mc_oracle", "DGP needs n > 0");
  if (const auto* u = std::get_if<UnivariateDGP>(&dgp.kind)) {
    if (u->columns.empty()) throw UsageError("mc_oracle", "univariate DGP has no columns");
    if (!u->trimmed.empty() && u->trimmed.size() != u->columns.size())
      throw UsageError("mc_oracle", "trimmed flags do not match the column count");
    for (std::size_t k = 0; k < u->columns.size(); ++k) {
      const std::string where = "column x" + std::to_string(k + 1);
      validate_distribution(u->columns[k], where);
      if (!u->trimmed.empty() && u->trimmed[k]) require_moment(u->columns[k], where);
    }
    return;
  }
  const RegressionDGP& m = std::holds_alternative<RegressionDGP>(dgp.kind)
                               ? std::get<RegressionDGP>(dgp.kind)
                               : std::get<PanelDGP>(dgp.kind).model;
  validate_distribution(m.error, "regression error");
  require_moment(m.error, "regression error");
  if (!std::isfinite(m.beta0) || !std::isfinite(m.beta1) || !std::isfinite(m.instrument_strength) ||
      !std::isfinite(m.endogeneity))
    throw UsageError("mc_oracle", "regression DGP has non-finite parameters");
  if (const auto* p = std::get_if<PanelDGP>(&dgp.kind)) {
    if (p->t_min == 0 || p->t_max < p->t_min)
      throw UsageError("mc_oracle", "panel DGP needs 1 <= t_min <= t_max");
    if (!(p->effect_sd >= 0.0)) throw UsageError("mc_oracle", "cluster effect sd must be >= 0");
  }
}

PanelDataset simulate(const DGPSpec& dgp, std::uint64_t seed) {
  validate(dgp);
  Rng rng(seed);
  std::normal_distribution<double> normal;
  std::vector<std::string> labels;

  if (const auto* u = std::get_if<UnivariateDGP>(&dgp.kind)) {
    const std::size_t k = u->columns.size();
    std::vector<std::vector<double>> values(k, std::vector<double>(dgp.n));
    std::vector<std::string> names;
    for (std::size_t j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
    for (std::size_t i = 0; i < dgp.n; ++i) {
      labels.push_back(std::to_string(i + 1));
      for (std::size_t j = 0; j < k; ++j) values[j][i] = u->columns[j].sample(rng);
    }
    return make_dataset(std::move(labels), std::move(names), std::move(values));
  }

  std::vector<std::vector<double>> values(3);
  if (const auto* m = std::get_if<RegressionDGP>(&dgp.kind)) {
    for (std::size_t i = 0; i < dgp.n; ++i) {
      labels.push_back(std::to_string(i + 1));
      const auto row = draw_regression(*m, rng, normal);
      values[0].push_back(row.y);
      values[1].push_back(row.x);
      values[2].push_back(row.z);
    }
    return make_dataset(std::move(labels), {"y", "x", "z"}, std::move(values));
  }

  const auto& p = std::get<PanelDGP>(dgp.kind);
  values.emplace_back();
  for (std::size_t i = 0; i < dgp.n; ++i) {
    const std::size_t t = p.t_min + uniform_index(rng, p.t_max - p.t_min + 1);
    const double effect = p.effect_sd * normal(rng);
    for (std::size_t s = 0; s < t; ++s) {
      labels.push_back("g" + std::to_string(i + 1));
      const auto row = draw_regression(p.model, rng, normal);
      values[0].push_back(row.y + effect);
      values[1].push_back(row.x);
      values[2].push_back(row.z);
      values[3].push_back(static_cast<double>(s + 1));
    }
  }
  return make_dataset(std::move(labels), {"y", "x", "z", "t"}, std::move(values));
}

MonteCarloCovariance mc_covariance(const DGPSpec& dgp, const Estimator& estimator, std::size_t reps,
                                   std::uint64_t seed, unsigned threads) {
  validate(dgp);
  if (reps < 2) throw UsageError("mc_oracle", "mc_covariance needs at least 2 replications");
  std::vector<std::vector<double>> out(reps);
  std::vector<bool> ok(reps, false);
  parallel_for(reps, threads, [&](std::size_t r) {
    try {
      out[r] = estimator(simulate(dgp, derive_seed(seed, r)));
      ok[r] = true;
    } catch (const NumericalError&) {
    } catch (const DataError&) {
    }
  });
  std::size_t d = 0;
  for (std::size_t r = 0; r < reps; ++r)
    if (ok[r]) {
      d = out[r].size();
      break;
    }

  MonteCarloCovariance res;
  res.reps = reps;
  res.draws = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(reps), static_cast<Eigen::Index>(d),
                                        std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> use(reps, false);
  for (std::size_t r = 0; r < reps; ++r) {
    if (!ok[r]) continue;
    if (out[r].size() != d) throw UsageError("mc_oracle", "estimator output length varies");
    bool finite = true;
    for (double v : out[r]) finite = finite && std::isfinite(v);
    if (!finite) continue;
    use[r] = true;
    for (std::size_t j = 0; j < d; ++j)
      res.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = out[r][j];
  }
  for (std::size_t r = 0; r < reps; ++r) res.failed += use[r] ? 0 : 1;
  if (static_cast<double>(res.failed) > 0.01 * static_cast<double>(reps)) {
    std::ostringstream os;
    os << res.failed << " of " << reps << " replications failed (more than 1%)";
    throw NumericalError("mc_oracle", os.str());
  }

  res.mean.resize(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> col;
    for (std::size_t r = 0; r < reps; ++r)
      if (use[r]) col.push_back(out[r][j]);
    res.mean(static_cast<Eigen::Index>(j)) = pairwise_sum(col) / static_cast<double>(col.size());
  }
  res.cov = static_cast<double>(dgp.n) * sample_cov(res.draws, use);
  return res;
}

MonteCarloCovariance mc_covariance(const DGPSpec& dgp, std::vector<LStatSpec> specs,
                                   std::size_t reps, std::uint64_t seed, unsigned threads) {
  return mc_covariance(dgp, lstat_estimator(std::move(specs)), reps, seed, threads);
}

CoverageReport size_study(const DGPSpec& dgp, const TestProcedure& procedure, double alpha,
                          std::size_t reps, std::uint64_t seed, unsigned threads) {
  validate(dgp);
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw UsageError("mc_oracle", "alpha must lie in [0, 1]");
  if (reps == 0) throw UsageError("mc_oracle", "size study needs at least one replication");
  std::vector<double> p(reps);
  const std::uint64_t procedure_master = splitmix64(seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  parallel_for(reps, threads, [&](std::size_t r) {
    p[r] = procedure(simulate(dgp, derive_seed(seed, r)), derive_seed(procedure_master, r));
  });
  CoverageReport rep;
  rep.alpha = alpha;
  rep.reps = reps;
  for (double v : p) rep.rejections += v < alpha ? 1 : 0;
  rep.rejection_rate = static_cast<double>(rep.rejections) / static_cast<double>(reps);
  rep.standard_error = std::sqrt(rep.rejection_rate * (1.0 - rep.rejection_rate) / static_cast<double>(reps));
  return rep;
}

double quantile_kernel_variance(const Transform& m, const std::function<double(double)>& quantile,
                                const std::function<double(double)>& quantile_derivative,
                                double tolerance) {
  using boost::math::quadrature::gauss_kronrod;
  constexpr unsigned kDepth = 15;
  // The kernel is symmetric, so integrate the triangle t < s twice; the
  // diagonal kink of min(s, t) then sits on the boundary of every inner
  // integral.
  auto inner = [&](double s) {
    auto f = [&](double t) { return pure_quantile_process_cov(m, quantile, quantile_derivative, s, t); };
    return gauss_kronrod<double, 31>::integrate(f, 0.0, s, kDepth, tolerance);
  };
  const double half = gauss_kronrod<double, 31>::integrate(inner, 0.0, 1.0, kDepth, tolerance);
  return 2.0 * half;
}

}  // namespace rlstat
