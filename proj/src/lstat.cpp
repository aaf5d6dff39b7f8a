#include "rlstat/lstat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "rlstat/empirical.hpp"
#include "rlstat/error.hpp"
#include "rlstat/numeric.hpp"
#include "rlstat/parallel.hpp"

namespace rlstat {

Transform Transform::identity() { return Transform{}; }

Transform Transform::power(double exponent) {
  Transform t;
  t.kind_ = Kind::kPower;
  t.exponent_ = exponent;
  return t;
}

Transform Transform::table(std::vector<double> x, std::vector<double> m, std::vector<double> dm) {
  if (x.size() < 2 || m.size() != x.size() || dm.size() != x.size())
    throw UsageError("lstat", "transform table needs at least two (x, m, m') rows");
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (!(x[k - 1] < x[k])) throw UsageError("lstat", "transform table x must be strictly ascending");
  }
  Transform t;
  t.kind_ = Kind::kTable;
  t.tx_ = std::move(x);
  t.tm_ = std::move(m);
  t.tdm_ = std::move(dm);
  return t;
}

double Transform::value(double x) const {
  switch (kind_) {
    case Kind::kIdentity:
      return x;
    case Kind::kPower:
      return std::pow(x, exponent_);
    case Kind::kTable: {
      if (!(x >= tx_.front() && x <= tx_.back())) return NAN;
      auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
      std::size_t k = static_cast<std::size_t>(it - tx_.begin());
      if (k == tx_.size()) k = tx_.size() - 1;
      const double h = tx_[k] - tx_[k - 1];
      const double t = (x - tx_[k - 1]) / h;
      const double t2 = t * t, t3 = t2 * t;
      return (2 * t3 - 3 * t2 + 1) * tm_[k - 1] + (t3 - 2 * t2 + t) * h * tdm_[k - 1] +
             (-2 * t3 + 3 * t2) * tm_[k] + (t3 - t2) * h * tdm_[k];
    }
  }
  return NAN;
}

double Transform::derivative(double x) const {
  switch (kind_) {
    case Kind::kIdentity:
      return 1.0;
    case Kind::kPower:
      return exponent_ == 0.0 ? 0.0 : exponent_ * std::pow(x, exponent_ - 1.0);
    case Kind::kTable: {
      if (!(x >= tx_.front() && x <= tx_.back())) return NAN;
      auto it = std::upper_bound(tx_.begin(), tx_.end(), x);
      std::size_t k = static_cast<std::size_t>(it - tx_.begin());
      if (k == tx_.size()) k = tx_.size() - 1;
      const double h = tx_[k] - tx_[k - 1];
      const double t = (x - tx_[k - 1]) / h;
      const double t2 = t * t;
      return ((6 * t2 - 6 * t) * tm_[k - 1] + (-6 * t2 + 6 * t) * tm_[k]) / h +
             (3 * t2 - 4 * t + 1) * tdm_[k - 1] + (3 * t2 - 2 * t) * tdm_[k];
    }
  }
  return NAN;
}

std::string Transform::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::kIdentity:
      os << "identity";
      break;
    case Kind::kPower:
      os << "power(" << exponent_ << ")";
      break;
    case Kind::kTable:
      os << "table(" << tx_.size() << " rows)";
      break;
  }
  return os.str();
}

const char* to_string(CovSource source) {
  switch (source) {
    case CovSource::kAnalytic:
      return "analytic";
    case CovSource::kBootstrap:
      return "bootstrap";
    case CovSource::kOracle:
      return "monte-carlo oracle";
  }
  return "unknown";
}

std::vector<double> apply_transform(const Transform& m, std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = m.value(x[i]);
    if (!std::isfinite(out[i])) {
      std::ostringstream os;
      os << "transform " << m.describe() << " undefined at observation " << i + 1 << " (x = " << x[i]
         << ")";
      throw DataError("lstat", os.str());
    }
  }
  return out;
}

double lstat_value(const Transform& m, std::span<const double> x, std::span<const double> w,
                   std::span<const double> row_weights) {
  if (x.empty()) throw DataError("lstat", "empty sample");
  if (w.size() != x.size()) throw UsageError("lstat", "weights and sample lengths differ");
  if (!row_weights.empty() && row_weights.size() != x.size())
    throw UsageError("lstat", "row weight length mismatch");
  auto mx = apply_transform(m, x);
  std::vector<double> terms(x.size());
  double total = static_cast<double>(x.size());
  if (row_weights.empty()) {
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = mx[i] * w[i];
  } else {
    for (std::size_t i = 0; i < x.size(); ++i) terms[i] = row_weights[i] * mx[i] * w[i];
    total = pairwise_sum(row_weights);
    if (!(total > 0.0)) throw NumericalError("lstat", "total row weight is not positive");
  }
  return pairwise_sum(terms) / total;
}

double lstat_eval(const LStatSpec& spec, const PanelDataset& data) {
  auto w = compute_weights(spec.scheme, data, spec.column);
  auto x = data.numeric(spec.column);
  auto rw = data.row_weights();
  return lstat_value(spec.m, x, w, data.unit_row_weights() ? std::span<const double>{} : rw);
}

double stieltjes_lstat(const Transform& m, std::span<const double> x, std::span<const double> w) {
  const WeightFunction wf(x, w);
  const SortedSample sorted(x);
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  std::vector<double> terms(n);
  double k_prev = build_K_n(wf, 0.0);
  for (std::size_t k = 1; k <= n; ++k) {
    const double right = static_cast<double>(k) / nd;
    const double mid = (static_cast<double>(k) - 0.5) / nd;
    const double k_right = build_K_n(wf, k == n ? 1.0 : right);
    const double q = empirical_quantile(sorted, mid);
    const double mq = m.value(q);
    if (!std::isfinite(mq)) throw DataError("lstat", "transform undefined at a sample quantile");
    terms[k - 1] = mq * (k_right - k_prev);
    k_prev = k_right;
  }
  return pairwise_sum(terms);
}

namespace {

// Distinct sorted support of one statistic with the per-point quantities the
// double sum needs.
struct Support {
  std::vector<double> points;     // distinct ascending values
  std::vector<double> dm;         // m(points[a+1]) - m(points[a]); 0 for the last
  std::vector<double> f;          // F_n(points[a])
  std::vector<double> k;          // E_n[w | X <= points[a]]
  std::vector<std::size_t> rank;  // per observation: index into points
};

Support make_support(const StatisticSample& s) {
  const std::size_t n = s.x.size();
  Support out;
  out.points.assign(s.x.begin(), s.x.end());
  std::sort(out.points.begin(), out.points.end());
  out.points.erase(std::unique(out.points.begin(), out.points.end()), out.points.end());
  const std::size_t a_count = out.points.size();
  out.rank.resize(n);
  std::vector<double> cnt(a_count, 0.0), sw(a_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = static_cast<std::size_t>(
        std::lower_bound(out.points.begin(), out.points.end(), s.x[i]) - out.points.begin());
    out.rank[i] = r;
    cnt[r] += 1.0;
    sw[r] += s.w[i];
  }
  out.f.resize(a_count);
  out.k.resize(a_count);
  out.dm.assign(a_count, 0.0);
  double c = 0.0, w = 0.0;
  for (std::size_t a = 0; a < a_count; ++a) {
    c += cnt[a];
    w += sw[a];
    out.f[a] = c / static_cast<double>(n);
    out.k[a] = w / c;
  }
  auto mv = apply_transform(*s.m, out.points);
  for (std::size_t a = 0; a + 1 < a_count; ++a) out.dm[a] = mv[a + 1] - mv[a];
  return out;
}

void check_inputs(const StatisticSample& s) {
  if (s.x.empty()) throw DataError("lstat", "empty sample");
  if (s.w.size() != s.x.size()) throw UsageError("lstat", "weights and sample lengths differ");
  if (s.m == nullptr) throw UsageError("lstat", "statistic has no transform");
  for (double v : s.x)
    if (!std::isfinite(v)) throw DataError("lstat", "non-finite observation");
}

}  // namespace

double analytic_cov_entry(const StatisticSample& j, const StatisticSample& k, unsigned threads) {
  check_inputs(j);
  check_inputs(k);
  const std::size_t n = j.x.size();
  if (k.x.size() != n) throw UsageError("lstat", "statistics must share the same observations");
  const Support sj = make_support(j);
  const Support sk = make_support(k);
  const std::size_t rows = sj.points.size();
  const std::size_t cols = sk.points.size();
  const double nd = static_cast<double>(n);

  // Observations grouped by their rank in column j, so row a can collect
  // {i : X_ij <= x_(a)} by walking groups 0..a.
  std::vector<std::vector<std::size_t>> by_rank(rows);
  for (std::size_t i = 0; i < n; ++i) by_rank[sj.rank[i]].push_back(i);

  std::vector<double> row_sums(rows, 0.0);
  parallel_for(rows, threads, [&](std::size_t a) {
    if (sj.dm[a] == 0.0) return;
    std::vector<double> cnt(cols, 0.0), sw(cols, 0.0);
    for (std::size_t g = 0; g <= a; ++g) {
      for (auto i : by_rank[g]) {
        cnt[sk.rank[i]] += 1.0;
        sw[sk.rank[i]] += j.w[i] * k.w[i];
      }
    }
    std::vector<double> terms(cols, 0.0);
    double c = 0.0, s = 0.0;
    const double fj = sj.f[a], kj = sj.k[a];
    for (std::size_t b = 0; b < cols; ++b) {
      c += cnt[b];
      s += sw[b];
      if (sk.dm[b] == 0.0) continue;
      const double fk = sk.f[b], kk = sk.k[b];
      const double fjk = c / nd;
      const double kjk = c > 0.0 ? s / c : 0.0;
      const double value =
          (1.0 - kj - kk) * (fjk - fj * fk) + (kjk * fjk - kj * kk * fj * fk);
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "non-finite covariance integrand at (x = " << sj.points[a] << ", y = " << sk.points[b]
           << ")";
        throw NumericalError("lstat", os.str());
      }
      terms[b] = value * sk.dm[b];
    }
    row_sums[a] = pairwise_sum(terms) * sj.dm[a];
  });
  return pairwise_sum(row_sums);
}

Eigen::MatrixXd analytic_cov(std::span<const StatisticSample> stats, unsigned threads) {
  const std::size_t d = stats.size();
  if (d == 0) throw UsageError("lstat", "analytic covariance needs at least one statistic");
  Eigen::MatrixXd raw(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      raw(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          analytic_cov_entry(stats[a], stats[b], threads);
  return 0.5 * (raw + raw.transpose());
}

Eigen::MatrixXd analytic_cov(std::span<const LStatSpec> specs, const PanelDataset& data,
                             unsigned threads) {
  return analytic_estimate(specs, data, threads).cov;
}

JointEstimate analytic_estimate(std::span<const LStatSpec> specs, const PanelDataset& data,
                                unsigned threads) {
  if (specs.empty()) throw UsageError("lstat", "analytic covariance needs at least one statistic");
  std::vector<std::vector<double>> weights;
  std::vector<StatisticSample> stats;
  JointEstimate out;
  out.d = specs.size();
  out.n = data.rows();
  out.values.resize(static_cast<Eigen::Index>(specs.size()));
  for (const auto& spec : specs) weights.push_back(compute_weights(spec.scheme, data, spec.column));
  for (std::size_t s = 0; s < specs.size(); ++s) {
    stats.push_back({data.numeric(specs[s].column), weights[s], &specs[s].m});
    out.values(static_cast<Eigen::Index>(s)) = lstat_value(specs[s].m, stats[s].x, weights[s]);
    if (std::all_of(weights[s].begin(), weights[s].end(), [](double w) { return w == 1.0; }))
      out.degenerate = true;
  }
  out.cov = analytic_cov(stats, threads);
  out.cov_source = CovSource::kAnalytic;
  return out;
}

double quantile_domain_cov_kernel(double s, double t, const QuantileKernelInputs& in) {
  const double vals[] = {s, t, in.qj_prime, in.qk_prime, in.mj_prime, in.mk_prime,
                         in.f_q, in.k_j, in.k_k, in.k_jk};
  for (double v : vals)
    if (!std::isfinite(v)) throw NumericalError("lstat", "non-finite kernel input");
  const double bridge = in.f_q - s * t;
  const double bracket = bridge + (in.k_jk * in.f_q - s * t * in.k_j * in.k_k) - in.k_j * bridge -
                         in.k_k * bridge;
  return in.mj_prime * in.qj_prime * in.mk_prime * in.qk_prime * bracket;
}

double pure_quantile_process_cov(const Transform& m, const std::function<double(double)>& quantile,
                                 const std::function<double(double)>& quantile_derivative, double s,
                                 double t) {
  if (s <= 0.0 || s >= 1.0 || t <= 0.0 || t >= 1.0) return 0.0;
  const double gs = m.derivative(quantile(s)) * quantile_derivative(s);
  const double gt = m.derivative(quantile(t)) * quantile_derivative(t);
  const double value = gs * gt * (std::min(s, t) - s * t);
  if (!std::isfinite(value)) throw NumericalError("lstat", "non-finite quantile process kernel");
  return value;
}

Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double min_eigenvalue(const Eigen::MatrixXd& a) {
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace rlstat
