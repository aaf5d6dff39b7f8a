#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rlstat/dataset.hpp"
#include "rlstat/weights.hpp"

namespace rlstat {

// Pointwise transformation m with its derivative. Tables are interpolated by
// cubic Hermite splines through the supplied (x, m(x), m'(x)) triples and are
// undefined outside the table range.
class Transform {
 public:
  static Transform identity();
  static Transform power(double exponent);
  static Transform table(std::vector<double> x, std::vector<double> m, std::vector<double> dm);

  // NaN where m is undefined.
  double value(double x) const;
  double derivative(double x) const;
  bool is_identity() const { return kind_ == Kind::kIdentity; }
  std::string describe() const;

 private:
  enum class Kind { kIdentity, kPower, kTable };
  Kind kind_ = Kind::kIdentity;
  double exponent_ = 1.0;
  std::vector<double> tx_, tm_, tdm_;
};

struct LStatSpec {
  std::string name;
  Transform m = Transform::identity();
  std::string column;
  WeightScheme scheme = AllOnes{};
};

enum class CovSource { kAnalytic, kBootstrap, kOracle };
const char* to_string(CovSource source);

// Statistic values with a covariance estimate. For the analytic and oracle
// sources `cov` is the covariance of sqrt(n) * (estimate - target); for the
// bootstrap it is the covariance of the estimates themselves.
struct JointEstimate {
  Eigen::VectorXd values;
  Eigen::MatrixXd cov;
  CovSource cov_source = CovSource::kBootstrap;
  std::size_t n = 0;
  std::size_t d = 0;
  // Set when the analytic formula collapses (some statistic has w == 1).
  bool degenerate = false;
};

// m(x_i) for every observation; throws DataError naming the first
// observation where m is undefined.
std::vector<double> apply_transform(const Transform& m, std::span<const double> x);

// sum_i r_i m(X_i) w_i / sum_i r_i with row multipliers r (all ones when
// empty), i.e. n^-1 sum m(X_i) w_i for an ordinary sample.
double lstat_value(const Transform& m, std::span<const double> x, std::span<const double> w,
                   std::span<const double> row_weights = {});
double lstat_eval(const LStatSpec& spec, const PanelDataset& data);

// int_0^1 m(Q_n(u)) dK_n(u) as a Riemann-Stieltjes sum over the cells
// ((k-1)/n, k/n]: the integrand is read off the empirical quantile function
// and the integrator increments off K_n.
double stieltjes_lstat(const Transform& m, std::span<const double> x, std::span<const double> w);

// One statistic's inputs for the analytic covariance estimator.
struct StatisticSample {
  std::span<const double> x;
  std::span<const double> w;
  const Transform* m = nullptr;
};

// Sample analogue of the F-domain covariance formula for sqrt(n)-scaled
// statistics, discretized as a Riemann-Stieltjes double sum over observed
// support points with forward increments of m. Rows of the double sum are
// reduced pairwise so the result is identical for any thread count.
double analytic_cov_entry(const StatisticSample& j, const StatisticSample& k, unsigned threads = 1);
Eigen::MatrixXd analytic_cov(std::span<const StatisticSample> stats, unsigned threads = 1);
Eigen::MatrixXd analytic_cov(std::span<const LStatSpec> specs, const PanelDataset& data,
                             unsigned threads = 1);
JointEstimate analytic_estimate(std::span<const LStatSpec> specs, const PanelDataset& data,
                                unsigned threads = 1);

// Inputs to the quantile-domain integrand at (s, t).
struct QuantileKernelInputs {
  double qj_prime = 1.0;  // Q_j'(s)
  double qk_prime = 1.0;  // Q_k'(t)
  double mj_prime = 1.0;  // m_j'(Q_j(s))
  double mk_prime = 1.0;  // m_k'(Q_k(t))
  double f_q = 0.0;       // F_jk^Q(s, t)
  double k_j = 0.0;       // K_j(s)
  double k_k = 0.0;       // K_k(t)
  double k_jk = 0.0;      // K_jk(s, t)
};

double quantile_domain_cov_kernel(double s, double t, const QuantileKernelInputs& in);

// m'(Q(s)) Q'(s) m'(Q(t)) Q'(t) (min(s,t) - s t); zero on the boundary of
// the unit square.
double pure_quantile_process_cov(const Transform& m, const std::function<double(double)>& quantile,
                                 const std::function<double(double)>& quantile_derivative, double s,
                                 double t);

// (A + A^T) / 2 with negative eigenvalues raised to zero.
Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& a);
double min_eigenvalue(const Eigen::MatrixXd& a);

}  // namespace rlstat
