#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace rlstat {

// Which matrix defines the norm ||a||^2 = a' N^-1 a of the test statistic.
enum class NormKind { kDifference, kIdentity, kUser };
const char* to_string(NormKind kind);

struct TestSpec {
  double h = 0.0;  // H0: ||beta1 - beta2|| <= h
  double alpha = 0.05;
  NormKind norm = NormKind::kDifference;
  Eigen::MatrixXd norm_matrix;  // used when norm == kUser
  std::size_t mc_draws = 100000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

// Throws UsageError for h < 0, alpha outside (0, 1) or too few draws.
void validate(const TestSpec& spec);

// [a' S^-1 a]^(1/2). Throws NumericalError when S is not positive definite.
double mahalanobis(const Eigen::VectorXd& diff, const Eigen::MatrixXd& sigma);

// Null distribution of ||h v + xi||_N^2 with xi ~ N(0, sigma), maximized over
// ||v||_N <= 1. Exact (chi-square) when h = 0 and the whitened covariance is
// isotropic, otherwise Monte Carlo on one fixed set of antithetic normal
// draws evaluated along a deterministic grid of boundary directions.
class CriticalValueMap {
 public:
  CriticalValueMap(double h, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& norm,
                   std::size_t mc_draws, std::uint64_t seed, unsigned threads = 1);

  // Smallest c with sup_v Pr(||h v + xi||^2 > c) < alpha.
  double critical_value(double alpha) const;
  // max_v Pr(||h v + xi||^2 >= t); reject at alpha iff p_value(t) < alpha,
  // which holds iff t > critical_value(alpha).
  double p_value(double t) const;

  bool exact() const { return exact_; }
  std::size_t directions() const { return dirs_.size(); }
  std::size_t dimension() const { return dim_; }

 private:
  // Simulated ||h u + xi||^2 along direction k.
  std::vector<double> simulated(std::size_t k) const;

  std::size_t dim_ = 0;
  bool exact_ = false;
  double scale_ = 1.0;  // isotropic variance in the exact case
  double h_ = 0.0;
  unsigned threads_ = 1;
  Eigen::MatrixXd xi_;       // d x R whitened draws
  Eigen::RowVectorXd base_;  // ||xi_r||^2
  std::vector<Eigen::VectorXd> dirs_;
};

double critical_value(double h, const Eigen::MatrixXd& sigma, double alpha, std::size_t mc_draws,
                      std::uint64_t seed, const Eigen::MatrixXd& norm = Eigen::MatrixXd());

struct TestReport {
  double statistic = 0.0;  // ||beta1 - beta2||_N
  double critical_value = 0.0;  // on the squared scale
  double p_value_formal = 1.0;
  double p_value_heuristic = 1.0;
  bool reject = false;
  Eigen::MatrixXd sigma;  // covariance of the difference, after flooring
  Eigen::MatrixXd norm_matrix;
  double h = 0.0;
  double alpha = 0.05;
  bool exact = false;
  // Difference is exactly zero; the test is trivially not rejected.
  bool degenerate = false;
};

// Formal test of ||beta1 - beta2|| <= h using the covariance of the
// difference; the heuristic p-value repeats the computation with the
// marginal covariance of beta1 in place of sigma_diff.
TestReport robustness_test(const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta2,
                           const Eigen::MatrixXd& sigma_diff, const Eigen::MatrixXd& sigma_marginal,
                           const TestSpec& spec);

}  // namespace rlstat
