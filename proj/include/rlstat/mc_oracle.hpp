#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "rlstat/bootstrap.hpp"
#include "rlstat/dataset.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/rng.hpp"

namespace rlstat {

enum class Law { kNormal, kUniform, kLognormal, kStudentT, kPointMass };
const char* to_string(Law law);
Law parse_law(const std::string& name);

// A univariate law. Parameter meaning by law:
//   normal: a = mean, b = sd          uniform: [a, b]
//   lognormal: a = mu, b = sigma      student-t: a = df, b = scale
//   point mass: a = location
struct Distribution {
  Law law = Law::kNormal;
  double a = 0.0;
  double b = 1.0;

  double sample(Rng& rng) const;
  double mean() const;
  double variance() const;  // +inf when it does not exist
  // Whether E|X|^(2+c) < inf for some c > 0.
  bool has_2c_moment() const;
  std::string describe() const;
};

// Independent columns x1, x2, ...; every row is its own cluster.
struct UnivariateDGP {
  std::vector<Distribution> columns{Distribution{}};
  // Columns that will be trimmed; checked against the moment condition.
  std::vector<bool> trimmed;
};

// y = beta0 + beta1 x + e with x = strength * z + v, e = endogeneity * v + u,
// z, v ~ N(0, 1) and u from `error`. Columns y, x, z; one row per cluster.
struct RegressionDGP {
  double beta0 = 0.0;
  double beta1 = 1.0;
  Distribution error{};
  double instrument_strength = 1.0;
  double endogeneity = 0.0;
};

// Clustered version of RegressionDGP: clusters with T_i drawn uniformly from
// [t_min, t_max] and an additive cluster effect N(0, effect_sd^2) in y.
struct PanelDGP {
  RegressionDGP model{};
  std::size_t t_min = 5;
  std::size_t t_max = 5;
  double effect_sd = 0.0;
};

struct DGPSpec {
  std::variant<UnivariateDGP, RegressionDGP, PanelDGP> kind = UnivariateDGP{};
  // Observations (univariate, regression) or clusters (panel).
  std::size_t n = 1000;
};

// Throws UsageError for invalid parameters, including trimmed columns
// without finite (2+c)th moments.
void validate(const DGPSpec& dgp);
PanelDataset simulate(const DGPSpec& dgp, std::uint64_t seed);

struct MonteCarloCovariance {
  Eigen::MatrixXd cov;  // n * Cov(statistic) across replications
  Eigen::VectorXd mean;
  Eigen::MatrixXd draws;  // reps x d, NaN rows for failed replications
  std::size_t reps = 0;
  std::size_t failed = 0;
};

// Replication r simulates with derive_seed(seed, r). Throws NumericalError
// when more than 1% of the replications fail.
MonteCarloCovariance mc_covariance(const DGPSpec& dgp, const Estimator& estimator, std::size_t reps,
                                   std::uint64_t seed, unsigned threads = 1);
MonteCarloCovariance mc_covariance(const DGPSpec& dgp, std::vector<LStatSpec> specs,
                                   std::size_t reps, std::uint64_t seed, unsigned threads = 1);

struct CoverageReport {
  double alpha = 0.05;
  double rejection_rate = 0.0;
  std::size_t reps = 0;
  std::size_t rejections = 0;
  double standard_error = 0.0;  // sqrt(rate (1 - rate) / reps)
};

// Formal p-value of a test run on one simulated dataset; `seed` is a stream
// the procedure may use for its own resampling.
using TestProcedure = std::function<double(const PanelDataset& data, std::uint64_t seed)>;

// Fraction of replications whose p-value falls below alpha.
CoverageReport size_study(const DGPSpec& dgp, const TestProcedure& procedure, double alpha,
                          std::size_t reps, std::uint64_t seed, unsigned threads = 1);

// Double integral over (0,1)^2 of m'(Q(s))Q'(s) m'(Q(t))Q'(t) (min(s,t) - st)
// by nested adaptive Gauss-Kronrod quadrature split along the diagonal.
double quantile_kernel_variance(const Transform& m, const std::function<double(double)>& quantile,
                                const std::function<double(double)>& quantile_derivative,
                                double tolerance = 1e-10);

}  // namespace rlstat
