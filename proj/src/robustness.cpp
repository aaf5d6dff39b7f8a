#include "rlstat/robustness.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/parallel.hpp"
#include "rlstat/rng.hpp"

namespace rlstat {

namespace {

constexpr std::size_t kGridDirections = 256;
constexpr double kIsotropyTolerance = 1e-10;

Eigen::MatrixXd checked_square(const Eigen::MatrixXd& m, Eigen::Index d, const char* what) {
  if (m.rows() != d || m.cols() != d) {
    std::ostringstream os;
    os << what << " is " << m.rows() << "x" << m.cols() << ", expected " << d << "x" << d;
    throw UsageError("robustness", os.str());
  }
  if (!m.allFinite()) throw NumericalError("robustness", std::string(what) + " has non-finite entries");
  return m;
}

Eigen::LLT<Eigen::MatrixXd> norm_factor(const Eigen::MatrixXd& norm) {
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (norm + norm.transpose()));
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0)
    throw NumericalError("robustness",
                         "norm matrix is not positive definite; apply an eigenvalue floor or use "
                         "the identity norm");
  return llt;
}

// Unit directions of the whitened space over which the supremum is taken.
std::vector<Eigen::VectorXd> direction_grid(std::size_t d, const Eigen::MatrixXd& eigenvectors,
                                            std::uint64_t seed) {
  std::vector<Eigen::VectorXd> dirs;
  const auto di = static_cast<Eigen::Index>(d);
  if (d == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
    return dirs;
  }
  if (d == 2) {
    for (std::size_t k = 0; k < kGridDirections; ++k) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / kGridDirections;
      Eigen::VectorXd u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
  } else if (d == 3) {
    // Fibonacci sphere.
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t k = 0; k < kGridDirections; ++k) {
      const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) / kGridDirections;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * static_cast<double>(k);
      Eigen::VectorXd u(3);
      u << r * std::cos(a), r * std::sin(a), z;
      dirs.push_back(u);
    }
  } else {
    Rng rng = make_rng(seed, 1);
    std::normal_distribution<double> normal;
    while (dirs.size() < kGridDirections) {
      Eigen::VectorXd u(di);
      for (Eigen::Index i = 0; i < di; ++i) u(i) = normal(rng);
      const double len = u.norm();
      if (len > 0.0) dirs.push_back(u / len);
    }
  }
  for (Eigen::Index i = 0; i < di; ++i) {
    dirs.push_back(Eigen::VectorXd::Unit(di, i));
    dirs.push_back(-Eigen::VectorXd::Unit(di, i));
  }
  for (Eigen::Index i = 0; i < eigenvectors.cols(); ++i) {
    dirs.push_back(eigenvectors.col(i).normalized());
    dirs.push_back(-eigenvectors.col(i).normalized());
  }
  return dirs;
}

// Number of simulated values allowed strictly above the critical value:
// the largest m with m < alpha * R.
std::size_t allowed_exceedances(double alpha, std::size_t r) {
  const double target = alpha * static_cast<double>(r);
  const double m = std::ceil(target - 1e-9 * std::max(1.0, target)) - 1.0;
  if (m <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(m), r - 1);
}

}  // namespace

const char* to_string(NormKind kind) {
  switch (kind) {
    case NormKind::kDifference:
      return "difference";
    case NormKind::kIdentity:
      return "identity";
    case NormKind::kUser:
      return "user";
  }
  return "?";
}

void validate(const TestSpec& spec) {
  if (!(spec.h >= 0.0) || !std::isfinite(spec.h))
    throw UsageError("robustness", "h must be a finite nonnegative number");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
    throw UsageError("robustness", "alpha must lie in (0, 1)");
  if (spec.mc_draws < 2) throw UsageError("robustness", "mc_draws must be at least 2");
  if (spec.norm == NormKind::kUser && spec.norm_matrix.size() == 0)
    throw UsageError("robustness", "user norm selected but no norm matrix given");
}

double mahalanobis(const Eigen::VectorXd& diff, const Eigen::MatrixXd& sigma) {
  checked_square(sigma, diff.size(), "norm matrix");
  const auto llt = norm_factor(sigma);
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  return z.norm();
}

CriticalValueMap::CriticalValueMap(double h, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& norm,
                                   std::size_t mc_draws, std::uint64_t seed, unsigned threads) {
  if (!(h >= 0.0) || !std::isfinite(h)) throw UsageError("robustness", "h must be finite and >= 0");
  if (mc_draws < 2) throw UsageError("robustness", "mc_draws must be at least 2");
  if (sigma.rows() == 0) throw UsageError("robustness", "empty covariance matrix");
  const Eigen::Index d = sigma.rows();
  dim_ = static_cast<std::size_t>(d);
  checked_square(sigma, d, "covariance matrix");
  const Eigen::MatrixXd n = norm.size() == 0 ? Eigen::MatrixXd::Identity(d, d)
                                             : checked_square(norm, d, "norm matrix");
  const auto llt = norm_factor(n);

  // Whitened covariance A = L^-1 Sigma L^-T.
  const Eigen::MatrixXd sym = 0.5 * (sigma + sigma.transpose());
  const Eigen::MatrixXd left = llt.matrixL().solve(sym);
  Eigen::MatrixXd a = llt.matrixL().solve(left.transpose());
  a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  if (eig.info() != Eigen::Success)
    throw NumericalError("robustness", "eigendecomposition of the whitened covariance failed");
  Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const double lmax = lambda.maxCoeff();
  const double lmin = lambda.minCoeff();

  if (h == 0.0 && lmax > 0.0 && lmax - lmin <= kIsotropyTolerance * lmax) {
    exact_ = true;
    scale_ = lambda.mean();
    return;
  }

  // xi = V diag(sqrt(lambda)) eta with eta standard normal, in antithetic pairs.
  const std::size_t half = (mc_draws + 1) / 2;
  const std::size_t r = 2 * half;
  Eigen::MatrixXd xi(d, static_cast<Eigen::Index>(r));
  {
    Rng rng = make_rng(seed, 0);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd root = eig.eigenvectors() * lambda.cwiseSqrt().asDiagonal();
    Eigen::VectorXd eta(d);
    for (std::size_t k = 0; k < half; ++k) {
      for (Eigen::Index i = 0; i < d; ++i) eta(i) = normal(rng);
      const Eigen::VectorXd x = root * eta;
      xi.col(static_cast<Eigen::Index>(2 * k)) = x;
      xi.col(static_cast<Eigen::Index>(2 * k + 1)) = -x;
    }
  }
  base_ = xi.colwise().squaredNorm();
  xi_ = std::move(xi);
  h_ = h;
  threads_ = threads;

  // The zero direction is the h = 0 distribution; Anderson's inequality makes
  // it a lower bound, and including it keeps the map monotone in h.
  dirs_.push_back(Eigen::VectorXd::Zero(d));
  if (h > 0.0) {
    auto grid = direction_grid(dim_, eig.eigenvectors(), seed);
    dirs_.insert(dirs_.end(), grid.begin(), grid.end());
  }
}

std::vector<double> CriticalValueMap::simulated(std::size_t k) const {
  const Eigen::RowVectorXd proj = dirs_[k].transpose() * xi_;
  const double hu2 = h_ * h_ * dirs_[k].squaredNorm();
  std::vector<double> s(static_cast<std::size_t>(xi_.cols()));
  for (Eigen::Index j = 0; j < xi_.cols(); ++j)
    s[static_cast<std::size_t>(j)] = hu2 + 2.0 * h_ * proj(j) + base_(j);
  return s;
}

double CriticalValueMap::critical_value(double alpha) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("robustness", "alpha must lie in (0, 1)");
  if (exact_) {
    boost::math::chi_squared dist(static_cast<double>(dim_));
    return scale_ * boost::math::quantile(boost::math::complement(dist, alpha));
  }
  const auto r = static_cast<std::size_t>(xi_.cols());
  const std::size_t pos = r - 1 - allowed_exceedances(alpha, r);
  std::vector<double> per_dir(dirs_.size());
  parallel_for(dirs_.size(), threads_, [&](std::size_t k) {
    auto s = simulated(k);
    std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(pos), s.end());
    per_dir[k] = s[pos];
  });
  return *std::max_element(per_dir.begin(), per_dir.end());
}

double CriticalValueMap::p_value(double t) const {
  if (std::isnan(t)) throw NumericalError("robustness", "statistic is NaN");
  if (exact_) {
    if (t <= 0.0) return 1.0;
    boost::math::chi_squared dist(static_cast<double>(dim_));
    return boost::math::cdf(boost::math::complement(dist, t / scale_));
  }
  std::vector<std::size_t> above(dirs_.size());
  parallel_for(dirs_.size(), threads_, [&](std::size_t k) {
    const auto s = simulated(k);
    above[k] = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [t](double v) { return v >= t; }));
  });
  return static_cast<double>(*std::max_element(above.begin(), above.end())) /
         static_cast<double>(xi_.cols());
}

double critical_value(double h, const Eigen::MatrixXd& sigma, double alpha, std::size_t mc_draws,
                      std::uint64_t seed, const Eigen::MatrixXd& norm) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("robustness", "alpha must lie in (0, 1)");
  return CriticalValueMap(h, sigma, norm, mc_draws, seed).critical_value(alpha);
}

TestReport robustness_test(const Eigen::VectorXd& beta1, const Eigen::VectorXd& beta2,
                           const Eigen::MatrixXd& sigma_diff, const Eigen::MatrixXd& sigma_marginal,
                           const TestSpec& spec) {
  validate(spec);
  const Eigen::Index d = beta1.size();
  if (d == 0 || beta2.size() != d)
    throw UsageError("robustness", "estimate vectors are empty or of different length");
  checked_square(sigma_diff, d, "covariance of the difference");
  checked_square(sigma_marginal, d, "marginal covariance");

  TestReport rep;
  rep.h = spec.h;
  rep.alpha = spec.alpha;
  rep.sigma = psd_floor(sigma_diff);
  if (!rep.sigma.allFinite())
    throw NumericalError("robustness", "covariance of the difference is not finite after flooring");
  const Eigen::MatrixXd marginal = psd_floor(sigma_marginal);
  switch (spec.norm) {
    case NormKind::kDifference:
      rep.norm_matrix = rep.sigma;
      break;
    case NormKind::kIdentity:
      rep.norm_matrix = Eigen::MatrixXd::Identity(d, d);
      break;
    case NormKind::kUser:
      rep.norm_matrix = checked_square(spec.norm_matrix, d, "user norm matrix");
      break;
  }

  const Eigen::VectorXd diff = beta1 - beta2;
  if (!diff.allFinite()) throw NumericalError("robustness", "estimates are not finite");
  if (diff.isZero(0.0)) {
    rep.degenerate = true;
    try {
      rep.critical_value = CriticalValueMap(spec.h, rep.sigma, rep.norm_matrix, spec.mc_draws,
                                            spec.seed, spec.threads)
                               .critical_value(spec.alpha);
    } catch (const NumericalError&) {
      // No usable norm: the null distribution is a point mass at h^2.
      rep.critical_value = spec.h * spec.h;
    }
    return rep;
  }

  rep.statistic = mahalanobis(diff, rep.norm_matrix);
  const CriticalValueMap formal(spec.h, rep.sigma, rep.norm_matrix, spec.mc_draws, spec.seed,
                                spec.threads);
  rep.exact = formal.exact();
  rep.critical_value = formal.critical_value(spec.alpha);
  const double t = rep.statistic * rep.statistic;
  rep.p_value_formal = formal.p_value(t);
  rep.reject = t > rep.critical_value;

  const Eigen::MatrixXd heuristic_norm =
      spec.norm == NormKind::kDifference ? marginal : rep.norm_matrix;
  const double th = std::pow(mahalanobis(diff, heuristic_norm), 2);
  const CriticalValueMap heuristic(spec.h, marginal, heuristic_norm, spec.mc_draws, spec.seed,
                                   spec.threads);
  rep.p_value_heuristic = heuristic.p_value(th);
  return rep;
}

}  // namespace rlstat
