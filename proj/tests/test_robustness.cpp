#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rlstat/error.hpp"
#include "rlstat/rng.hpp"
#include "rlstat/robustness.hpp"

using namespace rlstat;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

Eigen::MatrixXd diag(std::initializer_list<double> v) { return vec(v).asDiagonal(); }

double normal_cdf(double x) { return boost::math::cdf(boost::math::normal(), x); }

}  // namespace

TEST_SUITE("robustness") {

TEST_CASE("mahalanobis examples") {
  CHECK(mahalanobis(vec({3, 4}), Eigen::MatrixXd::Identity(2, 2)) == doctest::Approx(5.0));
  CHECK(mahalanobis(vec({0, 0}), diag({2, 3})) == 0.0);
  CHECK(mahalanobis(vec({2, 0}), diag({4, 1})) == doctest::Approx(1.0));
  CHECK_THROWS_WITH_AS(mahalanobis(vec({1, 1}), diag({1, 0})), doctest::Contains("eigenvalue floor"),
                       NumericalError);
}

TEST_CASE("critical values at h = 0 are chi-square quantiles") {
  const double sigma2 = 2.5;
  const Eigen::MatrixXd s1 = Eigen::MatrixXd::Constant(1, 1, sigma2);
  const double c1 = critical_value(0.0, s1, 0.05, 100000, 1);
  CHECK(c1 / sigma2 == doctest::Approx(3.841458820694124).epsilon(1e-3));

  const double c2 = critical_value(0.0, Eigen::MatrixXd::Identity(2, 2), 0.05, 100000, 1);
  CHECK(c2 == doctest::Approx(5.991464547107979).epsilon(1e-3));

  // Mahalanobis norm with the covariance itself whitens to the identity.
  const Eigen::MatrixXd s3 = diag({1.0, 9.0, 0.25});
  CHECK(critical_value(0.0, s3, 0.01, 100000, 1, s3) == doctest::Approx(11.344866730144373).epsilon(1e-3));
  CHECK(CriticalValueMap(0.0, s3, s3, 1000, 1).exact());
}

TEST_CASE("Monte Carlo critical value at h = 1 matches the scalar root") {
  const auto excess = [](double c) {
    const double r = std::sqrt(c);
    return 1.0 - normal_cdf(r - 1.0) + normal_cdf(-r - 1.0) - 0.05;
  };
  boost::uintmax_t iters = 200;
  const auto bracket = boost::math::tools::toms748_solve(excess, 1.0, 20.0,
                                                         boost::math::tools::eps_tolerance<double>(50), iters);
  const double root = 0.5 * (bracket.first + bracket.second);
  CHECK(root == doctest::Approx(7.0).epsilon(0.02));
  const CriticalValueMap map(1.0, Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd(), 1000000, 3);
  CHECK_FALSE(map.exact());
  CHECK(map.critical_value(0.05) == doctest::Approx(root).epsilon(5e-3));
  CHECK(map.p_value(root) == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("Monte Carlo agrees with the exact path on a non-isotropic h = 0 case") {
  // Sum of 1 * chi2_1 and 4 * chi2_1; compare against a fresh simulation.
  const CriticalValueMap map(0.0, diag({1, 4}), Eigen::MatrixXd(), 400000, 5);
  CHECK_FALSE(map.exact());
  Rng rng(77);
  std::normal_distribution<double> normal;
  const int r = 400000;
  int above = 0;
  const double c = map.critical_value(0.05);
  for (int k = 0; k < r; ++k) {
    const double a = normal(rng), b = 2 * normal(rng);
    if (a * a + b * b > c) ++above;
  }
  CHECK(std::abs(above / static_cast<double>(r) - 0.05) < 4 * std::sqrt(0.05 * 0.95 / r));
}

TEST_CASE("critical value is nondecreasing in h") {
  for (const Eigen::MatrixXd& s : {Eigen::MatrixXd(Eigen::MatrixXd::Identity(1, 1)),
                                   Eigen::MatrixXd(diag({1.0, 3.0})),
                                   Eigen::MatrixXd(diag({1.0, 0.5, 2.0, 1.5}))}) {
    double prev = 0.0;
    for (double h : {0.0, 0.5, 1.0, 2.0, 4.0}) {
      const double c = critical_value(h, s, 0.05, 20000, 11);
      CHECK(c >= prev);
      prev = c;
    }
  }
}

TEST_CASE("identical estimates never reject") {
  for (double h : {0.0, 1.0}) {
    TestSpec spec;
    spec.h = h;
    spec.mc_draws = 20000;
    const auto rep = robustness_test(vec({1.5, 2}), vec({1.5, 2}), diag({0.1, 0.2}), diag({1, 1}), spec);
    CHECK(rep.statistic == 0.0);
    CHECK_FALSE(rep.reject);
    CHECK(rep.p_value_formal == 1.0);
    CHECK(rep.degenerate);
  }
  TestSpec spec;
  const auto zero = robustness_test(vec({1}), vec({1}), diag({0}), diag({1}), spec);
  CHECK(zero.p_value_formal == 1.0);
  CHECK(zero.critical_value == 0.0);
}

TEST_CASE("scalar p-value is the two-sided normal tail") {
  TestSpec spec;
  const double sd = 0.4, d = 0.9;
  const auto rep = robustness_test(vec({1.0 + d}), vec({1.0}), diag({sd * sd}), diag({1.0}), spec);
  CHECK(rep.exact);
  CHECK(rep.statistic == doctest::Approx(d / sd));
  CHECK(rep.p_value_formal == doctest::Approx(2 * (1 - normal_cdf(d / sd))).epsilon(1e-9));
  CHECK(rep.reject == (rep.p_value_formal < 0.05));
}

TEST_CASE("formal p-value is smaller than the heuristic one when the difference is tighter") {
  TestSpec spec;
  const auto rep = robustness_test(vec({2.2}), vec({1.0}), diag({0.25}), diag({1.0}), spec);
  CHECK(rep.p_value_formal < rep.p_value_heuristic);
  CHECK(rep.p_value_formal == doctest::Approx(2 * (1 - normal_cdf(1.2 / 0.5))).epsilon(1e-9));
  CHECK(rep.p_value_heuristic == doctest::Approx(2 * (1 - normal_cdf(1.2))).epsilon(1e-9));
}

TEST_CASE("decision is invariant to joint rescaling") {
  Eigen::MatrixXd s(2, 2);
  s << 0.5, 0.2, 0.2, 0.3;
  const auto b1 = vec({0.7, -0.4});
  const auto b2 = vec({0.1, 0.2});
  for (double h : {0.0, 0.8}) {
    TestSpec spec;
    spec.h = h;
    spec.mc_draws = 20000;
    const auto a = robustness_test(b1, b2, s, s, spec);
    const auto b = robustness_test(4.0 * b1, 4.0 * b2, 16.0 * s, 16.0 * s, spec);
    CHECK(a.reject == b.reject);
    CHECK(b.statistic == doctest::Approx(a.statistic).epsilon(1e-12));
    CHECK(b.critical_value == doctest::Approx(a.critical_value).epsilon(1e-12));
    CHECK(b.p_value_formal == doctest::Approx(a.p_value_formal).epsilon(1e-12));
  }
}

TEST_CASE("p-value inversion agrees with the decision on an alpha grid") {
  for (double h : {0.0, 0.5}) {
    const CriticalValueMap map(h, diag({1.0, 2.0}), Eigen::MatrixXd(), 20000, 9);
    std::vector<double> alphas, crit;
    for (int k = 1; k < 20; ++k) {
      alphas.push_back(k / 20.0);
      crit.push_back(map.critical_value(k / 20.0));
    }
    for (double t : {0.5, 3.0, 6.0, 9.5, 14.0}) {
      const double p = map.p_value(t);
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      for (std::size_t k = 0; k < alphas.size(); ++k) CHECK((t > crit[k]) == (p < alphas[k]));
    }
    // At the critical value itself the test does not reject.
    for (std::size_t k = 0; k < alphas.size(); ++k) CHECK_FALSE(map.p_value(crit[k]) < alphas[k]);
  }
}

TEST_CASE("test spec validation") {
  TestSpec spec;
  spec.alpha = 0.0;
  CHECK_THROWS_AS(validate(spec), UsageError);
  spec.alpha = 1.0;
  CHECK_THROWS_AS(validate(spec), UsageError);
  spec.alpha = 0.05;
  spec.h = -1;
  CHECK_THROWS_AS(validate(spec), UsageError);
  CHECK_THROWS_AS(critical_value(0.0, Eigen::MatrixXd::Identity(1, 1), 1.5, 1000, 1), UsageError);
  spec.h = 0;
  spec.norm = NormKind::kUser;
  CHECK_THROWS_AS(validate(spec), UsageError);
  spec.norm_matrix = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(robustness_test(vec({1, 2}), vec({0, 0}), diag({1, 1}), diag({1, 1}), spec), UsageError);
}

}  // TEST_SUITE
