#include <algorithm>
#include <random>
#include <vector>

#include "doctest.h"
#include "rlstat/empirical.hpp"
#include "rlstat/error.hpp"

using namespace rlstat;

TEST_SUITE("empirical") {

TEST_CASE("ecdf counts observations at or below x") {
  const std::vector<double> s{1, 2, 3};
  const auto f = ecdf(s);
  CHECK(f(2.0) == doctest::Approx(2.0 / 3.0));
  CHECK(f(0.5) == 0.0);
  CHECK(f(3.0) == 1.0);
  CHECK(f(2.999) == doctest::Approx(2.0 / 3.0));

  const std::vector<double> ties{5, 5, 5};
  const auto g = ecdf(ties);
  CHECK(g(5.0) == 1.0);
  CHECK(g(4.999) == 0.0);
  CHECK(g.breakpoints().size() == 1);
}

TEST_CASE("ecdf rejects an empty sample") {
  CHECK_THROWS_WITH_AS(ecdf(std::vector<double>{}), doctest::Contains("empty sample"), DataError);
}

TEST_CASE("generalized inverse of step, linear and callable functions") {
  const std::vector<double> s{1, 2, 3};
  const auto f = ecdf(s);
  CHECK(generalized_inverse(f, 0.5) == 2.0);
  CHECK(generalized_inverse(f, 1.0) == 3.0);
  CHECK_THROWS_WITH_AS(generalized_inverse(f, 1.5), doctest::Contains("level unattainable"), NumericalError);

  const PiecewiseLinear id({0.0, 1.0}, {0.0, 1.0});
  CHECK(generalized_inverse(id, 0.3) == doctest::Approx(0.3));
  auto ident = [](double x) { return x; };
  CHECK(generalized_inverse(ident, 0.3, 0.0, 1.0) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("empirical quantile follows the left-open cell convention") {
  const std::vector<double> s{10, 20, 30};
  CHECK(empirical_quantile(s, 0.34) == 20.0);
  CHECK(empirical_quantile(s, 1.0 / 3.0) == 10.0);
  CHECK(empirical_quantile(s, 1.0) == 30.0);
  const std::vector<double> one{7};
  for (double u : {1e-9, 0.3, 1.0}) CHECK(empirical_quantile(one, u) == 7.0);
  CHECK_THROWS_AS(empirical_quantile(s, 0.0), UsageError);
  CHECK_THROWS_AS(empirical_quantile(s, 1.2), UsageError);
}

TEST_CASE("quantile equals the generalized inverse of the ecdf and satisfies the Galois property") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(1, 25);
  std::uniform_int_distribution<int> val(-5, 5);  // ties on purpose
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> s(static_cast<std::size_t>(len(rng)));
    for (auto& v : s) v = val(rng) * 0.5;
    const auto f = ecdf(s);
    const SortedSample sorted(s);
    const std::size_t n = s.size();
    std::vector<double> us;
    for (std::size_t k = 1; k <= n; ++k) {
      us.push_back(static_cast<double>(k) / static_cast<double>(n));
      us.push_back(std::nextafter(static_cast<double>(k) / static_cast<double>(n), 0.0));
    }
    us.push_back(0.5);
    us.push_back(1e-12);
    for (double u : us) {
      if (!(u > 0.0 && u <= 1.0)) continue;
      const double q = empirical_quantile(sorted, u);
      REQUIRE(q == generalized_inverse(f, u));
      for (double x = -3.0; x <= 3.0; x += 0.25) REQUIRE((f(x) >= u) == (q <= x));
    }
  }
}

TEST_CASE("ecdf is invariant to permutations") {
  std::vector<double> s{3.5, -1, 2, 2, 8, 0};
  const auto f = ecdf(s);
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 10; ++rep) {
    std::shuffle(s.begin(), s.end(), rng);
    const auto g = ecdf(s);
    for (double x = -2; x <= 9; x += 0.5) CHECK(f(x) == g(x));
  }
}

TEST_CASE("interpolated ecdf passes through (origin, 0) and (X_(i), i/n)") {
  const std::vector<double> s{0.2, 0.6};
  const auto f = interpolated_ecdf(s);
  // Between the knots (0.2, 1/2) and (0.6, 1).
  CHECK(f(0.4) == doctest::Approx(0.75));
  CHECK(f(0.7) == 1.0);
  CHECK(f(0.1) == doctest::Approx(0.25));
  const std::vector<double> one{0.5};
  CHECK(interpolated_ecdf(one)(0.25) == doctest::Approx(0.5));
  CHECK_THROWS_WITH_AS(interpolated_ecdf(std::vector<double>{0.1, 0.1}),
                       doctest::Contains("ties require jitter or midrank policy"), DataError);
}

TEST_CASE("interpolated ecdf stays within 1/n of the ecdf") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 1 + rep % 40;
    std::vector<double> s(n);
    for (auto& v : s) v = unif(rng);
    const auto f = ecdf(s);
    const auto g = interpolated_ecdf(s);
    double worst = 0.0;
    for (int k = 0; k <= 2000; ++k) {
      const double u = k / 2000.0;
      worst = std::max(worst, std::abs(f(u) - g(u)));
    }
    for (double v : s) worst = std::max(worst, std::abs(f(v) - g(v)));
    CHECK(worst <= 1.0 / static_cast<double>(n) + 1e-12);
  }
}

TEST_CASE("jitter breaks ties deterministically and stays tiny") {
  const std::vector<double> s{1, 1, 2, 2, 2, 5};
  CHECK(has_ties(s));
  const auto a = jitter_ties(s, 42);
  const auto b = jitter_ties(s, 42);
  CHECK(a == b);
  CHECK_FALSE(has_ties(a));
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(a[i] - s[i]) <= 1e-9 * 5.0);
  CHECK_NOTHROW(interpolated_ecdf(a));
}

}  // TEST_SUITE
