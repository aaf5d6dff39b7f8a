#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "rlstat/dataset.hpp"
#include "rlstat/empirical.hpp"
#include "rlstat/error.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/weights.hpp"

using namespace rlstat;

namespace {

PanelDataset one_column(const std::vector<double>& v, const std::string& name = "v") {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < v.size(); ++i) labels.push_back(std::to_string(i));
  return PanelDataset(labels, {numeric_column(name, v)});
}

}  // namespace

TEST_SUITE("weights") {

TEST_CASE("quantile trim keeps the order-statistic band") {
  const auto data = one_column({10, 20, 30, 40, 50});
  const std::vector<std::string> cols{"v"};
  CHECK(weights_quantile_trim(data, cols, 0.2, 0.8) == std::vector<double>{1, 1, 1, 1, 0});
  CHECK(weights_quantile_trim(data, cols, 0.0, 1.0) == std::vector<double>(5, 1.0));
}

TEST_CASE("quantile trim is a conjunction over columns") {
  PanelDataset data({"a", "b", "c", "d", "e"},
                    {numeric_column("u", {1, 2, 3, 4, 5}), numeric_column("v", {3, 100, 2, 4, 1})});
  const std::vector<std::string> cols{"u", "v"};
  // u band [1, 4] drops row e; v band [1, 4] drops row b.
  CHECK(weights_quantile_trim(data, cols, 0.0, 0.8) == std::vector<double>{1, 0, 1, 1, 0});
  const std::vector<std::string> missing{"nope"};
  CHECK_THROWS_AS(weights_quantile_trim(data, missing, 0.0, 0.8), DataError);
}

TEST_CASE("quantile trim depends on ranks only") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> x(137);
  for (auto& v : x) v = normal(rng);
  std::vector<double> y;
  for (double v : x) y.push_back(std::exp(3.0 * v) + 7.0);
  const std::vector<std::string> cols{"v"};
  CHECK(weights_quantile_trim(one_column(x), cols, 0.02, 0.98) ==
        weights_quantile_trim(one_column(y), cols, 0.02, 0.98));
}

TEST_CASE("quantile band treats rank zero as no lower bound") {
  const std::vector<double> v{3, 1, 2};
  const auto band = quantile_band(v, 0.0, 1.0);
  CHECK(std::isinf(band.first));
  CHECK(band.first < 0);
  CHECK(band.second == 3.0);
}

TEST_CASE("quantile band with row multipliers equals the band of materialized copies") {
  const std::vector<double> v{5, 1, 4, 2, 3};
  const std::vector<double> r{2, 0, 1, 3, 1};
  std::vector<double> copies;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int k = 0; k < static_cast<int>(r[i]); ++k) copies.push_back(v[i]);
  for (double lo : {0.0, 0.1, 0.3}) {
    for (double hi : {0.5, 0.8, 1.0}) {
      const auto a = quantile_band(v, lo, hi, r);
      const auto b = quantile_band(copies, lo, hi);
      CHECK(a == b);
    }
  }
}

TEST_CASE("residual trim keeps |e| < c sigma") {
  CHECK(weights_residual_trim(std::vector<double>{0, 3}, 1.0, 1.96) == std::vector<double>{1, 0});
  CHECK(weights_residual_trim(std::vector<double>{0, 0, 0}, 1.0, 1.96) == std::vector<double>(3, 1.0));
  CHECK(weights_residual_trim(std::vector<double>{-50, 3, 1e6}, 1.0, 1e300) == std::vector<double>(3, 1.0));
  CHECK(weights_residual_trim(std::vector<double>{1.96}, 1.0, 1.96) == std::vector<double>{0});
  CHECK_THROWS_AS(weights_residual_trim(std::vector<double>{1}, 0.0, 1.96), DataError);
}

TEST_CASE("winsorize ratio weights reproduce the Winsorized mean") {
  const std::vector<double> v{1, 2, 100};
  const auto w = weights_winsorize(v, 0.0, 2.0 / 3.0);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 1.0);
  CHECK(w[2] == doctest::Approx(0.02));
  CHECK(lstat_value(Transform::identity(), v, w) == doctest::Approx(5.0 / 3.0));

  const std::vector<double> inside{1, 2, 3};
  CHECK(weights_winsorize(inside, 0.0, 1.0) == std::vector<double>(3, 1.0));
  const std::vector<double> neg{-5, 1, 2};
  CHECK(weights_winsorize(neg, 1.0 / 3.0, 1.0) == std::vector<double>(3, 1.0));

  const std::vector<double> zero{0, 5, 6, 7};
  CHECK_THROWS_WITH_AS(weights_winsorize(zero, 0.5, 1.0), doctest::Contains("winsorize ratio undefined at zero"),
                       DataError);
}

TEST_CASE("scheme validation") {
  CHECK_THROWS_AS(validate(QuantileTrim{{"x"}, 0.5, 0.5}), UsageError);
  CHECK_THROWS_AS(validate(QuantileTrim{{"x"}, -0.1, 0.5}), UsageError);
  CHECK_THROWS_AS(validate(ResidualTrim{0.0}), UsageError);
  CHECK_THROWS_AS(validate(Winsorize{"x", 0.9, 0.1}), UsageError);
  CHECK_NOTHROW(validate(QuantileTrim{{"x"}, 0.0, 1.0}));
}

TEST_CASE("K_n matches the clamp formula and the spec cases") {
  const std::vector<double> x{3, 9};
  const std::vector<double> w{1, 0};
  const WeightFunction wf(x, w);
  for (double u : {0.0, 0.1, 0.25, 0.5, 0.6, 0.9, 1.0}) {
    CHECK(build_K_n(wf, u) == doctest::Approx(u <= 0.5 ? u : 0.5));
    CHECK(build_K_n(wf, u) == doctest::Approx(oracle::K_n_clamp(x, w, u)));
  }
  CHECK(stieltjes_lstat(Transform::identity(), x, w) == doctest::Approx(1.5));
  CHECK_THROWS_AS(build_K_n(wf, 1.5), UsageError);
}

TEST_CASE("K_n properties on random weights") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 1 + static_cast<std::size_t>(rep) * 3;
    std::vector<double> x(n), w(n), ones(n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = unif(rng);
      w[i] = unif(rng) * 2.0;
    }
    const WeightFunction wf(x, w);
    const WeightFunction id(x, ones);
    CHECK(build_K_n(wf, 0.0) == 0.0);
    double mean = 0;
    for (double v : w) mean += v;
    mean /= static_cast<double>(n);
    CHECK(build_K_n(wf, 1.0) == doctest::Approx(mean).epsilon(1e-12));
    double prev = 0.0;
    for (int k = 0; k <= 500; ++k) {
      const double u = k / 500.0;
      const double val = build_K_n(wf, u);
      CHECK(val == doctest::Approx(oracle::K_n_clamp(x, w, u)).epsilon(1e-12));
      CHECK(build_K_n(id, u) == doctest::Approx(u).epsilon(1e-14));
      CHECK(val >= prev - 1e-15);
      CHECK(val - prev <= wf.bound() / 500.0 + 1e-12);
      prev = val;
    }
  }
}

TEST_CASE("K_n is the interpolated weighted ecdf composed with the inverse interpolated ecdf") {
  const std::vector<double> x{0.7, 0.1, 0.4, 0.9, 0.25};
  const std::vector<double> w{1, 0, 1, 0.5, 1};
  const WeightFunction wf(x, w);
  const auto f = interpolated_ecdf(x);
  const auto g = interpolated_weighted_ecdf(x, w);
  for (int k = 1; k < 100; ++k) {
    const double u = k / 100.0;
    CHECK(build_K_n(wf, u) == doctest::Approx(g(generalized_inverse(f, u))).epsilon(1e-12));
  }
}

TEST_CASE("conditional weight means") {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> w{1, 1, 0};
  CHECK(K_F_hat(x, w, 3.0) == doctest::Approx(2.0 / 3.0));
  CHECK(K_F_hat(x, std::vector<double>(3, 1.0), 1.0) == 1.0);
  CHECK(K_F_hat(x, std::vector<double>(3, 1.0), 17.0) == 1.0);
  CHECK(K_F_hat(x, w, 0.999) == 0.0);

  const std::vector<double> xj{1, 2, 3}, xk{3, 2, 1};
  const std::vector<double> wj{1, 1, 0}, wk{0, 1, 1};
  CHECK(K_F_hat_joint(xj, xk, wj, wk, 2.0, 2.0) == 1.0);
  CHECK(K_F_hat_joint(xj, xk, std::vector<double>(3, 1.0), std::vector<double>(3, 1.0), 3.0, 3.0) == 1.0);
  CHECK(K_F_hat_joint(xj, xk, wj, wk, 1.0, 1.0) == 0.0);
}

}  // TEST_SUITE
