#pragma once

// Independent reference implementations used only by the tests. They follow
// the defining formulas literally and make no attempt to be fast.

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oracle {

// n^-1 sum_i w_(i) clamp(n u - i + 1, 0, 1), with w ordered by x (stable).
inline double K_n_clamp(std::span<const double> x, std::span<const double> w, double u) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  long double s = 0.0L;
  for (std::size_t i = 1; i <= n; ++i) {
    const double c = std::clamp(static_cast<double>(n) * u - static_cast<double>(i) + 1.0, 0.0, 1.0);
    s += static_cast<long double>(w[order[i - 1]]) * c;
  }
  return static_cast<double>(s / static_cast<long double>(n));
}

// The F-domain double sum evaluated point by point: every conditional mean
// and joint distribution value is recomputed by a pass over all
// observations.
inline double naive_cov_entry(std::span<const double> xj, std::span<const double> wj,
                              const std::function<double(double)>& mj, std::span<const double> xk,
                              std::span<const double> wk, const std::function<double(double)>& mk) {
  const std::size_t n = xj.size();
  auto support = [](std::span<const double> v) {
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
  };
  const auto px = support(xj);
  const auto py = support(xk);
  long double total = 0.0L;
  for (std::size_t a = 0; a + 1 < px.size(); ++a) {
    const double dmj = mj(px[a + 1]) - mj(px[a]);
    for (std::size_t b = 0; b + 1 < py.size(); ++b) {
      const double dmk = mk(py[b + 1]) - mk(py[b]);
      double cj = 0, ck = 0, cjk = 0, swj = 0, swk = 0, swjk = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const bool in_j = xj[i] <= px[a];
        const bool in_k = xk[i] <= py[b];
        if (in_j) {
          cj += 1;
          swj += wj[i];
        }
        if (in_k) {
          ck += 1;
          swk += wk[i];
        }
        if (in_j && in_k) {
          cjk += 1;
          swjk += wj[i] * wk[i];
        }
      }
      const double nd = static_cast<double>(n);
      const double fj = cj / nd, fk = ck / nd, fjk = cjk / nd;
      const double kj = cj > 0 ? swj / cj : 0.0;
      const double kk = ck > 0 ? swk / ck : 0.0;
      const double kjk = cjk > 0 ? swjk / cjk : 0.0;
      const double integrand = (1.0 - kj - kk) * (fjk - fj * fk) + (kjk * fjk - kj * kk * fj * fk);
      total += static_cast<long double>(integrand) * dmj * dmk;
    }
  }
  return static_cast<double>(total);
}

}  // namespace oracle
