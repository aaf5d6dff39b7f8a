#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace rlstat {

// Pairwise (tree) summation. The grouping depends only on the length of the
// input, so the result is reproducible regardless of how the terms were
// produced.
inline double pairwise_sum(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  if (n <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

// Index k (1-based) of the order statistic selected by a quantile level q
// among n observations: the smallest k with k >= q*n. A relative slack of
// 1e-9 absorbs representation error in decimal levels such as 0.02*150.
inline std::size_t quantile_rank(double q, std::size_t n) {
  const double target = q * static_cast<double>(n);
  const double slack = 1e-9 * std::max(1.0, std::abs(target));
  const double k = std::ceil(target - slack);
  if (k <= 0.0) return 0;
  if (k >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(k);
}

}  // namespace rlstat
