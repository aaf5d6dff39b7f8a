#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rlstat {

// Ascending copy of a sample; ties allowed, never empty.
class SortedSample {
 public:
  explicit SortedSample(std::span<const double> sample);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }

 private:
  std::vector<double> values_;
};

// Right-continuous nondecreasing step function. `levels[k]` is the value on
// [breakpoints[k], breakpoints[k+1]); `left` is the value below the first
// breakpoint. Breakpoints are strictly ascending.
class StepFunction {
 public:
  StepFunction(std::vector<double> breakpoints, std::vector<double> levels, double left);

  double operator()(double x) const;
  std::span<const double> breakpoints() const { return breakpoints_; }
  std::span<const double> levels() const { return levels_; }
  double left() const { return left_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<double> levels_;
  double left_;
};

// Continuous function, linear between ascending knots and constant beyond
// the first and last knot.
class PiecewiseLinear {
 public:
  PiecewiseLinear(std::vector<double> knots, std::vector<double> values);

  double operator()(double x) const;
  std::span<const double> knots() const { return knots_; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
};

// F_n(x) = #{X_i <= x} / n. Jumps are stored once per distinct value.
StepFunction ecdf(std::span<const double> sample);

// inf{x : f(x) >= y} for the nondecreasing functions above. Throws
// NumericalError("level unattainable") when y exceeds the supremum of f.
double generalized_inverse(const StepFunction& f, double y);
double generalized_inverse(const PiecewiseLinear& f, double y);
// Generic version for a nondecreasing callable on [lo, hi], by bisection to
// an absolute x-tolerance.
double generalized_inverse(const std::function<double(double)>& f, double y, double lo, double hi,
                           double tol = 1e-14);

// Q_n(u) = X_(i) for u in ((i-1)/n, i/n], u in (0, 1].
double empirical_quantile(const SortedSample& sample, double u);
double empirical_quantile(std::span<const double> sample, double u);

// Continuous linear interpolation of F_n through (origin, 0) and
// (X_(i), i/n); equal to 1 from X_(n) on. Requires distinct values and
// origin < min(sample).
PiecewiseLinear interpolated_ecdf(std::span<const double> sample, double origin = 0.0);

// Same interpolation of G_n(u) = n^-1 sum w_i 1{X_i <= u}; knot X_(i) takes
// n^-1 times the cumulative weight of the first i order statistics.
PiecewiseLinear interpolated_weighted_ecdf(std::span<const double> sample,
                                           std::span<const double> weights, double origin = 0.0);

// Deterministic perturbation that breaks ties: every value receives seeded
// noise of magnitude at most 1e-9 times the data scale (max |x|, or 1 for an
// all-zero sample).
std::vector<double> jitter_ties(std::span<const double> sample, std::uint64_t seed);

bool has_ties(std::span<const double> sample);

}  // namespace rlstat
