#include "rlstat/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rlstat/error.hpp"
#include "rlstat/rng.hpp"

namespace rlstat {

namespace {

void require_nonempty(std::span<const double> sample) {
  if (sample.empty()) throw DataError("empirical", "empty sample");
}

// Smallest i in [1, n] with i/n >= u, using the same division that builds
// the ecdf levels so that quantile and generalized inverse agree exactly.
std::size_t quantile_index(std::size_t n, double u) {
  const double nd = static_cast<double>(n);
  std::size_t i = static_cast<std::size_t>(std::clamp(std::ceil(u * nd), 1.0, nd));
  while (i > 1 && static_cast<double>(i - 1) / nd >= u) --i;
  while (i < n && static_cast<double>(i) / nd < u) ++i;
  return i;
}

}  // namespace

SortedSample::SortedSample(std::span<const double> sample) : values_(sample.begin(), sample.end()) {
  require_nonempty(sample);
  std::sort(values_.begin(), values_.end());
}

StepFunction::StepFunction(std::vector<double> breakpoints, std::vector<double> levels, double left)
    : breakpoints_(std::move(breakpoints)), levels_(std::move(levels)), left_(left) {
  if (breakpoints_.size() != levels_.size())
    throw UsageError("empirical", "step function needs one level per breakpoint");
  for (std::size_t k = 1; k < breakpoints_.size(); ++k) {
    if (!(breakpoints_[k - 1] < breakpoints_[k]))
      throw UsageError("empirical", "step function breakpoints must be strictly ascending");
  }
}

double StepFunction::operator()(double x) const {
  auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
  if (it == breakpoints_.begin()) return left_;
  return levels_[static_cast<std::size_t>(it - breakpoints_.begin()) - 1];
}

PiecewiseLinear::PiecewiseLinear(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
  if (knots_.empty() || knots_.size() != values_.size())
    throw UsageError("empirical", "piecewise linear function needs matching knots and values");
  for (std::size_t k = 1; k < knots_.size(); ++k) {
    if (!(knots_[k - 1] < knots_[k]))
      throw UsageError("empirical", "piecewise linear knots must be strictly ascending");
  }
}

double PiecewiseLinear::operator()(double x) const {
  if (x <= knots_.front()) return values_.front();
  if (x >= knots_.back()) return values_.back();
  auto it = std::upper_bound(knots_.begin(), knots_.end(), x);
  const std::size_t k = static_cast<std::size_t>(it - knots_.begin());
  const double x0 = knots_[k - 1], x1 = knots_[k];
  const double t = (x - x0) / (x1 - x0);
  return values_[k - 1] + t * (values_[k] - values_[k - 1]);
}

StepFunction ecdf(std::span<const double> sample) {
  require_nonempty(sample);
  SortedSample s(sample);
  const std::size_t n = s.size();
  const double nd = static_cast<double>(n);
  std::vector<double> bp, lv;
  for (std::size_t k = 0; k < n; ++k) {
    if (k + 1 < n && s[k + 1] == s[k]) continue;
    bp.push_back(s[k]);
    lv.push_back(static_cast<double>(k + 1) / nd);
  }
  return StepFunction(std::move(bp), std::move(lv), 0.0);
}

double generalized_inverse(const StepFunction& f, double y) {
  if (y <= f.left()) return -INFINITY;
  auto lv = f.levels();
  auto it = std::lower_bound(lv.begin(), lv.end(), y);
  if (it == lv.end()) throw NumericalError("empirical", "level unattainable");
  return f.breakpoints()[static_cast<std::size_t>(it - lv.begin())];
}

double generalized_inverse(const PiecewiseLinear& f, double y) {
  auto kn = f.knots();
  auto v = f.values();
  if (y <= v.front()) return -INFINITY;
  auto it = std::lower_bound(v.begin(), v.end(), y);
  if (it == v.end()) throw NumericalError("empirical", "level unattainable");
  const std::size_t k = static_cast<std::size_t>(it - v.begin());
  // v[k-1] < y <= v[k]: the infimum lies on segment k-1..k.
  const double t = (y - v[k - 1]) / (v[k] - v[k - 1]);
  return kn[k - 1] + t * (kn[k] - kn[k - 1]);
}

double generalized_inverse(const std::function<double(double)>& f, double y, double lo, double hi,
                           double tol) {
  if (f(hi) < y) throw NumericalError("empirical", "level unattainable");
  if (f(lo) >= y) return lo;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) >= y)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double empirical_quantile(const SortedSample& sample, double u) {
  if (!(u > 0.0 && u <= 1.0))
    throw UsageError("empirical", "quantile level must lie in (0, 1]");
  return sample[quantile_index(sample.size(), u) - 1];
}

double empirical_quantile(std::span<const double> sample, double u) {
  return empirical_quantile(SortedSample(sample), u);
}

bool has_ties(std::span<const double> sample) {
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  return std::adjacent_find(s.begin(), s.end()) != s.end();
}

PiecewiseLinear interpolated_weighted_ecdf(std::span<const double> sample,
                                           std::span<const double> weights, double origin) {
  require_nonempty(sample);
  if (weights.size() != sample.size())
    throw UsageError("empirical", "weights and sample lengths differ");
  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return sample[a] < sample[b]; });
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (sample[order[k]] == sample[order[k - 1]])
      throw DataError("empirical", "ties require jitter or midrank policy");
  }
  if (!(origin < sample[order.front()]))
    throw UsageError("empirical", "interpolation origin must lie below the sample minimum");
  const double nd = static_cast<double>(sample.size());
  std::vector<double> knots{origin}, values{0.0};
  double cum = 0.0;
  for (auto i : order) {
    cum += weights[i];
    knots.push_back(sample[i]);
    values.push_back(cum / nd);
  }
  return PiecewiseLinear(std::move(knots), std::move(values));
}

PiecewiseLinear interpolated_ecdf(std::span<const double> sample, double origin) {
  std::vector<double> ones(sample.size(), 1.0);
  auto f = interpolated_weighted_ecdf(sample, ones, origin);
  // Pin the top knot to exactly 1 regardless of accumulated rounding.
  std::vector<double> v(f.values().begin(), f.values().end());
  for (std::size_t i = 1; i < v.size(); ++i) v[i] = static_cast<double>(i) / static_cast<double>(sample.size());
  return PiecewiseLinear(std::vector<double>(f.knots().begin(), f.knots().end()), std::move(v));
}

std::vector<double> jitter_ties(std::span<const double> sample, std::uint64_t seed) {
  double scale = 0.0;
  for (double x : sample) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) scale = 1.0;
  const double magnitude = 1e-9 * scale;
  std::vector<double> out(sample.begin(), sample.end());
  for (std::uint64_t attempt = 0; attempt < 16; ++attempt) {
    Rng rng = make_rng(seed, attempt);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = sample[i] + magnitude * (2.0 * uniform_open01(rng) - 1.0);
    if (!has_ties(out)) return out;
  }
  throw NumericalError("empirical", "jitter failed to break ties");
}

}  // namespace rlstat
