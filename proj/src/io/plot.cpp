#include "rlstat/io/plot.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "rlstat/error.hpp"
#include "rlstat/io/report.hpp"
#include "rlstat/numeric.hpp"

namespace rlstat::io {

namespace {

constexpr std::size_t kMinDraws = 100;
constexpr Eigen::Index kChunk = 4096;

// Linear-interpolation quantile of sorted data (type 7).
double sorted_quantile(const std::vector<double>& s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

Eigen::VectorXd axis(double lo, double hi, std::size_t points) {
  Eigen::VectorXd g(static_cast<Eigen::Index>(points));
  for (std::size_t i = 0; i < points; ++i)
    g(static_cast<Eigen::Index>(i)) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

// Gaussian kernel values phi((g_i - v_r) / h) / h for r in [begin, end).
Eigen::MatrixXd kernel_block(const Eigen::VectorXd& grid, std::span<const double> v, std::size_t begin,
                             std::size_t end, double h) {
  const double norm = 1.0 / (h * std::sqrt(2.0 * std::numbers::pi));
  Eigen::MatrixXd k(grid.size(), static_cast<Eigen::Index>(end - begin));
  for (std::size_t r = begin; r < end; ++r)
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double z = (grid(i) - v[r]) / h;
      k(i, static_cast<Eigen::Index>(r - begin)) = norm * std::exp(-0.5 * z * z);
    }
  return k;
}

}  // namespace

double silverman_bandwidth(std::span<const double> v) {
  if (v.size() < 2) throw UsageError("cli_io", "bandwidth needs at least two values");
  const double n = static_cast<double>(v.size());
  const double mean = pairwise_sum(v) / n;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double sd = std::sqrt(pairwise_sum(sq) / (n - 1.0));
  if (!(sd > 0.0) || !std::isfinite(sd)) throw NumericalError("cli_io", "degenerate draws: zero variance");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const double iqr = sorted_quantile(s, 0.75) - sorted_quantile(s, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

KdeGrid kde_grid(std::span<const double> x, std::span<const double> y, std::size_t points) {
  if (x.size() != y.size()) throw UsageError("cli_io", "KDE inputs differ in length");
  if (points < 2) throw UsageError("cli_io", "KDE grid needs at least two points per axis");
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      fx.push_back(x[i]);
      fy.push_back(y[i]);
    }
  if (fx.size() < kMinDraws) throw UsageError("cli_io", "KDE needs at least 100 finite draws");
  KdeGrid g;
  g.hx = silverman_bandwidth(fx);
  g.hy = silverman_bandwidth(fy);
  const auto [xmin, xmax] = std::minmax_element(fx.begin(), fx.end());
  const auto [ymin, ymax] = std::minmax_element(fy.begin(), fy.end());
  g.x = axis(*xmin - 3.0 * g.hx, *xmax + 3.0 * g.hx, points);
  g.y = axis(*ymin - 3.0 * g.hy, *ymax + 3.0 * g.hy, points);
  g.density = Eigen::MatrixXd::Zero(g.x.size(), g.y.size());
  // Separable form: density = Kx * Ky^T / N, accumulated in fixed chunks.
  for (std::size_t begin = 0; begin < fx.size(); begin += kChunk) {
    const std::size_t end = std::min(fx.size(), begin + static_cast<std::size_t>(kChunk));
    const Eigen::MatrixXd kx = kernel_block(g.x, fx, begin, end, g.hx);
    const Eigen::MatrixXd ky = kernel_block(g.y, fy, begin, end, g.hy);
    g.density.noalias() += kx * ky.transpose();
  }
  g.density /= static_cast<double>(fx.size());
  return g;
}

double grid_integral(const KdeGrid& g) {
  const double dx = g.x(1) - g.x(0);
  const double dy = g.y(1) - g.y(0);
  double total = 0.0;
  for (Eigen::Index i = 0; i < g.x.size(); ++i) {
    const double wi = (i == 0 || i == g.x.size() - 1) ? 0.5 : 1.0;
    for (Eigen::Index j = 0; j < g.y.size(); ++j) {
      const double wj = (j == 0 || j == g.y.size() - 1) ? 0.5 : 1.0;
      total += wi * wj * g.density(i, j);
    }
  }
  return total * dx * dy;
}

std::string grid_csv(const KdeGrid& g) {
  std::ostringstream os;
  os << "x,y,density\n";
  for (Eigen::Index i = 0; i < g.x.size(); ++i)
    for (Eigen::Index j = 0; j < g.y.size(); ++j)
      os << format_double(g.x(i)) << "," << format_double(g.y(j)) << "," << format_double(g.density(i, j)) << "\n";
  return os.str();
}

nlohmann::json grid_meta(const KdeGrid& g, double point_x, double point_y, const std::string& x_label,
                         const std::string& y_label) {
  const double lo = std::min(g.x(0), g.y(0));
  const double hi = std::max(g.x(g.x.size() - 1), g.y(g.y.size() - 1));
  return {{"x_label", x_label},
          {"y_label", y_label},
          {"bandwidth", {g.hx, g.hy}},
          {"grid_points", {g.x.size(), g.y.size()}},
          {"x_range", {g.x(0), g.x(g.x.size() - 1)}},
          {"y_range", {g.y(0), g.y(g.y.size() - 1)}},
          {"reference_line", {{lo, lo}, {hi, hi}}},
          {"point_estimate", {point_x, point_y}}};
}

}  // namespace rlstat::io
