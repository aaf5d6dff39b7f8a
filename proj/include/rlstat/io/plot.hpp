#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>

#include "json.hpp"

namespace rlstat::io {

// Product-Gaussian kernel density estimate on a regular grid spanning
// [min - 3h, max + 3h] per axis, with Silverman's bandwidth per axis.
struct KdeGrid {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::MatrixXd density;  // density(i, j) at (x(i), y(j))
  double hx = 0.0;
  double hy = 0.0;
};

// 0.9 * min(sd, IQR / 1.34) * N^(-1/5), falling back to sd when the IQR is
// zero. Throws NumericalError for constant input.
double silverman_bandwidth(std::span<const double> v);

// Requires at least 100 finite pairs.
KdeGrid kde_grid(std::span<const double> x, std::span<const double> y, std::size_t points = 101);

// Trapezoid-rule integral of the grid density.
double grid_integral(const KdeGrid& grid);

// CSV with header x,y,density; x varies slowest.
std::string grid_csv(const KdeGrid& grid);

// Grid metadata: bandwidths, 45-degree reference segment across the plot
// window and the point estimate.
nlohmann::json grid_meta(const KdeGrid& grid, double point_x, double point_y, const std::string& x_label,
                         const std::string& y_label);

}  // namespace rlstat::io
