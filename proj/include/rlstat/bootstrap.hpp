#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rlstat/dataset.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/rng.hpp"

namespace rlstat {

enum class ResampleUnit { kRow, kCluster };
enum class Engine { kMultinomial, kMultiplier };
// Multiplier laws, both with mean 0 and variance 1.
enum class MultiplierLaw { kNormal, kPoissonCentered };

struct BootstrapPlan {
  std::size_t iterations = 10000;
  std::uint64_t seed = 0;
  ResampleUnit unit = ResampleUnit::kCluster;
  Engine engine = Engine::kMultinomial;
  MultiplierLaw law = MultiplierLaw::kPoissonCentered;
  unsigned threads = 1;
  // Largest tolerated fraction of failed draws.
  double max_failure_rate = 0.01;
};

struct BootstrapResult {
  Eigen::MatrixXd draws;  // B x d; rows of failed draws are NaN
  std::vector<bool> failed;
  std::size_t failed_count = 0;
  Eigen::VectorXd point;  // estimator on the original data
  Eigen::MatrixXd cov;    // zero matrix when fewer than two draws succeeded
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
};

// Statistic vector computed from one (possibly resampled) dataset. Throwing
// NumericalError or DataError marks the draw as failed.
using Estimator = std::function<std::vector<double>(const PanelDataset&)>;

// Multinomial(n; 1/n, ..., 1/n) counts.
std::vector<std::size_t> multinomial_counts(std::size_t n, Rng& rng);
// n indices drawn uniformly with replacement from [0, n).
std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng);
std::vector<double> multiplier_weights(std::size_t n, MultiplierLaw law, Rng& rng);

// The dataset seen by draw `draw` of `plan`. Multinomial plans materialize the
// drawn clusters (relabelled so repeats stay distinct) or rows; multiplier
// plans keep every row and attach multipliers 1 + xi per unit.
PanelDataset resample(const PanelDataset& data, const BootstrapPlan& plan, std::size_t draw);

// Runs the estimator on B resampled datasets. Draw b uses the stream
// derive_seed(plan.seed, b), so the draws are identical for any thread count.
BootstrapResult bootstrap_pipeline(const PanelDataset& data, const BootstrapPlan& plan,
                                   const Estimator& estimator);

Estimator lstat_estimator(std::vector<LStatSpec> specs);

// Unbiased covariance of the non-failed draws, symmetrized. Throws
// NumericalError with fewer than two effective draws.
Eigen::MatrixXd bootstrap_cov(const BootstrapResult& result);

// Unbiased covariance of the rows of `draws` flagged usable in `use`.
Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& draws, const std::vector<bool>& use);

}  // namespace rlstat
