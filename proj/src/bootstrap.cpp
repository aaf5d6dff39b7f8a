#include "rlstat/bootstrap.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "rlstat/error.hpp"
#include "rlstat/numeric.hpp"
#include "rlstat/parallel.hpp"

namespace rlstat {

std::vector<std::size_t> resample_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n));
  return idx;
}

std::vector<std::size_t> multinomial_counts(std::size_t n, Rng& rng) {
  if (n == 0) throw UsageError("bootstrap", "multinomial counts need n >= 1");
  std::vector<std::size_t> counts(n, 0);
  for (auto i : resample_indices(n, rng)) ++counts[i];
  return counts;
}

std::vector<double> multiplier_weights(std::size_t n, MultiplierLaw law, Rng& rng) {
  std::vector<double> xi(n);
  if (law == MultiplierLaw::kNormal) {
    std::normal_distribution<double> dist(0.0, 1.0);
    for (auto& x : xi) x = dist(rng);
  } else {
    std::poisson_distribution<int> dist(1.0);
    for (auto& x : xi) x = static_cast<double>(dist(rng)) - 1.0;
  }
  return xi;
}

PanelDataset resample(const PanelDataset& data, const BootstrapPlan& plan, std::size_t draw) {
  Rng rng = make_rng(plan.seed, draw);
  const std::size_t units =
      plan.unit == ResampleUnit::kCluster ? data.clusters() : data.rows();
  if (units == 0) throw DataError("bootstrap", "cannot resample an empty dataset");
  if (plan.engine == Engine::kMultinomial) {
    auto idx = resample_indices(units, rng);
    if (plan.unit == ResampleUnit::kCluster) return data.select_clusters(idx, true);
    return data.select_rows(idx);
  }
  auto xi = multiplier_weights(units, plan.law, rng);
  std::vector<double> rw(data.rows());
  auto base = data.row_weights();
  auto cl = data.row_cluster_index();
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double mult = 1.0 + (plan.unit == ResampleUnit::kCluster ? xi[cl[r]] : xi[r]);
    rw[r] = base[r] * mult;
  }
  return data.with_row_weights(std::move(rw));
}

Eigen::MatrixXd sample_cov(const Eigen::MatrixXd& draws, const std::vector<bool>& use) {
  const Eigen::Index d = draws.cols();
  std::vector<Eigen::Index> rows;
  for (Eigen::Index b = 0; b < draws.rows(); ++b)
    if (use[static_cast<std::size_t>(b)]) rows.push_back(b);
  if (rows.size() < 2) throw NumericalError("bootstrap", "covariance needs at least two effective draws");
  const double m = static_cast<double>(rows.size());
  Eigen::VectorXd mean(d);
  std::vector<double> buf(rows.size());
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) buf[r] = draws(rows[r], j);
    mean(j) = pairwise_sum(buf) / m;
  }
  Eigen::MatrixXd cov(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j; k < d; ++k) {
      for (std::size_t r = 0; r < rows.size(); ++r)
        buf[r] = (draws(rows[r], j) - mean(j)) * (draws(rows[r], k) - mean(k));
      cov(j, k) = cov(k, j) = pairwise_sum(buf) / (m - 1.0);
    }
  }
  return cov;
}

Eigen::MatrixXd bootstrap_cov(const BootstrapResult& result) {
  std::vector<bool> use(result.failed.size());
  for (std::size_t b = 0; b < use.size(); ++b) use[b] = !result.failed[b];
  return sample_cov(result.draws, use);
}

BootstrapResult bootstrap_pipeline(const PanelDataset& data, const BootstrapPlan& plan,
                                   const Estimator& estimator) {
  if (plan.iterations == 0) throw UsageError("bootstrap", "iteration count must be at least 1");
  BootstrapResult out;
  out.seed = plan.seed;
  out.iterations = plan.iterations;
  // Errors on the original sample are not draw failures; let them surface.
  auto point = estimator(data);
  const std::size_t d = point.size();
  out.point = Eigen::Map<const Eigen::VectorXd>(point.data(), static_cast<Eigen::Index>(d));
  out.draws = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(plan.iterations),
                                        static_cast<Eigen::Index>(d), NAN);
  std::vector<char> failed(plan.iterations, 0);
  parallel_for(plan.iterations, plan.threads, [&](std::size_t b) {
    try {
      auto stats = estimator(resample(data, plan, b));
      if (stats.size() != d) throw NumericalError("bootstrap", "estimator changed output length");
      for (std::size_t j = 0; j < d; ++j) {
        if (!std::isfinite(stats[j])) throw NumericalError("bootstrap", "non-finite statistic");
        out.draws(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(j)) = stats[j];
      }
    } catch (const NumericalError&) {
      failed[b] = 1;
    } catch (const DataError&) {
      failed[b] = 1;
    }
    if (failed[b])
      out.draws.row(static_cast<Eigen::Index>(b)).setConstant(NAN);
  });
  out.failed.assign(failed.begin(), failed.end());
  for (char f : failed) out.failed_count += f ? 1 : 0;
  if (static_cast<double>(out.failed_count) >
      plan.max_failure_rate * static_cast<double>(plan.iterations)) {
    std::ostringstream os;
    os << out.failed_count << " of " << plan.iterations << " bootstrap draws failed (limit "
       << plan.max_failure_rate * 100.0 << "%)";
    throw NumericalError("bootstrap", os.str());
  }
  const std::size_t effective = plan.iterations - out.failed_count;
  out.cov = effective >= 2 ? bootstrap_cov(out)
                           : Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                   static_cast<Eigen::Index>(d));
  return out;
}

Estimator lstat_estimator(std::vector<LStatSpec> specs) {
  return [specs = std::move(specs)](const PanelDataset& data) {
    std::vector<double> out;
    out.reserve(specs.size());
    for (const auto& s : specs) out.push_back(lstat_eval(s, data));
    return out;
  };
}

}  // namespace rlstat
