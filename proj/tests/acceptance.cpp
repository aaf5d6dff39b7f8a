// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Pass criterion numbers as arguments to run a subset.

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/roots.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rlstat/bootstrap.hpp"
#include "rlstat/io/analysis.hpp"
#include "rlstat/io/config.hpp"
#include "rlstat/io/report.hpp"
#include "rlstat/lstat.hpp"
#include "rlstat/mc_oracle.hpp"
#include "rlstat/regress.hpp"
#include "rlstat/robustness.hpp"
#include "rlstat/weights.hpp"

using namespace rlstat;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::abs(b); }

PanelDataset one_per_row(const std::vector<Column>& cols) {
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < cols.front().values.size(); ++i) labels.push_back(std::to_string(i + 1));
  return PanelDataset(labels, cols);
}

DGPSpec univariate(Distribution law, std::size_t n) {
  DGPSpec spec;
  spec.kind = UnivariateDGP{{law}, {true}};
  spec.n = n;
  return spec;
}

Outcome integral_identity() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> size(1, 300);
  std::uniform_int_distribution<int> pick(0, 3);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> tx, tm, tdm;
  for (int k = 0; k <= 200; ++k) {
    const double x = -10.0 + 0.1 * k;
    tx.push_back(x);
    tm.push_back(std::sin(x) + 0.1 * x * x);
    tdm.push_back(std::cos(x) + 0.2 * x);
  }
  const Transform transforms[] = {Transform::identity(), Transform::power(2.0), Transform::power(3.0),
                                  Transform::table(tx, tm, tdm)};
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = static_cast<std::size_t>(size(rng));
    std::vector<double> x(n), w(n);
    const bool ties = rep % 5 == 0;
    for (auto& v : x) v = ties ? std::round(3.0 * normal(rng)) : 3.0 * normal(rng);
    for (auto& v : x) v = std::clamp(v, -9.9, 9.9);
    switch (rep % 3) {
      case 0:
        for (auto& v : w) v = unif(rng) * 2.0;
        break;
      case 1:
        w = quantile_trim(std::vector<std::span<const double>>{x}, 0.05, 0.9);
        break;
      default:
        for (auto& v : w) v = normal(rng);
    }
    const Transform& m = transforms[pick(rng)];
    const double direct = lstat_value(m, x, w);
    const double stieltjes = stieltjes_lstat(m, x, w);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(m.value(x[i]) * w[i]);
    scale = std::max(scale / static_cast<double>(n), 1e-300);
    worst = std::max(worst, std::abs(direct - stieltjes) / scale);
  }
  return {worst <= 1e-12, "max |integral - mean| / scale = " + fmt(worst, 3) + " over 1000 triples"};
}

Outcome mean_bootstrap() {
  bool pass = true;
  std::string detail;
  const std::pair<const char*, Distribution> laws[] = {{"normal", {Law::kNormal, 0.0, 1.0}},
                                                       {"uniform", {Law::kUniform, 0.0, 1.0}}};
  std::uint64_t seed = 11;
  for (const auto& [name, law] : laws) {
    const auto data = simulate(univariate(law, 1000), seed++);
    const auto x = data.numeric("x1");
    double m = 0;
    for (double v : x) m += v;
    m /= x.size();
    double s2 = 0;
    for (double v : x) s2 += (v - m) * (v - m);
    s2 /= (x.size() - 1.0);
    BootstrapPlan plan;
    plan.iterations = 4000;
    plan.seed = seed++;
    const auto res =
        bootstrap_pipeline(data, plan, lstat_estimator({{"mean", Transform::identity(), "x1", AllOnes{}}}));
    const double e = rel_err(res.cov(0, 0), s2 / 1000.0);
    pass = pass && e < 0.05;
    detail += std::string(detail.empty() ? "" : ", ") + name + " rel. error " + fmt(e, 3);
  }
  return {pass, detail + " (limit 0.05)"};
}

// Untrimmed and 2%-trimmed means of one N(0, 1) column.
std::vector<LStatSpec> trimming_pair() {
  return {{"mean", Transform::identity(), "x1", AllOnes{}},
          {"trimmed", Transform::identity(), "x1", QuantileTrim{{"x1"}, 0.02, 0.98}}};
}

const MonteCarloCovariance& trimming_oracle() {
  static const MonteCarloCovariance mc =
      mc_covariance(univariate({Law::kNormal, 0.0, 1.0}, 2000), trimming_pair(), 5000, 31);
  return mc;
}

Outcome trimming_covariance() {
  const auto& mc = trimming_oracle();
  const auto data = simulate(univariate({Law::kNormal, 0.0, 1.0}, 2000), 32);
  BootstrapPlan plan;
  plan.iterations = 5000;
  plan.seed = 33;
  const auto boot = bootstrap_pipeline(data, plan, lstat_estimator(trimming_pair()));
  const Eigen::MatrixXd scaled = 2000.0 * boot.cov;
  double worst = 0.0;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) worst = std::max(worst, rel_err(scaled(a, b), mc.cov(a, b)));
  std::ostringstream os;
  os << "n*boot cov [" << fmt(scaled(0, 0), 4) << ", " << fmt(scaled(0, 1), 4) << ", " << fmt(scaled(1, 1), 4)
     << "] vs MC [" << fmt(mc.cov(0, 0), 4) << ", " << fmt(mc.cov(0, 1), 4) << ", " << fmt(mc.cov(1, 1), 4)
     << "], max rel. error " << fmt(worst, 3) << " (limit 0.10)";
  return {worst <= 0.10, os.str()};
}

Outcome trimming_correlation() {
  const auto& mc = trimming_oracle();
  const double corr = mc.cov(0, 1) / std::sqrt(mc.cov(0, 0) * mc.cov(1, 1));
  return {corr > 0.9, "MC corr = " + fmt(corr, 4) + " at n=2000, 5000 reps (limit > 0.9)"};
}

Outcome test_size() {
  io::ComparisonSpec spec;
  spec.name = "size";
  spec.kind = io::ComparisonKind::kOls;
  spec.model.outcome = "y";
  spec.model.regressors = {"x"};
  spec.baseline = AllOnes{};
  spec.adjusted = ResidualTrim{1.96};
  spec.coefficients = {"x"};
  BootstrapPlan plan;
  plan.iterations = 299;
  TestSpec test;
  test.h = 0.0;
  test.alpha = 0.05;
  DGPSpec dgp;
  dgp.kind = RegressionDGP{1.0, 1.0, {Law::kNormal, 0.0, 1.0}, 1.0, 0.0};
  dgp.n = 1000;
  const auto rep = size_study(dgp, io::make_test_procedure(spec, plan, test), 0.05, 1000, 41);
  return {rep.rejection_rate >= 0.03 && rep.rejection_rate <= 0.08,
          "rejection rate " + fmt(rep.rejection_rate, 4) + " (SE " + fmt(rep.standard_error, 3) +
              ") over 1000 reps, B=299 per rep (band [0.03, 0.08])"};
}

Outcome critical_values() {
  const double chi1 = boost::math::quantile(boost::math::complement(boost::math::chi_squared(1), 0.05));
  const double chi2 = boost::math::quantile(boost::math::complement(boost::math::chi_squared(2), 0.05));
  const double sigma2 = 2.25;
  const double c1 = critical_value(0.0, Eigen::MatrixXd::Constant(1, 1, sigma2), 0.05, 100000, 1);
  const double c2 = critical_value(0.0, Eigen::MatrixXd::Identity(2, 2), 0.05, 100000, 1);
  const double e1 = rel_err(c1, 3.8415 * sigma2);
  const double e2 = rel_err(c2, 5.9915);

  const boost::math::normal z;
  const auto excess = [&](double c) {
    const double r = std::sqrt(c);
    return 1.0 - boost::math::cdf(z, r - 1.0) + boost::math::cdf(z, -r - 1.0) - 0.05;
  };
  boost::uintmax_t iters = 200;
  const auto br = boost::math::tools::toms748_solve(excess, 1.0, 30.0, boost::math::tools::eps_tolerance<double>(50),
                                                    iters);
  const double root = 0.5 * (br.first + br.second);
  const std::size_t draws = 1000000;
  const double mc = critical_value(1.0, Eigen::MatrixXd::Identity(1, 1), 0.05, draws, 5);
  // Standard error of an upper quantile: sqrt(a (1 - a) / R) / f(c), f the
  // density of (1 + Z)^2.
  const double r = std::sqrt(root);
  const double density = (boost::math::pdf(z, r - 1.0) + boost::math::pdf(z, -r - 1.0)) / (2.0 * r);
  const double se = std::sqrt(0.05 * 0.95 / static_cast<double>(draws)) / density;
  const bool pass = e1 <= 1e-3 && e2 <= 1e-3 && std::abs(mc - root) <= 3.0 * se;
  std::ostringstream os;
  os << "chi2_1 " << fmt(c1 / sigma2, 6) << " (ref " << fmt(chi1, 6) << "), chi2_2 " << fmt(c2, 6) << " (ref "
     << fmt(chi2, 6) << "), h=1: MC " << fmt(mc, 6) << " vs root " << fmt(root, 6) << " (3 SE = " << fmt(3 * se, 3)
     << ")";
  return {pass, os.str()};
}

Outcome kernel_conservation() {
  const auto q = [](double u) { return u; };
  const auto dq = [](double) { return 1.0; };
  const double v = quantile_kernel_variance(Transform::identity(), q, dq);
  const double e = std::abs(v - 1.0 / 12.0);
  return {e <= 1e-4, "integral " + fmt(v, 12) + " vs 1/12, abs. error " + fmt(e, 3)};
}

Outcome analytic_equivalence() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  const auto id = Transform::identity();
  const auto sq = Transform::power(2.0);
  double worst = 0.0;
  int cases = 0;
  for (std::size_t n : {3u, 8u, 15u, 23u, 30u}) {
    for (int rep = 0; rep < 4; ++rep) {
      std::vector<double> xj(n), xk(n);
      for (auto& v : xj) v = normal(rng);
      for (auto& v : xk) v = normal(rng);
      // Disjoint schemes: lower-tail trim on one column, upper-tail on the other.
      const auto wj = quantile_trim(std::vector<std::span<const double>>{xj}, 0.2, 1.0);
      const auto wk = quantile_trim(std::vector<std::span<const double>>{xk}, 0.0, 0.8);
      const Transform& mk = rep % 2 ? sq : id;
      const StatisticSample sj{xj, wj, &id}, sk{xk, wk, &mk};
      const auto fj = [&](double v) { return id.value(v); };
      const auto fk = [&](double v) { return mk.value(v); };
      const std::pair<const StatisticSample*, const StatisticSample*> pairs[] = {{&sj, &sk}, {&sj, &sj}, {&sk, &sk}};
      for (const auto& [a, b] : pairs) {
        const double fast = analytic_cov_entry(*a, *b);
        const double slow = oracle::naive_cov_entry(a->x, a->w, a == &sj ? std::function<double(double)>(fj) : fk,
                                                    b->x, b->w, b == &sj ? std::function<double(double)>(fj) : fk);
        const double e = std::abs(slow) > 1e-14 ? rel_err(fast, slow) : std::abs(fast - slow);
        worst = std::max(worst, e);
        ++cases;
      }
    }
  }

  // Unit weights: the analytic formula returns 0, the Monte Carlo oracle does not.
  const auto data = simulate(univariate({Law::kNormal, 0.0, 1.0}, 200), 71);
  const std::vector<LStatSpec> mean{{"mean", id, "x1", AllOnes{}}};
  const auto est = analytic_estimate(mean, data);
  const auto mc = mc_covariance(univariate({Law::kNormal, 0.0, 1.0}, 200), mean, 2000, 72);

  io::AnalysisConfig cfg;
  io::ComparisonSpec spec;
  spec.name = "mean";
  spec.kind = io::ComparisonKind::kLStat;
  spec.statistics = mean;
  spec.baseline = AllOnes{};
  spec.adjusted = AllOnes{};
  cfg.comparisons = {spec};
  io::LoadReport load{data.rows(), data.clusters(), 0};
  const auto result = io::run_analysis(cfg, data, load, io::Stage::kEstimate);
  const auto doc = io::results_json(cfg, result);
  const bool flagged = doc["comparisons"][0]["analytic"]["degenerate"].get<bool>() &&
                       io::render_report(cfg, result).find("degenerate") != std::string::npos;

  const bool pass = worst <= 1e-10 && est.degenerate && est.cov(0, 0) == 0.0 && std::abs(mc.cov(0, 0) - 1.0) < 0.1 &&
                    flagged;
  std::ostringstream os;
  os << cases << " entries, max rel. error " << fmt(worst, 3) << "; unit weights: analytic " << fmt(est.cov(0, 0))
     << ", MC n*Var " << fmt(mc.cov(0, 0), 4) << ", report flag " << (flagged ? "set" : "missing");
  return {pass, os.str()};
}

std::string panel_csv() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::ostringstream os;
  os << "country,y,x,z\n";
  for (int c = 0; c < 60; ++c)
    for (int t = 0; t < 2 + c % 4; ++t) {
      const double z = normal(rng), x = 0.8 * z + normal(rng);
      double y = 0.5 + 1.5 * x + normal(rng);
      if (t == 1 && c % 17 == 0) y += 12.0;
      os << "c" << c << "," << io::format_double(y) << "," << io::format_double(x) << "," << io::format_double(z)
         << "\n";
    }
  return os.str();
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "rlstat_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream(dir / "data.csv") << panel_csv();
  }
  const nlohmann::json doc = {
      {"input", "data.csv"},
      {"cluster", "country"},
      {"bootstrap", {{"iterations", 400}, {"seed", 2024}}},
      {"test", {{"h", 0.05}, {"mc_draws", 20000}, {"seed", 9}}},
      {"comparisons",
       {{{"name", "ols"}, {"outcome", "y"}, {"regressors", {"x"}}, {"fixed_effects", {"country"}}},
        {{"name", "iv"}, {"kind", "iv"}, {"outcome", "y"}, {"regressors", {"x"}}, {"instruments", {"z"}}},
        {{"name", "trim"},
         {"kind", "lstat"},
         {"statistics", {{{"column", "y"}}, {{"column", "x"}, {"transform", {{"power", 2}}}}}},
         {"adjusted", {{"type", "quantile_trim"}, {"columns", {"y", "x"}}}}}}},
      {"mc", {{"dgp", {{"kind", "panel"}, {"n", 40}, {"t_min", 2}, {"t_max", 5}}}, {"reps", 60}, {"seed", 4}}}};
  auto cfg = io::parse_config(doc, dir.string());

  std::vector<std::string> files;
  std::vector<std::string> mc_docs;
  bool same = true;
  for (unsigned threads : {1u, 2u, 5u}) {
    cfg.bootstrap.threads = threads;
    cfg.test.threads = threads;
    cfg.output = (dir / ("out" + std::to_string(threads))).string();
    io::write_outputs(cfg, io::run_analysis(cfg));
    std::string all;
    for (const char* name : {"results.json", "report.txt", "draws_ols.csv", "draws_iv.csv", "draws_trim.csv"})
      all += io::read_file((fs::path(cfg.output) / name).string()) + '\x1f';
    files.push_back(all);
    mc_docs.push_back(io::mc_json(io::run_mc(cfg, threads)).dump(2));
    same = same && files.back() == files.front() && mc_docs.back() == mc_docs.front();
  }
  return {same, std::to_string(files.front().size()) + " output bytes compared across 1, 2 and 5 threads" +
                    (same ? ", identical" : ", MISMATCH")};
}

Outcome regression_identities() {
  bool pass = true;
  std::ostringstream os;
  const auto exact = one_per_row({numeric_column("x", {1, 2, 3, 4, 5}), numeric_column("y", {2, 4, 6, 8, 10})});
  RegressionModel through_origin{"y", {"x"}};
  through_origin.intercept = false;
  const double b1 = ols_weighted(through_origin, exact)["x"];
  const auto outlier = one_per_row({numeric_column("x", {1, 2, 3, 4, 5}), numeric_column("y", {2, 4, 6, 80, 10})});
  const std::vector<double> w{1, 1, 1, 0, 1};
  const double b2 = ols_weighted(through_origin, outlier, w)["x"];
  pass = pass && std::abs(b1 - 2.0) <= 1e-8 * 2.0 && std::abs(b2 - 2.0) <= 1e-8 * 2.0;
  os << "exact fit " << fmt(b1, 12) << ", trimmed outlier " << fmt(b2, 12);

  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal;
  std::vector<std::string> cl;
  std::vector<double> y, x, x2;
  for (int c = 0; c < 50; ++c)
    for (int t = 0; t <= c % 3; ++t) {
      cl.push_back("g" + std::to_string(c));
      x.push_back(normal(rng));
      x2.push_back(normal(rng));
      y.push_back(1.0 + 0.5 * x.back() - x2.back() + normal(rng));
    }
  const PanelDataset panel(cl, {numeric_column("y", y), numeric_column("x", x), numeric_column("x2", x2)});
  RegressionModel ols{"y", {"x", "x2"}};
  ols.fixed_effects = {kClusterFactor};
  RegressionModel iv = ols;
  iv.instruments = {"x"};
  std::vector<double> weights(panel.rows(), 1.0);
  for (std::size_t r = 0; r < weights.size(); r += 7) weights[r] = 0.0;
  const auto fo = ols_weighted(ols, panel, weights);
  const auto fi = iv_2sls_weighted(iv, panel, weights);
  double worst = 0.0;
  for (Eigen::Index k = 0; k < fo.coef.size(); ++k)
    worst = std::max(worst, std::abs(fo.coef(k) - fi.coef(k)) / std::max(1.0, std::abs(fo.coef(k))));
  pass = pass && worst <= 1e-8;
  os << ", IV vs OLS max rel. diff " << fmt(worst, 3);

  const auto p = derived_params(0.0, {1.24, -0.21, -0.03, -0.04});
  pass = pass && std::abs(p.beta7 - 0.96) < 1e-12;
  os << ", persistence " << fmt(p.beta7, 6);
  return {pass, os.str()};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "integral identity", integral_identity},
      {2, "untrimmed-mean bootstrap oracle", mean_bootstrap},
      {3, "trimming covariance: bootstrap vs Monte Carlo", trimming_covariance},
      {4, "correlation of trimmed and untrimmed means", trimming_correlation},
      {5, "test size under exogenous errors", test_size},
      {6, "critical values", critical_values},
      {7, "quantile-process kernel conservation", kernel_conservation},
      {8, "analytic covariance vs brute force", analytic_equivalence},
      {9, "determinism across thread counts", determinism},
      {10, "regression identities", regression_identities},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!out.pass) ++failures;
    std::cout << (out.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << out.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
