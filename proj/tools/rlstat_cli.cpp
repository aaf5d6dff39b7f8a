#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "rlstat/error.hpp"
#include "rlstat/io/analysis.hpp"
#include "rlstat/io/config.hpp"
#include "rlstat/io/plot.hpp"
#include "rlstat/io/report.hpp"

namespace {

using namespace rlstat;
using namespace rlstat::io;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<unsigned> threads;
  std::optional<std::string> output;
};

AnalysisConfig load(const Overrides& o, bool mc) {
  AnalysisConfig cfg = load_config(o.config);
  if (o.seed) {
    cfg.bootstrap.seed = *o.seed;
    if (cfg.mc) cfg.mc->seed = *o.seed;
  }
  if (o.iterations) {
    if (*o.iterations == 0) throw UsageError("cli_io", "--iterations must be positive");
    if (mc) {
      if (cfg.mc) cfg.mc->reps = *o.iterations;
    } else {
      cfg.bootstrap.iterations = *o.iterations;
    }
  }
  if (o.threads) {
    if (*o.threads == 0) throw UsageError("cli_io", "--threads must be positive");
    cfg.bootstrap.threads = *o.threads;
    cfg.test.threads = *o.threads;
  }
  if (o.output) cfg.output = *o.output;
  return cfg;
}

void run_stage(const Overrides& o, Stage stage) {
  const AnalysisConfig cfg = load(o, false);
  const AnalysisResult result = run_analysis(cfg, stage);
  write_outputs(cfg, result);
  std::cout << render_report(cfg, result);
}

void run_report(const Overrides& o) {
  const AnalysisConfig cfg = load(o, false);
  LoadReport load_report;
  const PanelDataset data = prepare_data(cfg, &load_report);
  AnalysisResult result;
  result.stage = Stage::kTest;
  result.load = load_report;
  for (const auto& spec : cfg.comparisons) {
    const auto point = make_comparison_estimator(spec)(data);
    BootstrapResult boot = parse_draws_csv(read_file(draws_path(cfg.output, spec.name)));
    if (boot.iterations != cfg.bootstrap.iterations)
      throw UsageError("cli_io", "draws file for '" + spec.name + "' holds " + std::to_string(boot.iterations) +
                                     " draws but the config asks for " +
                                     std::to_string(cfg.bootstrap.iterations));
    boot.seed = cfg.bootstrap.seed;
    const Eigen::VectorXd stacked =
        Eigen::Map<const Eigen::VectorXd>(point.data(), static_cast<Eigen::Index>(point.size()));
    auto res = assemble_comparison(spec, stacked, std::move(boot), cfg.test, true);
    res.clusters = data.clusters();
    res.analytic = analytic_diagnostic(spec, data, cfg.bootstrap.threads);
    result.comparisons.push_back(std::move(res));
  }
  write_outputs(cfg, result);
  std::cout << render_report(cfg, result);
}

void run_mc_command(const Overrides& o) {
  const AnalysisConfig cfg = load(o, true);
  const unsigned threads = o.threads.value_or(cfg.bootstrap.threads);
  const McResult result = run_mc(cfg, threads);
  const std::string text = mc_json(result).dump(2) + "\n";
  write_file_atomic((std::filesystem::path(cfg.output) / "mc.json").string(), text);
  std::cout << text;
}

void run_plot(const Overrides& o) {
  const AnalysisConfig cfg = load(o, false);
  const auto results = nlohmann::json::parse(read_file((std::filesystem::path(cfg.output) / "results.json").string()));
  for (const auto& spec : cfg.comparisons) {
    const BootstrapResult boot = parse_draws_csv(read_file(draws_path(cfg.output, spec.name)));
    const auto labels = statistic_labels(spec);
    const nlohmann::json* entry = nullptr;
    for (const auto& c : results.at("comparisons"))
      if (c.at("name") == spec.name) entry = &c;
    if (!entry) throw UsageError("cli_io", "results.json has no comparison '" + spec.name + "'");
    const auto d = static_cast<Eigen::Index>(labels.size());
    for (Eigen::Index k = 0; k < d; ++k) {
      const Eigen::VectorXd x = boot.draws.col(k);
      const Eigen::VectorXd y = boot.draws.col(d + k);
      const KdeGrid grid = kde_grid({x.data(), static_cast<std::size_t>(x.size())},
                                    {y.data(), static_cast<std::size_t>(y.size())});
      const std::string stem = "plot_" + spec.name + "_" + std::to_string(k + 1);
      const auto& label = labels[static_cast<std::size_t>(k)];
      const double px = entry->at("baseline").at(static_cast<std::size_t>(k)).get<double>();
      const double py = entry->at("adjusted").at(static_cast<std::size_t>(k)).get<double>();
      const auto dir = std::filesystem::path(cfg.output);
      write_file_atomic((dir / (stem + ".csv")).string(), grid_csv(grid));
      write_file_atomic((dir / (stem + ".json")).string(),
                        grid_meta(grid, px, py, "baseline:" + label, "adjusted:" + label).dump(2) + "\n");
      std::cout << (dir / (stem + ".csv")).string() << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Outlier-robustness analysis for trimmed and Winsorized estimators"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Analysis config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "Override the bootstrap (and mc) seed");
    sub->add_option("--iterations", o.iterations, "Override bootstrap iterations (mc: replications)");
    sub->add_option("--threads", o.threads, "Worker threads");
    sub->add_option("--output", o.output, "Output directory");
  };
  auto* estimate = app.add_subcommand("estimate", "Point estimates (and analytic covariance for L-statistics)");
  auto* bootstrap = app.add_subcommand("bootstrap", "Point estimates and joint bootstrap draws");
  auto* test = app.add_subcommand("test", "Full analysis: bootstrap plus formal and heuristic tests");
  auto* mc = app.add_subcommand("mc", "Monte Carlo covariance or size study from the config's mc section");
  auto* report = app.add_subcommand("report", "Recompute tests and reports from stored draws");
  auto* plot = app.add_subcommand("plot-data", "KDE grids of baseline vs adjusted draws");
  for (auto* sub : {estimate, bootstrap, test, mc, report, plot}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (estimate->parsed()) run_stage(o, Stage::kEstimate);
    if (bootstrap->parsed()) run_stage(o, Stage::kBootstrap);
    if (test->parsed()) run_stage(o, Stage::kTest);
    if (mc->parsed()) run_mc_command(o);
    if (report->parsed()) run_report(o);
    if (plot->parsed()) run_plot(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: malformed results file: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
