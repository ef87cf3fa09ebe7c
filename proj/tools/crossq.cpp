// Command-line front end: train, aggregate, plot, selfcheck.
//
// Exit codes: 0 success, 1 config error, 2 numerical fault, 3 missing data.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossq/errors.hpp"
#include "crossq/experiment/aggregate.hpp"
#include "crossq/experiment/config.hpp"
#include "crossq/experiment/plot.hpp"
#include "crossq/experiment/runner.hpp"
#include "crossq/experiment/selfcheck.hpp"

namespace {

namespace ex = crossq::experiment;

enum Exit : int { kOk = 0, kConfig = 1, kNumerical = 2, kMissing = 3 };

int train(const std::string& config_path, std::uint64_t seed_offset, int jobs) {
  ex::ExperimentConfig cfg = ex::load_config(config_path);
  for (auto& s : cfg.seeds) s += seed_offset;
  const auto summary = ex::run(cfg, jobs);
  for (const auto& s : summary.seeds) {
    std::cout << summary.run_id << " seed " << s.seed << ": " << ex::status_name(s.status) << " after "
              << s.env_steps << " env steps";
    if (!s.message.empty()) std::cout << " (" << s.message << ")";
    std::cout << '\n';
  }
  std::cout << "manifest: " << (summary.output_dir / ex::kManifestFile).string() << '\n';
  return summary.any_fault() ? kNumerical : kOk;
}

int aggregate(const std::vector<std::string>& runs, std::optional<std::int64_t> step, const std::string& out,
              std::uint64_t bootstrap_seed) {
  std::vector<std::filesystem::path> dirs(runs.begin(), runs.end());
  const auto rows = ex::aggregate_dirs(dirs, step, bootstrap_seed);
  ex::write_aggregate(rows, out);
  for (const auto& r : rows) {
    if (r.figure != "return") continue;
    std::cout << r.series << " @ " << r.step << ": IQM " << r.iqm << " [" << r.ci_low << ", " << r.ci_high << "]\n";
  }
  std::cout << rows.size() << " rows written to " << out << '\n';
  return kOk;
}

int plot(const std::string& from, const std::string& out_dir) {
  const auto rows = ex::read_aggregate(from);
  const std::filesystem::path dir =
      out_dir.empty() ? std::filesystem::path(from).parent_path() / "plots" : std::filesystem::path(out_dir);
  const auto files = ex::emit_plot_data(rows, dir);
  for (const auto& f : files) std::cout << f.string() << '\n';
  return kOk;
}

int selfcheck() {
  const auto r = ex::run_selfcheck();
  std::cout << "scale invariance: " << r.fixtures << " critics, max output deviation " << r.max_output_deviation
            << (r.outputs_ok() ? " ok" : " FAILED") << '\n';
  std::cout << "gradient scaling: max relative deviation " << r.max_gradient_deviation
            << (r.gradients_ok() ? " ok" : " FAILED") << '\n';
  std::cout << "tolerance " << r.tolerance << ", " << r.seconds << " s\n";
  return r.passed() ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CrossQ + weight normalization experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed_offset = 0;
  int jobs = 1;
  auto* train_cmd = app.add_subcommand("train", "Train every seed of an experiment config");
  train_cmd->add_option("--config", config_path, "Experiment config (JSON) or a run manifest")->required();
  train_cmd->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  train_cmd->add_option("--jobs", jobs, "Seeds trained concurrently")->check(CLI::PositiveNumber);

  std::vector<std::string> runs;
  std::optional<std::int64_t> step;
  std::string aggregate_out = "aggregate.csv";
  std::uint64_t bootstrap_seed = 0;
  auto* agg_cmd = app.add_subcommand("aggregate", "IQM and 90% stratified bootstrap CIs across runs");
  agg_cmd->add_option("--runs", runs, "Run output directories")->required()->expected(1, -1);
  agg_cmd->add_option("--step", step, "Evaluation step (default: every recorded step)");
  agg_cmd->add_option("--out", aggregate_out, "Aggregate CSV to write");
  agg_cmd->add_option("--bootstrap-seed", bootstrap_seed, "Seed of the bootstrap stream");

  std::string from;
  std::string plot_dir;
  auto* plot_cmd = app.add_subcommand("plot", "Per-figure CSV and SVG from an aggregate");
  plot_cmd->add_option("--from", from, "Aggregate CSV")->required();
  plot_cmd->add_option("--out-dir", plot_dir, "Output directory (default: <aggregate dir>/plots)");

  auto* self_cmd = app.add_subcommand("selfcheck", "Run the scale-invariance property suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return train(config_path, seed_offset, jobs);
    if (*agg_cmd) return aggregate(runs, step, aggregate_out, bootstrap_seed);
    if (*plot_cmd) return plot(from, plot_dir);
    if (*self_cmd) return selfcheck();
  } catch (const crossq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const crossq::NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return kNumerical;
  } catch (const crossq::MissingData& e) {
    std::cerr << "missing data: " << e.what() << '\n';
    return kMissing;
  } catch (const std::logic_error& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return kConfig;
  }
  return kOk;
}
