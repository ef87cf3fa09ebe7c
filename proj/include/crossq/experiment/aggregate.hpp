#pragma once

// Cross-run aggregation: builds task x seed matrices per series and figure,
// and summarizes each with IQM and a 90% stratified bootstrap CI.
//
// Output schema (CSV): figure,series,step,iqm,ci_low,ci_high

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crossq/errors.hpp"
#include "crossq/experiment/metrics.hpp"
#include "crossq/experiment/runner.hpp"
#include "crossq/stats/stats.hpp"

namespace crossq::experiment {

inline constexpr const char* kAggregateHeader = "figure,series,step,iqm,ci_low,ci_high";

struct AggregateRow {
  std::string figure;
  std::string series;
  std::int64_t step = 0;
  double iqm = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;

  bool operator==(const AggregateRow&) const = default;
};

struct FigureDef {
  std::string figure;
  std::string scalar;
  bool normalize;  // map returns to [0, 1] via the env's declared bounds
  bool required;   // absence is an error rather than a skipped figure
};

/// Learning curve plus the critic diagnostics panels.
inline const std::vector<FigureDef>& figure_defs() {
  static const std::vector<FigureDef> defs = {
      {"return", "eval_return", true, true},
      {"weight_norm", "critic_norm_sum", false, false},
      {"elr", "critic0/layer0/elr", false, false},
      {"dead_fraction", "critic0/hidden0/dead_fraction", false, false},
  };
  return defs;
}

/// One run directory: its manifest and every seed's metrics.
struct LoadedRun {
  std::filesystem::path dir;
  std::string series;
  std::string task;
  double return_lower = 0.0;
  double return_upper = 1.0;
  std::map<std::uint64_t, std::vector<MetricRecord>> seeds;
};

inline LoadedRun load_run(const std::filesystem::path& dir) {
  const auto manifest_path = dir / kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw MissingData("no manifest in '" + dir.string() + "'");
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::parse_error& e) {
    throw MissingData("unreadable manifest '" + manifest_path.string() + "': " + e.what());
  }
  if (m.value("format", "") != kManifestFormat) throw MissingData("'" + manifest_path.string() + "' is not a run manifest");
  LoadedRun run;
  run.dir = dir;
  run.series = m.at("series").get<std::string>();
  const auto& env = m.at("resolved").at("env");
  run.task = env.at("name").get<std::string>();
  run.return_lower = env.at("return_lower").get<double>();
  run.return_upper = env.at("return_upper").get<double>();
  const auto& cfg = m.at("config");
  for (const auto& s : cfg.at("seeds")) {
    const auto seed = s.get<std::uint64_t>();
    const auto path = seed_dir(dir, seed) / "metrics.csv";
    run.seeds[seed] = std::filesystem::exists(path) ? read_metrics(path) : std::vector<MetricRecord>{};
  }
  return run;
}

namespace detail {

struct Cell {
  std::string task;
  std::uint64_t seed;
  const std::vector<MetricRecord>* records;
  double lower;
  double upper;
};

inline std::optional<double> lookup(const std::vector<MetricRecord>& recs, const std::string& scalar,
                                    std::int64_t step) {
  for (const auto& r : recs) {
    if (r.env_step == step && r.scalar == scalar) return r.value;
  }
  return std::nullopt;
}

}  // namespace detail

/// Aggregates at `at_step`, or at every step present when empty. Missing
/// (task, seed) cells raise MissingData naming each absent pair.
inline std::vector<AggregateRow> aggregate(const std::vector<LoadedRun>& runs, std::optional<std::int64_t> at_step,
                                           std::uint64_t bootstrap_seed = 0,
                                           int replicates = stats::kBootstrapReplicates) {
  std::map<std::string, std::vector<detail::Cell>> by_series;
  std::set<std::tuple<std::string, std::string, std::uint64_t>> seen;
  for (const auto& run : runs) {
    for (const auto& [seed, recs] : run.seeds) {
      if (!seen.emplace(run.series, run.task, seed).second) {
        throw ConfigError("series '" + run.series + "' has task '" + run.task + "' seed " + std::to_string(seed) +
                          " in more than one run directory");
      }
      by_series[run.series].push_back({run.task, seed, &recs, run.return_lower, run.return_upper});
    }
  }

  std::vector<AggregateRow> rows;
  for (const auto& def : figure_defs()) {
    for (const auto& [series, cells] : by_series) {
      std::set<std::int64_t> steps;
      bool any = false;
      for (const auto& c : cells) {
        for (const auto& r : *c.records) {
          if (r.scalar != def.scalar) continue;
          any = true;
          if (!at_step) steps.insert(r.env_step);
        }
      }
      if (!any && !def.required) continue;
      if (at_step) steps = {*at_step};
      if (steps.empty()) throw MissingData("series '" + series + "' has no '" + def.scalar + "' records");

      for (const std::int64_t step : steps) {
        stats::RunMatrix matrix;
        matrix.step = step;
        std::map<std::string, std::vector<double>> per_task;
        std::vector<std::string> missing;
        for (const auto& c : cells) {
          const auto v = detail::lookup(*c.records, def.scalar, step);
          if (!v) {
            missing.push_back("(" + c.task + ", " + std::to_string(c.seed) + ")");
            continue;
          }
          per_task[c.task].push_back(def.normalize ? (*v - c.lower) / (c.upper - c.lower) : *v);
        }
        if (!missing.empty()) {
          std::string msg = "missing '" + def.scalar + "' at step " + std::to_string(step) + " for series '" +
                            series + "':";
          for (const auto& m : missing) msg += " " + m;
          throw MissingData(msg);
        }
        for (auto& [task, scores] : per_task) {
          if (scores.size() < 2) {
            throw ConfigError("series '" + series + "' task '" + task + "' needs at least 2 seeds for a CI");
          }
          matrix.tasks.push_back(task);
          matrix.scores.push_back(std::move(scores));
        }
        const auto ci = stats::stratified_bootstrap_ci(matrix, stats::kConfidenceLevel, replicates, bootstrap_seed);
        rows.push_back({def.figure, series, step, stats::point_estimate(matrix), ci.low, ci.high});
      }
    }
  }
  return rows;
}

inline std::vector<AggregateRow> aggregate_dirs(const std::vector<std::filesystem::path>& dirs,
                                                std::optional<std::int64_t> at_step, std::uint64_t bootstrap_seed = 0) {
  std::vector<LoadedRun> runs;
  for (const auto& d : dirs) runs.push_back(load_run(d));
  return aggregate(runs, at_step, bootstrap_seed);
}

inline void write_aggregate(const std::vector<AggregateRow>& rows, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write aggregate '" + path.string() + "'");
  out << kAggregateHeader << '\n';
  for (const auto& r : rows) {
    out << r.figure << ',' << r.series << ',' << r.step << ',' << format_number(r.iqm) << ','
        << format_number(r.ci_low) << ',' << format_number(r.ci_high) << '\n';
  }
}

inline std::vector<AggregateRow> read_aggregate(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingData("cannot read aggregate '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kAggregateHeader) {
    throw MissingData("'" + path.string() + "' is not an aggregate file");
  }
  std::vector<AggregateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 6) throw MissingData("malformed aggregate line: " + line);
    rows.push_back({std::string(f[0]), std::string(f[1]), parse_integer<std::int64_t>(f[2]), parse_number(f[3]),
                    parse_number(f[4]), parse_number(f[5])});
  }
  return rows;
}

}  // namespace crossq::experiment
