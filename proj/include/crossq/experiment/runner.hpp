#pragma once

// Seeded multi-run execution. Each seed writes
//   <output_dir>/seed_<s>/metrics.csv
//   <output_dir>/seed_<s>/checkpoint.cbor
// and the run as a whole writes <output_dir>/manifest.json.

#include <algorithm>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "crossq/agent/agent.hpp"
#include "crossq/diagnostics/diagnostics.hpp"
#include "crossq/envs/registry.hpp"
#include "crossq/experiment/config.hpp"
#include "crossq/experiment/metrics.hpp"
#include "crossq/random.hpp"

namespace crossq::experiment {

/// Scalar type used by training runs.
using TrainScalar = float;

inline constexpr const char* kManifestFormat = "crossq-run";
inline constexpr const char* kManifestFile = "manifest.json";

enum class SeedStatus { completed, numerical_fault };

struct SeedResult {
  std::uint64_t seed = 0;
  SeedStatus status = SeedStatus::completed;
  std::string message;
  std::int64_t env_steps = 0;
  std::string metrics_file;     // relative to the output directory
  std::string checkpoint_file;  // relative; empty when not saved
};

struct RunSummary {
  std::string run_id;
  std::filesystem::path output_dir;
  std::vector<SeedResult> seeds;

  bool any_fault() const {
    for (const auto& s : seeds) {
      if (s.status != SeedStatus::completed) return true;
    }
    return false;
  }
};

inline std::string run_id(const ExperimentConfig& cfg) { return cfg.series() + "_" + cfg.env; }

inline std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed) {
  return out / ("seed_" + std::to_string(seed));
}

/// Mean undiscounted return of the deterministic policy over `episodes`
/// episodes; episode k of evaluation round `round` resets from an
/// eval-stream seed indexed by round * episodes + k.
template <typename T>
double evaluate(agent::Agent<T>& ag, envs::Environment& env, std::uint64_t master_seed, std::uint64_t round,
                int episodes) {
  double total = 0.0;
  for (int k = 0; k < episodes; ++k) {
    const auto index = round * static_cast<std::uint64_t>(episodes) + static_cast<std::uint64_t>(k);
    std::vector<double> obs = env.reset(derive_seed(master_seed, static_cast<std::uint64_t>(Stream::eval_env), index));
    for (;;) {
      const auto action = ag.select_action(obs, /*stochastic=*/false);
      const auto r = env.step(action);
      total += r.reward;
      obs = r.observation;
      if (r.terminal || r.truncated) break;
    }
  }
  return total / static_cast<double>(episodes);
}

inline nlohmann::json env_spec_json(const envs::EnvSpec& s) {
  return {{"name", s.name},
          {"state_dim", s.state_dim},
          {"action_dim", s.action_dim},
          {"dt", s.dt},
          {"horizon", s.horizon},
          {"action_repeat", s.action_repeat},
          {"return_lower", s.return_lower},
          {"return_upper", s.return_upper}};
}

inline nlohmann::json build_info() {
  return {{"compiler", __VERSION__},
          {"cplusplus", __cplusplus},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"scalar", agent::ckpt::scalar_name<TrainScalar>()}};
}

inline std::string status_name(SeedStatus s) {
  return s == SeedStatus::completed ? "completed" : "numerical_fault";
}

inline nlohmann::json manifest_json(const ExperimentConfig& cfg, const std::vector<SeedResult>& results) {
  const auto env = envs::make_env(cfg.env, cfg.resolved_env_overrides());
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto& r : results) {
    seeds.push_back({{"seed", r.seed},
                     {"status", status_name(r.status)},
                     {"message", r.message},
                     {"env_steps", r.env_steps},
                     {"metrics", r.metrics_file},
                     {"checkpoint", r.checkpoint_file}});
  }
  nlohmann::json overrides = nlohmann::json::object();
  for (const auto& [k, v] : cfg.resolved_env_overrides()) overrides[k] = v;
  return {{"format", kManifestFormat},
          {"version", 1},
          {"run_id", run_id(cfg)},
          {"series", cfg.series()},
          {"config", cfg},
          {"resolved", {{"agent", cfg.resolved_agent()}, {"env_overrides", overrides}, {"env", env_spec_json(env->spec())}}},
          {"build", build_info()},
          {"seeds", seeds}};
}

inline void write_manifest(const std::filesystem::path& out, const ExperimentConfig& cfg,
                           const std::vector<SeedResult>& results) {
  const auto tmp = out / (std::string(kManifestFile) + ".tmp");
  {
    std::ofstream f(tmp, std::ios::trunc);
    if (!f) throw ConfigError("cannot write manifest in '" + out.string() + "'");
    f << manifest_json(cfg, results).dump(2) << '\n';
  }
  std::filesystem::rename(tmp, out / kManifestFile);
}

/// Trains one seed to completion (or to the first numerical fault). Metrics
/// are flushed at every snapshot and evaluation.
inline SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed, const std::filesystem::path& out) {
  SeedResult result;
  result.seed = seed;
  const auto dir = seed_dir(out, seed);
  std::filesystem::create_directories(dir);
  result.metrics_file = std::filesystem::relative(dir / "metrics.csv", out).string();
  MetricsWriter metrics(dir / "metrics.csv", run_id(cfg), seed);

  const agent::AgentConfig acfg = cfg.resolved_agent();
  const envs::Overrides overrides = cfg.resolved_env_overrides();
  auto env = envs::make_env(cfg.env, overrides);
  auto eval_env = envs::make_env(cfg.env, overrides);
  const auto& spec = env->spec();
  agent::Agent<TrainScalar> ag(acfg, spec.state_dim, spec.action_dim, seed);
  Rng probe_rng = make_rng(seed, Stream::probe);
  const auto checkpoint_path = dir / "checkpoint.cbor";

  std::uint64_t eval_round = 0;
  const auto run_eval = [&](std::int64_t step) {
    metrics.write(step, "eval_return", evaluate(ag, *eval_env, seed, eval_round++, cfg.eval_episodes));
    metrics.flush();
  };

  std::int64_t step = 0;
  try {
    if (cfg.eval_at_start) run_eval(0);
    std::uint64_t episode = 0;
    std::vector<double> obs = env->reset(derive_seed(seed, static_cast<std::uint64_t>(Stream::env), episode));
    double episode_return = 0.0;
    agent::Transition<TrainScalar> tr;
    while (step < cfg.total_env_steps) {
      const auto action = ag.select_action(obs, /*stochastic=*/true);
      const auto r = env->step(action);
      ++step;
      tr.state.assign(obs.begin(), obs.end());
      tr.action.assign(action.begin(), action.end());
      tr.reward = static_cast<TrainScalar>(r.reward);
      tr.next_state.assign(r.observation.begin(), r.observation.end());
      tr.done = r.terminal;
      ag.step(tr);
      episode_return += r.reward;
      if (r.terminal || r.truncated) {
        metrics.write(step, "train_return", episode_return);
        episode_return = 0.0;
        ++episode;
        obs = env->reset(derive_seed(seed, static_cast<std::uint64_t>(Stream::env), episode));
      } else {
        obs = r.observation;
      }

      if (step % cfg.snapshot_every == 0) {
        const auto snap = diagnostics::snapshot(ag, static_cast<std::uint64_t>(step), probe_rng);
        for (const auto& [name, value] : snap.records()) metrics.write(step, name, value);
        if (acfg.use_wn) metrics.write(step, "max_projection_deviation", ag.max_projection_deviation());
        metrics.flush();
      }
      if (step % cfg.eval_every == 0) run_eval(step);
      if (cfg.save_checkpoints && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
        agent::save_checkpoint(ag, checkpoint_path.string());
      }
    }
  } catch (const NumericalFault& e) {
    result.status = SeedStatus::numerical_fault;
    result.message = e.what();
  }
  metrics.flush();
  result.env_steps = step;
  if (cfg.save_checkpoints) {
    agent::save_checkpoint(ag, checkpoint_path.string());
    result.checkpoint_file = std::filesystem::relative(checkpoint_path, out).string();
  }
  return result;
}

/// Runs every seed of `cfg`, `jobs` seeds at a time. Each worker owns its
/// agent, environments and output files.
inline RunSummary run(const ExperimentConfig& cfg, int jobs = 1) {
  cfg.validate();
  RunSummary summary;
  summary.run_id = run_id(cfg);
  summary.output_dir = cfg.output_dir;
  std::filesystem::create_directories(summary.output_dir);
  write_manifest(summary.output_dir, cfg, {});

  summary.seeds.resize(cfg.seeds.size());
  std::vector<std::exception_ptr> errors(cfg.seeds.size());
  std::size_t next = 0;
  std::mutex mu;
  const auto worker = [&] {
    for (;;) {
      std::size_t i = 0;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= cfg.seeds.size()) return;
        i = next++;
      }
      try {
        summary.seeds[i] = run_seed(cfg, cfg.seeds[i], summary.output_dir);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(jobs, static_cast<int>(cfg.seeds.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  write_manifest(summary.output_dir, cfg, summary.seeds);
  return summary;
}

}  // namespace crossq::experiment
