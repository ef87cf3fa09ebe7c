#pragma once

#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossq/agent/config.hpp"
#include "crossq/agent/config_json.hpp"
#include "crossq/envs/registry.hpp"
#include "crossq/errors.hpp"

namespace crossq::experiment {

enum class Variant { sac, crossq, crossq_wn };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::sac: return "sac";
    case Variant::crossq: return "crossq";
    case Variant::crossq_wn: return "crossq_wn";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "sac") return Variant::sac;
  if (s == "crossq") return Variant::crossq;
  if (s == "crossq_wn") return Variant::crossq_wn;
  throw ConfigError("unknown variant '" + s + "' (expected sac, crossq or crossq_wn)");
}

/// Agent settings that define each variant, before user overrides.
///   sac:       target networks, no batch norm, plain Adam, actor every update
///   crossq:    joint-batch batch norm, no target networks, plain Adam
///   crossq_wn: crossq + weight normalization, target networks, AdamW
inline agent::AgentConfig variant_preset(Variant v) {
  agent::AgentConfig c;
  switch (v) {
    case Variant::sac:
      c.use_batch_norm = false;
      c.use_wn = false;
      c.use_target_net = true;
      c.policy_delay = 1;
      c.weight_decay_unconstrained = 0.0;
      break;
    case Variant::crossq:
      c.use_batch_norm = true;
      c.use_wn = false;
      c.use_target_net = false;
      c.weight_decay_unconstrained = 0.0;
      break;
    case Variant::crossq_wn:
      break;
  }
  return c;
}

/// Reset schedule used when resets are enabled without an explicit interval.
inline constexpr std::int64_t kDefaultResetInterval = 80000;

struct ExperimentConfig {
  std::string env = "pendulum";
  Variant variant = Variant::crossq_wn;
  nlohmann::json agent = nlohmann::json::object();        // overrides on top of the variant preset
  nlohmann::json env_overrides = nlohmann::json::object();
  std::int64_t total_env_steps = 100000;
  std::int64_t eval_every = 25000;
  int eval_episodes = 5;
  bool eval_at_start = false;
  std::int64_t snapshot_every = 1000;
  std::int64_t checkpoint_every = 0;  // 0: final checkpoint only
  bool save_checkpoints = true;
  std::vector<std::uint64_t> seeds = std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::string output_dir = "runs/default";
  std::string label;  // series name in aggregates; derived when empty
  bool enable_resets = false;  // periodic resets at multiples of reset_interval
  std::int64_t reset_interval = kDefaultResetInterval;

  agent::AgentConfig resolved_agent() const {
    agent::AgentConfig c = variant_preset(variant);
    agent::apply_overrides(c, agent);
    if (enable_resets) {
      for (std::int64_t s = reset_interval; s < total_env_steps; s += reset_interval) c.reset_steps.push_back(s);
    }
    c.validate();
    return c;
  }

  envs::Overrides resolved_env_overrides() const {
    envs::Overrides o;
    for (auto it = env_overrides.begin(); it != env_overrides.end(); ++it) {
      if (!it.value().is_number()) throw ConfigError("env override '" + it.key() + "' must be a number");
      o[it.key()] = it.value().get<double>();
    }
    if (o.count("action_repeat") == 0) o["action_repeat"] = resolved_agent().action_repeat;
    return o;
  }

  std::string series() const {
    if (!label.empty()) return label;
    return variant_name(variant) + "_utd" + std::to_string(resolved_agent().utd);
  }

  void validate() const {
    if (total_env_steps < 0) throw ConfigError("total_env_steps must be non-negative");
    if (eval_every < 1) throw ConfigError("eval_every must be positive");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be positive");
    if (snapshot_every < 1) throw ConfigError("snapshot_every must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
    if (reset_interval < 1) throw ConfigError("reset_interval must be positive");
    if (enable_resets && agent.contains("reset_steps")) {
      throw ConfigError("give either enable_resets or agent.reset_steps, not both");
    }
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
    resolved_agent();
    const auto env_obj = envs::make_env(env, resolved_env_overrides());
    if (static_cast<int>(resolved_env_overrides().at("action_repeat")) != resolved_agent().action_repeat) {
      throw ConfigError("env action_repeat override disagrees with the agent's action_repeat");
    }
  }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"env", c.env},
                     {"variant", variant_name(c.variant)},
                     {"agent", c.agent},
                     {"env_overrides", c.env_overrides},
                     {"total_env_steps", c.total_env_steps},
                     {"eval_every", c.eval_every},
                     {"eval_episodes", c.eval_episodes},
                     {"eval_at_start", c.eval_at_start},
                     {"snapshot_every", c.snapshot_every},
                     {"checkpoint_every", c.checkpoint_every},
                     {"save_checkpoints", c.save_checkpoints},
                     {"seeds", c.seeds},
                     {"output_dir", c.output_dir},
                     {"label", c.label},
                     {"enable_resets", c.enable_resets},
                     {"reset_interval", c.reset_interval}};
}

/// Reads a config object. Unknown keys are rejected; a run manifest is also
/// accepted, in which case its recorded config is used.
inline ExperimentConfig config_from_json(const nlohmann::json& in) {
  if (!in.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json& j = in.contains("format") && in.contains("config") ? in.at("config") : in;
  ExperimentConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "env") c.env = v.get<std::string>();
      else if (k == "variant") c.variant = parse_variant(v.get<std::string>());
      else if (k == "agent") c.agent = v;
      else if (k == "env_overrides") c.env_overrides = v;
      else if (k == "total_env_steps") c.total_env_steps = v.get<std::int64_t>();
      else if (k == "eval_every") c.eval_every = v.get<std::int64_t>();
      else if (k == "eval_episodes") c.eval_episodes = v.get<int>();
      else if (k == "eval_at_start") c.eval_at_start = v.get<bool>();
      else if (k == "snapshot_every") c.snapshot_every = v.get<std::int64_t>();
      else if (k == "checkpoint_every") c.checkpoint_every = v.get<std::int64_t>();
      else if (k == "save_checkpoints") c.save_checkpoints = v.get<bool>();
      else if (k == "seeds") {
        if (v.is_number_integer()) {
          c.seeds.resize(v.get<std::size_t>());
          std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{0});
        } else {
          c.seeds = v.get<std::vector<std::uint64_t>>();
        }
      } else if (k == "output_dir") c.output_dir = v.get<std::string>();
      else if (k == "label") c.label = v.get<std::string>();
      else if (k == "enable_resets") c.enable_resets = v.get<bool>();
      else if (k == "reset_interval") c.reset_interval = v.get<std::int64_t>();
      else throw ConfigError("unknown experiment setting '" + k + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("experiment setting '" + k + "': " + e.what());
    }
  }
  if (!c.agent.is_object()) throw ConfigError("'agent' must be an object");
  if (!c.env_overrides.is_object()) throw ConfigError("'env_overrides' must be an object");
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace crossq::experiment
