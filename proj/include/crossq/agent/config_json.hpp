#pragma once

#include <string>

#include <json.hpp>

#include "crossq/agent/config.hpp"

namespace crossq::agent {

inline void to_json(nlohmann::json& j, const AgentConfig& c) {
  j = nlohmann::json{
      {"utd", c.utd},
      {"policy_delay", c.policy_delay},
      {"use_wn", c.use_wn},
      {"use_target_net", c.use_target_net},
      {"use_batch_norm", c.use_batch_norm},
      {"tau", c.tau},
      {"discount", c.discount},
      {"batch_size", c.batch_size},
      {"critic_hidden", c.critic_hidden},
      {"actor_hidden", c.actor_hidden},
      {"lr_critic", c.lr_critic},
      {"lr_actor", c.lr_actor},
      {"lr_temperature", c.lr_temperature},
      {"initial_temperature", c.initial_temperature},
      {"target_entropy", c.target_entropy ? nlohmann::json(*c.target_entropy) : nlohmann::json(nullptr)},
      {"warmup", c.warmup},
      {"n_critics", c.n_critics},
      {"action_repeat", c.action_repeat},
      {"bn_momentum", c.bn_momentum},
      {"bn_eps", c.bn_eps},
      {"weight_decay_unconstrained", c.weight_decay_unconstrained},
      {"soft_l2_scale", c.soft_l2_scale},
      {"reset_steps", c.reset_steps},
      {"buffer_capacity", c.buffer_capacity},
      {"entropy_in_target", c.entropy_in_target},
      {"log_std_min", c.log_std_min},
      {"log_std_max", c.log_std_max},
  };
}

/// Applies every key present in `j` on top of `c`; unknown keys are an error.
inline void apply_overrides(AgentConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("agent overrides must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const auto& v = it.value();
    try {
      if (k == "utd") c.utd = v.get<int>();
      else if (k == "policy_delay") c.policy_delay = v.get<int>();
      else if (k == "use_wn") c.use_wn = v.get<bool>();
      else if (k == "use_target_net") c.use_target_net = v.get<bool>();
      else if (k == "use_batch_norm") c.use_batch_norm = v.get<bool>();
      else if (k == "tau") c.tau = v.get<double>();
      else if (k == "discount") c.discount = v.get<double>();
      else if (k == "batch_size") c.batch_size = v.get<int>();
      else if (k == "critic_hidden") c.critic_hidden = v.get<std::vector<int>>();
      else if (k == "actor_hidden") c.actor_hidden = v.get<std::vector<int>>();
      else if (k == "lr_critic") c.lr_critic = v.get<double>();
      else if (k == "lr_actor") c.lr_actor = v.get<double>();
      else if (k == "lr_temperature") c.lr_temperature = v.get<double>();
      else if (k == "initial_temperature") c.initial_temperature = v.get<double>();
      else if (k == "target_entropy") c.target_entropy = v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
      else if (k == "warmup") c.warmup = v.get<int>();
      else if (k == "n_critics") c.n_critics = v.get<int>();
      else if (k == "action_repeat") c.action_repeat = v.get<int>();
      else if (k == "bn_momentum") c.bn_momentum = v.get<double>();
      else if (k == "bn_eps") c.bn_eps = v.get<double>();
      else if (k == "weight_decay_unconstrained") c.weight_decay_unconstrained = v.get<double>();
      else if (k == "soft_l2_scale") c.soft_l2_scale = v.get<double>();
      else if (k == "reset_steps") c.reset_steps = v.get<std::vector<std::int64_t>>();
      else if (k == "buffer_capacity") c.buffer_capacity = v.get<std::size_t>();
      else if (k == "entropy_in_target") c.entropy_in_target = v.get<bool>();
      else if (k == "log_std_min") c.log_std_min = v.get<double>();
      else if (k == "log_std_max") c.log_std_max = v.get<double>();
      else throw ConfigError("unknown agent setting '" + k + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("agent setting '" + k + "': " + e.what());
    }
  }
}

inline void from_json(const nlohmann::json& j, AgentConfig& c) {
  c = AgentConfig{};
  apply_overrides(c, j);
}

}  // namespace crossq::agent
