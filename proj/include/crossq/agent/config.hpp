#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "crossq/errors.hpp"

namespace crossq::agent {

/// Hyperparameters and ablation switches. Defaults are the CrossQ + WN
/// column of the reference hyperparameter table.
struct AgentConfig {
  int utd = 1;
  int policy_delay = 3;
  bool use_wn = true;
  bool use_target_net = true;
  bool use_batch_norm = true;
  double tau = 0.005;
  double discount = 0.99;
  int batch_size = 256;
  std::vector<int> critic_hidden = {512, 512};
  std::vector<int> actor_hidden = {256, 256};
  double lr_critic = 3e-4;
  double lr_actor = 3e-4;
  double lr_temperature = 1e-4;
  double initial_temperature = 1.0;
  std::optional<double> target_entropy;  // unset: -|A| / 2
  int warmup = 5000;
  int n_critics = 2;
  int action_repeat = 2;
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
  double weight_decay_unconstrained = 1e-2;
  double soft_l2_scale = 0.0;
  std::vector<std::int64_t> reset_steps;
  std::size_t buffer_capacity = 1'000'000;
  bool entropy_in_target = true;
  double log_std_min = -20.0;
  double log_std_max = 2.0;

  double resolved_target_entropy(std::size_t action_dim) const {
    return target_entropy.value_or(-static_cast<double>(action_dim) / 2.0);
  }

  void validate() const {
    if (utd < 1) throw ConfigError("utd must be a positive integer");
    if (policy_delay < 1) throw ConfigError("policy_delay must be a positive integer");
    if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in [0, 1]");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in [0, 1]");
    if (batch_size < 1) throw ConfigError("batch_size must be positive");
    if (n_critics < 1) throw ConfigError("n_critics must be at least 1");
    if (warmup < 0) throw ConfigError("warmup must be non-negative");
    if (!(lr_critic > 0 && lr_actor > 0 && lr_temperature > 0)) throw ConfigError("learning rates must be positive");
    if (!(initial_temperature > 0.0)) throw ConfigError("initial_temperature must be positive");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw ConfigError("bn_momentum must lie in [0, 1)");
    if (!(bn_eps >= 0.0)) throw ConfigError("bn_eps must be non-negative");
    if (weight_decay_unconstrained < 0.0) throw ConfigError("weight decay must be non-negative");
    if (soft_l2_scale < 0.0) throw ConfigError("soft_l2_scale must be non-negative");
    if (buffer_capacity < 1) throw ConfigError("buffer_capacity must be positive");
    if (action_repeat < 1) throw ConfigError("action_repeat must be positive");
    for (int w : critic_hidden) if (w < 1) throw ConfigError("critic widths must be positive");
    for (int w : actor_hidden) if (w < 1) throw ConfigError("actor widths must be positive");
  }
};

}  // namespace crossq::agent
