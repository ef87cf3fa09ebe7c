#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "crossq/envs/environment.hpp"

namespace crossq::envs {

/// Continuous mountain car. Reaching the goal position is a genuine
/// terminal state worth +100; every substep costs 0.1 a^2.
class MountainCar final : public Environment {
 public:
  struct Params {
    double power = 0.0015;
    double min_position = -1.2;
    double max_position = 0.6;
    double max_speed = 0.07;
    double goal_position = 0.45;
  };

  explicit MountainCar(const Overrides& overrides = {}) : Environment(base_spec()) {
    apply_common_overrides(overrides);
    for (const auto& [key, value] : overrides) {
      if (key == "power") params_.power = value;
      else if (key == "goal_position") params_.goal_position = value;
      else if (key != "dt" && key != "horizon" && key != "action_repeat")
        throw ConfigError("mountain_car: unknown parameter '" + key + "'");
    }
    spec_.return_lower = -0.1 * spec_.horizon * spec_.action_repeat;
    spec_.return_upper = 100.0;
  }

  static EnvSpec base_spec() {
    EnvSpec s;
    s.name = "mountain_car";
    s.state_dim = 2;
    s.action_dim = 1;
    s.dt = 1.0;
    s.horizon = 999;
    s.action_repeat = 2;
    s.reward_id = "mountain_car_goal_bonus";
    return s;
  }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    position_ = std::uniform_real_distribution<double>(-0.6, -0.4)(rng);
    velocity_ = 0.0;
    steps_ = 0;
    return observe();
  }

  std::vector<double> observe() const override { return {position_, velocity_}; }

  void set_state(double position, double velocity) {
    position_ = position;
    velocity_ = velocity;
  }

 protected:
  double substep(std::span<const double> action, bool& terminal) override {
    const double a = clamp_unit(action[0]);
    velocity_ += (a * params_.power - 0.0025 * std::cos(3.0 * position_)) * spec_.dt;
    velocity_ = std::clamp(velocity_, -params_.max_speed, params_.max_speed);
    position_ += velocity_ * spec_.dt;
    position_ = std::clamp(position_, params_.min_position, params_.max_position);
    if (position_ == params_.min_position && velocity_ < 0.0) velocity_ = 0.0;
    double reward = -0.1 * a * a;
    if (position_ >= params_.goal_position) {
      terminal = true;
      reward += 100.0;
    }
    return reward;
  }

 private:
  Params params_;
  double position_ = -0.5;
  double velocity_ = 0.0;
};

}  // namespace crossq::envs
