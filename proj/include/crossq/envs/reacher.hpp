#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "crossq/envs/environment.hpp"

namespace crossq::envs {

/// 2-D point mass pushed towards a goal on the unit circle.
/// Observation (x, y, vx, vy, goal_x, goal_y); reward is minus the distance
/// to the goal per substep. The mass is confined to a square arena.
class PointMassReacher final : public Environment {
 public:
  struct Params {
    double force_scale = 1.0;
    double damping = 0.5;
    double max_speed = 2.0;
    double arena = 1.5;
  };

  explicit PointMassReacher(const Overrides& overrides = {}) : Environment(base_spec()) {
    apply_common_overrides(overrides);
    for (const auto& [key, value] : overrides) {
      if (key == "force_scale") params_.force_scale = value;
      else if (key == "damping") params_.damping = value;
      else if (key == "max_speed") params_.max_speed = value;
      else if (key == "arena") params_.arena = value;
      else if (key != "dt" && key != "horizon" && key != "action_repeat")
        throw ConfigError("reacher: unknown parameter '" + key + "'");
    }
    const double far = std::sqrt(2.0) * params_.arena + 1.0;
    spec_.return_lower = -far * spec_.horizon * spec_.action_repeat;
    spec_.return_upper = 0.0;
  }

  static EnvSpec base_spec() {
    EnvSpec s;
    s.name = "reacher";
    s.state_dim = 6;
    s.action_dim = 2;
    s.dt = 0.05;
    s.horizon = 200;
    s.action_repeat = 2;
    s.reward_id = "reacher_goal_distance";
    return s;
  }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    const double angle = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
    pos_[0] = pos_[1] = 0.0;
    vel_[0] = vel_[1] = 0.0;
    goal_[0] = std::cos(angle);
    goal_[1] = std::sin(angle);
    steps_ = 0;
    return observe();
  }

  std::vector<double> observe() const override {
    return {pos_[0], pos_[1], vel_[0], vel_[1], goal_[0], goal_[1]};
  }

  double goal_distance() const { return std::hypot(pos_[0] - goal_[0], pos_[1] - goal_[1]); }

 protected:
  double substep(std::span<const double> action, bool&) override {
    const double reward = -goal_distance();
    for (int i = 0; i < 2; ++i) {
      const double force = params_.force_scale * clamp_unit(action[static_cast<std::size_t>(i)]);
      vel_[i] += (force - params_.damping * vel_[i]) * spec_.dt;
      vel_[i] = std::clamp(vel_[i], -params_.max_speed, params_.max_speed);
      pos_[i] += vel_[i] * spec_.dt;
      if (pos_[i] > params_.arena || pos_[i] < -params_.arena) {
        pos_[i] = std::clamp(pos_[i], -params_.arena, params_.arena);
        vel_[i] = 0.0;
      }
    }
    return reward;
  }

 private:
  Params params_;
  double pos_[2] = {0.0, 0.0};
  double vel_[2] = {0.0, 0.0};
  double goal_[2] = {1.0, 0.0};
};

}  // namespace crossq::envs
