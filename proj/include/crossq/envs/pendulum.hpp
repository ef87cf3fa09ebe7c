#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "crossq/envs/environment.hpp"

namespace crossq::envs {

/// Pendulum swing-up. theta = 0 is upright. Observation (cos, sin, theta_dot),
/// one action scaled to a torque of at most `max_torque`. Substep cost is
/// theta^2 + 0.1 theta_dot^2 + 0.001 a^2 with a the unit-range action.
class Pendulum final : public Environment {
 public:
  struct Params {
    double gravity = 10.0;
    double mass = 1.0;
    double length = 1.0;
    double max_speed = 8.0;
    double max_torque = 2.0;
  };

  explicit Pendulum(const Overrides& overrides = {}) : Environment(base_spec()) {
    apply_common_overrides(overrides);
    for (const auto& [key, value] : overrides) {
      if (key == "gravity") params_.gravity = value;
      else if (key == "mass") params_.mass = value;
      else if (key == "length") params_.length = value;
      else if (key == "max_speed") params_.max_speed = value;
      else if (key == "max_torque") params_.max_torque = value;
      else if (key != "dt" && key != "horizon" && key != "action_repeat")
        throw ConfigError("pendulum: unknown parameter '" + key + "'");
    }
    const double worst = std::numbers::pi * std::numbers::pi + 0.1 * params_.max_speed * params_.max_speed + 0.001;
    spec_.return_lower = -worst * spec_.horizon * spec_.action_repeat;
    spec_.return_upper = 0.0;
  }

  static EnvSpec base_spec() {
    EnvSpec s;
    s.name = "pendulum";
    s.state_dim = 3;
    s.action_dim = 1;
    s.dt = 0.05;
    s.horizon = 200;
    s.action_repeat = 2;
    s.reward_id = "pendulum_quadratic_cost";
    return s;
  }

  std::vector<double> reset(std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    theta_ = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
    theta_dot_ = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    steps_ = 0;
    return observe();
  }

  std::vector<double> observe() const override { return {std::cos(theta_), std::sin(theta_), theta_dot_}; }

  void set_state(double theta, double theta_dot) {
    theta_ = theta;
    theta_dot_ = theta_dot;
  }
  double theta() const { return theta_; }
  double theta_dot() const { return theta_dot_; }
  const Params& params() const { return params_; }

  /// Gravity term: theta_ddot = gravity_gain * sin(theta) + torque_gain * u.
  double gravity_gain() const { return 3.0 * params_.gravity / (2.0 * params_.length); }
  double torque_gain() const { return 3.0 / (params_.mass * params_.length * params_.length); }

  static double angle_normalize(double x) {
    const double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(x + std::numbers::pi, two_pi);
    if (r < 0.0) r += two_pi;
    return r - std::numbers::pi;
  }

 protected:
  double substep(std::span<const double> action, bool&) override {
    const double a = clamp_unit(action[0]);
    const double u = params_.max_torque * a;
    const double th = angle_normalize(theta_);
    const double cost = th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * a * a;
    theta_dot_ += (gravity_gain() * std::sin(theta_) + torque_gain() * u) * spec_.dt;
    theta_dot_ = std::clamp(theta_dot_, -params_.max_speed, params_.max_speed);
    theta_ += theta_dot_ * spec_.dt;
    return -cost;
  }

 private:
  Params params_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

/// Scripted swing-up: pump energy towards the upright level, then hold with
/// a PD law near the top. Returns a unit-range action.
inline double pendulum_energy_controller(const Pendulum& env) {
  const double k = env.gravity_gain();
  const double th = Pendulum::angle_normalize(env.theta());
  const double w = env.theta_dot();
  const double max_torque = env.params().max_torque;
  double torque;
  const double energy = 0.5 * w * w + k * std::cos(th);
  if (std::abs(th) < 0.5 && std::abs(energy - k) < 0.25 * k) {
    torque = -(40.0 * th + 8.0 * w) / env.torque_gain();
  } else {
    const double dir = w == 0.0 ? 1.0 : (w > 0.0 ? 1.0 : -1.0);
    torque = dir * max_torque * std::clamp((k - energy) / (0.1 * k), -1.0, 1.0);
  }
  return std::clamp(torque / max_torque, -1.0, 1.0);
}

}  // namespace crossq::envs
