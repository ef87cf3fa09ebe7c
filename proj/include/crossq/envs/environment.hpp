#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "crossq/errors.hpp"

namespace crossq::envs {

struct EnvSpec {
  std::string name;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  double dt = 0.05;
  int horizon = 200;        // agent steps (env_step calls) per episode
  int action_repeat = 2;    // integrator substeps per agent step
  std::string reward_id;
  // Bounds on the undiscounted episode return, used for score normalization.
  double return_lower = 0.0;
  double return_upper = 0.0;

  double normalize_return(double ret) const { return (ret - return_lower) / (return_upper - return_lower); }
};

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool terminal = false;   // genuine absorbing state
  bool truncated = false;  // horizon reached; not terminal
};

using Overrides = std::map<std::string, double>;

class Environment {
 public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }

  /// Draws an initial state from the seed and returns its observation.
  virtual std::vector<double> reset(std::uint64_t seed) = 0;

  /// Applies `action` (each component in [-1, 1]) for `action_repeat`
  /// substeps and sums the substep rewards.
  StepResult step(std::span<const double> action) {
    if (action.size() != spec_.action_dim) {
      throw StructuralError(spec_.name + ": action has " + std::to_string(action.size()) +
                            " components, expected " + std::to_string(spec_.action_dim));
    }
    for (double a : action) {
      if (!std::isfinite(a)) throw NumericalFault(spec_.name + ": non-finite action");
    }
    StepResult out;
    for (int k = 0; k < spec_.action_repeat && !out.terminal; ++k) {
      out.reward += substep(action, out.terminal);
    }
    ++steps_;
    out.observation = observe();
    for (double v : out.observation) {
      if (!std::isfinite(v)) throw NumericalFault(spec_.name + ": dynamics produced a non-finite state");
    }
    out.truncated = !out.terminal && steps_ >= spec_.horizon;
    return out;
  }

  virtual std::vector<double> observe() const = 0;
  int elapsed_steps() const { return steps_; }

 protected:
  explicit Environment(EnvSpec spec) : spec_(std::move(spec)) {}

  /// One integrator substep; returns its reward.
  virtual double substep(std::span<const double> action, bool& terminal) = 0;

  static double clamp_unit(double a) { return a < -1.0 ? -1.0 : (a > 1.0 ? 1.0 : a); }

  void apply_common_overrides(const Overrides& o) {
    for (const auto& [key, value] : o) {
      if (key == "dt") {
        if (!(value > 0.0)) throw ConfigError("dt must be positive");
        spec_.dt = value;
      } else if (key == "horizon") {
        if (!(value >= 1.0)) throw ConfigError("horizon must be at least 1");
        spec_.horizon = static_cast<int>(value);
      } else if (key == "action_repeat") {
        if (!(value >= 1.0)) throw ConfigError("action_repeat must be at least 1");
        spec_.action_repeat = static_cast<int>(value);
      }
    }
  }

  EnvSpec spec_;
  int steps_ = 0;
};

}  // namespace crossq::envs
