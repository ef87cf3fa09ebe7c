#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "crossq/envs/mountain_car.hpp"
#include "crossq/envs/pendulum.hpp"
#include "crossq/envs/reacher.hpp"

namespace crossq::envs {

using EnvFactory = std::function<std::unique_ptr<Environment>(const Overrides&)>;

inline const std::map<std::string, EnvFactory>& registry() {
  static const std::map<std::string, EnvFactory> r = {
      {"pendulum", [](const Overrides& o) { return std::make_unique<Pendulum>(o); }},
      {"reacher", [](const Overrides& o) { return std::make_unique<PointMassReacher>(o); }},
      {"mountain_car", [](const Overrides& o) { return std::make_unique<MountainCar>(o); }},
  };
  return r;
}

inline std::vector<std::string> env_names() {
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

inline std::unique_ptr<Environment> make_env(const std::string& name, const Overrides& overrides = {}) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown environment '" + name + "'");
  return it->second(overrides);
}

}  // namespace crossq::envs
