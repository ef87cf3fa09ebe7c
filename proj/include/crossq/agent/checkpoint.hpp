#pragma once

// Checkpoint container: a JSON document (written as CBOR) holding every
// parameter, running statistic, optimizer moment, the temperature, counters,
// RNG states and the replay buffer contents. Floating-point values are
// stored as IEEE doubles, so float and double agents both round-trip exactly.

#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "crossq/agent/agent.hpp"

namespace crossq::agent {

namespace ckpt {

inline constexpr const char* kFormat = "crossq-checkpoint";
inline constexpr int kVersion = 1;

template <typename T>
const char* scalar_name() {
  return std::is_same_v<T, float> ? "float32" : "float64";
}

template <typename T>
nlohmann::json tensor_json(const Tensor<T>& t) {
  std::vector<double> data(t.data(), t.data() + t.size());
  return {{"rows", t.rows()}, {"cols", t.cols()}, {"data", std::move(data)}};
}

template <typename T>
void load_tensor(const nlohmann::json& j, Tensor<T>& t, const std::string& what) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  if (rows != t.rows() || cols != t.cols()) throw StructuralError("checkpoint: shape mismatch for " + what);
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != t.size()) throw StructuralError("checkpoint: size mismatch for " + what);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(data[static_cast<std::size_t>(i)].get<double>());
}

template <typename T>
nlohmann::json network_json(const nn::Mlp<T>& net) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto* p : net.parameter_values()) params.push_back(tensor_json(*p));
  nlohmann::json stats = nlohmann::json::array();
  for (const auto* s : net.running_stats()) stats.push_back(tensor_json(*s));
  return {{"params", params}, {"running", stats}};
}

template <typename T>
void load_network(const nlohmann::json& j, nn::Mlp<T>& net, const std::string& what) {
  auto params = net.parameters();
  const auto& jp = j.at("params");
  if (jp.size() != params.size()) throw StructuralError("checkpoint: parameter count mismatch for " + what);
  for (std::size_t i = 0; i < params.size(); ++i) load_tensor(jp[i], *params[i].value, what);
  auto stats = net.running_stats();
  const auto& js = j.at("running");
  if (js.size() != stats.size()) throw StructuralError("checkpoint: running-stat count mismatch for " + what);
  for (std::size_t i = 0; i < stats.size(); ++i) load_tensor(js[i], *stats[i], what);
  net.clear_cache();
}

template <typename T>
nlohmann::json optimizer_json(const optim::AdamW<T>& opt) {
  nlohmann::json m = nlohmann::json::array();
  nlohmann::json v = nlohmann::json::array();
  for (const auto& t : opt.first_moments()) m.push_back(tensor_json(t));
  for (const auto& t : opt.second_moments()) v.push_back(tensor_json(t));
  return {{"step", opt.step_count()},
          {"rejected", opt.rejected_steps()},
          {"degenerate", opt.degenerate_columns()},
          {"max_norm_deviation", opt.max_norm_deviation()},
          {"m", m},
          {"v", v}};
}

template <typename T>
void load_optimizer(const nlohmann::json& j, optim::AdamW<T>& opt, const std::string& what) {
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  if (j.at("m").size() != m.size() || j.at("v").size() != v.size()) {
    throw StructuralError("checkpoint: optimizer state mismatch for " + what);
  }
  for (std::size_t i = 0; i < m.size(); ++i) load_tensor(j.at("m")[i], m[i], what);
  for (std::size_t i = 0; i < v.size(); ++i) load_tensor(j.at("v")[i], v[i], what);
  opt.restore_counters(j.at("step").get<std::uint64_t>(), j.at("rejected").get<std::size_t>(),
                       j.at("degenerate").get<std::size_t>(), j.at("max_norm_deviation").get<double>());
}

template <typename T>
std::vector<double> widen(const std::vector<T>& v) {
  return std::vector<double>(v.begin(), v.end());
}

template <typename T>
std::vector<T> narrow(const nlohmann::json& j) {
  std::vector<T> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(static_cast<T>(x.get<double>()));
  return out;
}

}  // namespace ckpt

template <typename T>
nlohmann::json Agent<T>::state() const {
  nlohmann::json j;
  j["format"] = ckpt::kFormat;
  j["version"] = ckpt::kVersion;
  j["scalar"] = ckpt::scalar_name<T>();
  j["config"] = cfg_;
  j["state_dim"] = state_dim_;
  j["action_dim"] = action_dim_;
  j["seed"] = seed_;
  j["counters"] = {{"env_steps", env_steps_},         {"critic_updates", critic_updates_},
                   {"actor_updates", actor_updates_}, {"resets_done", resets_done_},
                   {"rejected_updates", rejected_updates_}, {"underfull_skips", underfull_skips_}};
  j["actor"] = ckpt::network_json(actor_);
  j["critics"] = nlohmann::json::array();
  for (const auto& c : critics_) j["critics"].push_back(ckpt::network_json(c));
  j["targets"] = nlohmann::json::array();
  for (const auto& t : targets_) j["targets"].push_back(ckpt::network_json(t));
  j["log_alpha"] = static_cast<double>(log_alpha_(0, 0));
  j["optimizers"] = {{"critic", ckpt::optimizer_json(critic_opt_)},
                     {"actor", ckpt::optimizer_json(actor_opt_)},
                     {"temperature", ckpt::optimizer_json(temperature_opt_)}};
  j["rng"] = {{"sampling", rng_state(sampling_rng_)}, {"noise", rng_state(noise_rng_)}};
  j["buffer"] = {{"capacity", buffer_.capacity()},
                 {"size", buffer_.size()},
                 {"cursor", buffer_.cursor()},
                 {"states", ckpt::widen(buffer_.states())},
                 {"actions", ckpt::widen(buffer_.actions())},
                 {"rewards", ckpt::widen(buffer_.rewards())},
                 {"next_states", ckpt::widen(buffer_.next_states())},
                 {"dones", ckpt::widen(buffer_.dones())}};
  return j;
}

template <typename T>
void Agent<T>::load_state(const nlohmann::json& j) {
  if (j.at("format").get<std::string>() != ckpt::kFormat || j.at("version").get<int>() != ckpt::kVersion) {
    throw ConfigError("not a compatible checkpoint");
  }
  if (j.at("scalar").get<std::string>() != ckpt::scalar_name<T>()) {
    throw ConfigError("checkpoint scalar type differs from this agent's");
  }
  if (j.at("state_dim").get<std::size_t>() != state_dim_ || j.at("action_dim").get<std::size_t>() != action_dim_) {
    throw StructuralError("checkpoint dimensions differ from this agent's");
  }
  cfg_ = j.at("config").get<AgentConfig>();
  cfg_.validate();
  seed_ = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("counters");
  resets_done_ = c.at("resets_done").get<std::uint64_t>();
  build(resets_done_);
  env_steps_ = c.at("env_steps").get<std::uint64_t>();
  critic_updates_ = c.at("critic_updates").get<std::uint64_t>();
  actor_updates_ = c.at("actor_updates").get<std::uint64_t>();
  rejected_updates_ = c.at("rejected_updates").get<std::uint64_t>();
  underfull_skips_ = c.at("underfull_skips").get<std::uint64_t>();

  ckpt::load_network(j.at("actor"), actor_, "actor");
  if (j.at("critics").size() != critics_.size() || j.at("targets").size() != targets_.size()) {
    throw StructuralError("checkpoint: critic count mismatch");
  }
  for (std::size_t i = 0; i < critics_.size(); ++i) ckpt::load_network(j.at("critics")[i], critics_[i], "critic");
  for (std::size_t i = 0; i < targets_.size(); ++i) ckpt::load_network(j.at("targets")[i], targets_[i], "target");
  log_alpha_(0, 0) = static_cast<T>(j.at("log_alpha").get<double>());
  ckpt::load_optimizer(j.at("optimizers").at("critic"), critic_opt_, "critic optimizer");
  ckpt::load_optimizer(j.at("optimizers").at("actor"), actor_opt_, "actor optimizer");
  ckpt::load_optimizer(j.at("optimizers").at("temperature"), temperature_opt_, "temperature optimizer");
  restore_rng(sampling_rng_, j.at("rng").at("sampling").get<std::string>());
  restore_rng(noise_rng_, j.at("rng").at("noise").get<std::string>());

  const auto& b = j.at("buffer");
  buffer_ = ReplayBuffer<T>(b.at("capacity").get<std::size_t>(), state_dim_, action_dim_);
  buffer_.restore(b.at("size").get<std::size_t>(), b.at("cursor").get<std::size_t>(),
                  ckpt::narrow<T>(b.at("states")), ckpt::narrow<T>(b.at("actions")),
                  ckpt::narrow<T>(b.at("rewards")), ckpt::narrow<T>(b.at("next_states")),
                  ckpt::narrow<T>(b.at("dones")));
}

template <typename T>
void save_checkpoint(const Agent<T>& agent, const std::string& path) {
  const std::vector<std::uint8_t> bytes = nlohmann::json::to_cbor(agent.state());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <typename T>
void load_checkpoint(Agent<T>& agent, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingData("cannot read checkpoint '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  agent.load_state(nlohmann::json::from_cbor(bytes));
}

}  // namespace crossq::agent
