#pragma once

// Read-only training diagnostics: weight and gradient norms, effective
// learning rate of scale-invariant layers, and dead hidden units.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crossq/agent/agent.hpp"
#include "crossq/nn/mlp.hpp"
#include "crossq/tensor.hpp"

namespace crossq::diagnostics {

inline constexpr double kDeadThreshold = 1e-6;
inline constexpr std::size_t kProbeSize = 256;

/// Sum of the Frobenius norms of every dense weight matrix (biases excluded).
template <typename T>
double weight_norm_summary(const nn::Mlp<T>& net) {
  double total = 0.0;
  for (const auto& b : net.blocks()) total += frobenius_norm(b.dense.weight);
  return total;
}

/// Same sum restricted to weight-normalized layers.
template <typename T>
double constrained_norm_summary(const nn::Mlp<T>& net) {
  double total = 0.0;
  for (const auto& b : net.blocks()) {
    if (b.dense.normalize) total += frobenius_norm(b.dense.weight);
  }
  return total;
}

/// lr / ||W||_F^2 for a layer followed by batch norm; empty for a zero-norm
/// layer.
template <typename T>
std::optional<double> effective_learning_rate(const nn::DenseLayer<T>& layer, double lr) {
  if (!layer.followed_by_bn) throw UsageError("effective learning rate is defined for batch-norm-followed layers");
  const double sq = layer.weight.template cast<double>().squaredNorm();
  if (!(sq > 0.0)) return std::nullopt;
  return lr / sq;
}

/// Fraction of units per hidden block whose post-activation output stays
/// below 1e-6 in magnitude over the whole probe batch. Batch norm runs in
/// train mode on the probe; nothing in the network is modified.
template <typename T>
std::vector<double> dead_fraction(const nn::Mlp<T>& net, const Tensor<T>& probe) {
  if (probe.rows() < 1) throw MissingData("dead_fraction: empty probe batch");
  std::vector<Tensor<T>> hidden;
  net.infer(probe, nn::Mode::train, &hidden);
  std::vector<double> out;
  out.reserve(hidden.size());
  for (const auto& h : hidden) {
    const RowVector<T> peak = h.cwiseAbs().colwise().maxCoeff();
    const auto dead = (peak.array() < static_cast<T>(kDeadThreshold)).count();
    out.push_back(static_cast<double>(dead) / static_cast<double>(h.cols()));
  }
  return out;
}

struct LayerDiag {
  std::string name;  // e.g. "critic0/layer1"
  double weight_norm = 0.0;
  double grad_norm = 0.0;
  std::optional<double> elr;
};

struct DiagSnapshot {
  std::uint64_t env_step = 0;
  std::vector<LayerDiag> layers;
  double critic_norm_sum = 0.0;        // mean over critics of the summed dense norm
  double constrained_norm_sum = 0.0;   // same, weight-normalized layers only
  std::vector<double> critic_dead;     // critic 0, per hidden block
  std::vector<double> actor_dead;      // per hidden block
  double alpha = 0.0;
  double critic_loss = 0.0;
  std::optional<double> actor_loss;

  /// Flattened (scalar name, value) pairs in a fixed order.
  std::vector<std::pair<std::string, double>> records() const {
    std::vector<std::pair<std::string, double>> out;
    out.emplace_back("critic_norm_sum", critic_norm_sum);
    out.emplace_back("constrained_norm_sum", constrained_norm_sum);
    for (const auto& l : layers) {
      out.emplace_back(l.name + "/weight_norm", l.weight_norm);
      out.emplace_back(l.name + "/grad_norm", l.grad_norm);
      if (l.elr) out.emplace_back(l.name + "/elr", *l.elr);
    }
    for (std::size_t i = 0; i < critic_dead.size(); ++i) {
      out.emplace_back("critic0/hidden" + std::to_string(i) + "/dead_fraction", critic_dead[i]);
    }
    for (std::size_t i = 0; i < actor_dead.size(); ++i) {
      out.emplace_back("actor/hidden" + std::to_string(i) + "/dead_fraction", actor_dead[i]);
    }
    out.emplace_back("alpha", alpha);
    out.emplace_back("critic_loss", critic_loss);
    if (actor_loss) out.emplace_back("actor_loss", *actor_loss);
    return out;
  }

  bool all_finite() const {
    for (const auto& [name, v] : records()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

namespace detail {

template <typename T>
void append_layers(const nn::Mlp<T>& net, const std::string& prefix, double lr, std::vector<LayerDiag>& out) {
  const auto& blocks = net.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& d = blocks[i].dense;
    LayerDiag l;
    l.name = prefix + "/layer" + std::to_string(i);
    l.weight_norm = frobenius_norm(d.weight);
    l.grad_norm = frobenius_norm(d.grad_weight);
    if (d.followed_by_bn) l.elr = effective_learning_rate(d, lr);
    out.push_back(std::move(l));
  }
}

}  // namespace detail

/// Snapshot of the agent. The probe batch (up to 256 states, or state-action
/// pairs for the critic) is drawn uniformly from the replay buffer with
/// `probe_rng`; dead fractions are skipped while the buffer is empty.
template <typename T>
DiagSnapshot snapshot(const agent::Agent<T>& ag, std::uint64_t env_step, Rng& probe_rng) {
  DiagSnapshot s;
  s.env_step = env_step;
  const auto& cfg = ag.config();
  for (std::size_t c = 0; c < ag.critics().size(); ++c) {
    detail::append_layers(ag.critics()[c], "critic" + std::to_string(c), cfg.lr_critic, s.layers);
    s.critic_norm_sum += weight_norm_summary(ag.critics()[c]);
    s.constrained_norm_sum += constrained_norm_summary(ag.critics()[c]);
  }
  const auto n_critics = static_cast<double>(ag.critics().size());
  s.critic_norm_sum /= n_critics;
  s.constrained_norm_sum /= n_critics;
  detail::append_layers(ag.actor(), "actor", cfg.lr_actor, s.layers);

  if (ag.buffer().size() > 0) {
    const auto batch = ag.buffer().sample(std::min(kProbeSize, ag.buffer().size()), probe_rng);
    Tensor<T> sa(batch.size(), batch.states.cols() + batch.actions.cols());
    sa << batch.states, batch.actions;
    s.critic_dead = dead_fraction(ag.critics().front(), sa);
    s.actor_dead = dead_fraction(ag.actor(), batch.states);
  }
  s.alpha = static_cast<double>(ag.alpha());
  s.critic_loss = ag.last_critic_loss();
  if (ag.last_actor_stats()) s.actor_loss = ag.last_actor_stats()->actor_loss;
  return s;
}

}  // namespace crossq::diagnostics
