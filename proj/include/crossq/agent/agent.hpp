#pragma once

// Off-policy actor-critic agent covering SAC, CrossQ and CrossQ + WN.
//
// The critic update evaluates (s, a) and (s', a') as one stacked batch so
// batch-norm statistics are shared across both distributions. A target
// critic, when enabled, sees the same stack in train mode but its stored
// running statistics only move through Polyak averaging.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossq/agent/config.hpp"
#include "crossq/agent/config_json.hpp"
#include "crossq/agent/policy.hpp"
#include "crossq/agent/polyak.hpp"
#include "crossq/agent/replay_buffer.hpp"
#include "crossq/nn/mlp.hpp"
#include "crossq/optim/adamw.hpp"
#include "crossq/random.hpp"

namespace crossq::agent {

struct ActorStats {
  double actor_loss = 0.0;
  double temperature_loss = 0.0;
  double alpha = 0.0;        // after the temperature step
  double mean_log_prob = 0.0;
};

struct TrainStats {
  int critic_updates = 0;
  int actor_updates = 0;
  double critic_loss = 0.0;  // last critic update of this step
  std::optional<ActorStats> actor;
  bool skipped_underfull = false;
};

/// Optimizer parameter groups for one network family:
///   - weight-normalized hidden weights: no decay, projected after each step
///   - other hidden weights: no decay
///   - output layer weight and bias: `weight_decay_unconstrained`
///   - hidden biases and batch-norm affine: no decay
/// The soft-L2 ablation term applies to all hidden weights.
template <typename T>
std::vector<optim::ParamGroup> make_param_groups(std::span<const nn::ParamRef<T>> params, double lr,
                                                 const AgentConfig& cfg) {
  optim::ParamGroup constrained{{lr, 0.0, cfg.soft_l2_scale, true, 1.0}, {}};
  optim::ParamGroup hidden_weights{{lr, 0.0, cfg.soft_l2_scale, false, 1.0}, {}};
  optim::ParamGroup output{{lr, cfg.weight_decay_unconstrained, 0.0, false, 1.0}, {}};
  optim::ParamGroup rest{{lr, 0.0, 0.0, false, 1.0}, {}};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (p.output_layer) {
      output.members.push_back(i);
    } else if (p.kind == nn::ParamKind::weight) {
      (p.unit_columns ? constrained : hidden_weights).members.push_back(i);
    } else {
      rest.members.push_back(i);
    }
  }
  std::vector<optim::ParamGroup> groups;
  for (auto* g : {&constrained, &hidden_weights, &output, &rest}) {
    if (!g->members.empty()) groups.push_back(std::move(*g));
  }
  return groups;
}

template <typename T>
class Agent {
 public:
  Agent(AgentConfig cfg, std::size_t state_dim, std::size_t action_dim, std::uint64_t seed)
      : cfg_(std::move(cfg)),
        state_dim_(state_dim),
        action_dim_(action_dim),
        seed_(seed),
        buffer_(cfg_.buffer_capacity, state_dim, action_dim),
        sampling_rng_(make_rng(seed, Stream::sampling)),
        noise_rng_(make_rng(seed, Stream::action_noise)) {
    cfg_.validate();
    if (state_dim == 0 || action_dim == 0) throw StructuralError("agent needs positive state and action dimensions");
    build(0);
  }

  // --- acting -------------------------------------------------------------

  /// Exploration (stochastic) or greedy action for one state. During the
  /// first `warmup` environment steps exploration actions are uniform on
  /// [-1, 1]^m. Actor batch norm uses running statistics.
  std::vector<double> select_action(std::span<const double> state, bool stochastic) {
    if (state.size() != state_dim_) throw StructuralError("select_action: state dimension mismatch");
    for (double v : state) {
      if (!std::isfinite(v)) throw NumericalFault("select_action: non-finite state");
    }
    std::vector<double> action(action_dim_);
    if (stochastic && env_steps_ < static_cast<std::uint64_t>(cfg_.warmup)) {
      std::uniform_real_distribution<double> uni(-1.0, 1.0);
      for (auto& a : action) a = uni(noise_rng_);
      return action;
    }
    const Tensor<T> head = actor_.infer(row_tensor<T>(state), nn::Mode::eval);
    const auto m = static_cast<Index>(action_dim_);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index i = 0; i < m; ++i) {
      double u = static_cast<double>(head(0, i));
      if (stochastic) {
        const double log_std = std::clamp(static_cast<double>(head(0, m + i)), cfg_.log_std_min, cfg_.log_std_max);
        u += std::exp(log_std) * gauss(noise_rng_);
      }
      action[static_cast<std::size_t>(i)] = std::clamp(std::tanh(u), -kActionBound, kActionBound);
    }
    return action;
  }

  // --- learning -----------------------------------------------------------

  /// Stores a transition, advances the environment-step counter and fires a
  /// scheduled reset when the new step count is listed in `reset_steps`.
  void observe(const Transition<T>& t) {
    buffer_.add(t);
    ++env_steps_;
    if (std::find(cfg_.reset_steps.begin(), cfg_.reset_steps.end(), static_cast<std::int64_t>(env_steps_)) !=
        cfg_.reset_steps.end()) {
      reset_agent();
    }
  }

  /// `utd` critic updates for the most recently stored transition; every
  /// `policy_delay`-th critic update is followed by an actor/temperature
  /// update. No-op until warmup is over and a full batch is available.
  TrainStats train_step() {
    TrainStats stats;
    if (env_steps_ < static_cast<std::uint64_t>(cfg_.warmup)) return stats;
    if (buffer_.size() < static_cast<std::size_t>(cfg_.batch_size)) {
      stats.skipped_underfull = true;
      ++underfull_skips_;
      return stats;
    }
    for (int k = 0; k < cfg_.utd; ++k) {
      const Batch<T> batch = buffer_.sample(static_cast<std::size_t>(cfg_.batch_size), sampling_rng_);
      stats.critic_loss = critic_update(batch);
      ++stats.critic_updates;
      if (critic_updates_ % static_cast<std::uint64_t>(cfg_.policy_delay) == 0) {
        stats.actor = actor_and_temperature_update(batch);
        ++stats.actor_updates;
      }
    }
    return stats;
  }

  TrainStats step(const Transition<T>& t) {
    observe(t);
    return train_step();
  }

  /// One critic update on `batch`; returns the summed per-critic MSE.
  double critic_update(const Batch<T>& batch) {
    const Index b = batch.size();
    const auto sd = static_cast<Index>(state_dim_);
    const auto m = static_cast<Index>(action_dim_);
    if (b < 1) throw UsageError("critic_update: empty batch");

    const Tensor<T> next_head = actor_.infer(batch.next_states, nn::Mode::eval);
    const PolicySample<T> next = sample_squashed(next_head, gaussian(b, m), cfg_.log_std_min, cfg_.log_std_max);

    Tensor<T> joint(2 * b, sd + m);
    joint.topLeftCorner(b, sd) = batch.states;
    joint.topRightCorner(b, m) = batch.actions;
    joint.bottomLeftCorner(b, sd) = batch.next_states;
    joint.bottomRightCorner(b, m) = next.action;

    std::vector<Tensor<T>> q(critics_.size());
    for (std::size_t i = 0; i < critics_.size(); ++i) {
      q[i] = critics_[i].forward(joint, nn::Mode::train, nn::StatUpdate::apply);
    }
    Tensor<T> min_next;
    for (std::size_t i = 0; i < critics_.size(); ++i) {
      Tensor<T> qn = cfg_.use_target_net ? Tensor<T>(targets_[i].infer(joint, nn::Mode::train).bottomRows(b))
                                         : Tensor<T>(q[i].bottomRows(b));
      min_next = i == 0 ? qn : Tensor<T>(min_next.cwiseMin(qn));
    }
    const Tensor<T> log_prob_next =
        cfg_.entropy_in_target ? next.log_prob : Tensor<T>(Tensor<T>::Zero(b, 1));
    const Tensor<T> y = compute_td_target(batch.rewards, batch.dones, min_next, log_prob_next, alpha(),
                                          static_cast<T>(cfg_.discount));

    double loss = 0.0;
    for (std::size_t i = 0; i < critics_.size(); ++i) {
      const Tensor<T> diff = q[i].topRows(b) - y;
      loss += static_cast<double>(diff.squaredNorm()) / static_cast<double>(b);
      Tensor<T> upstream = Tensor<T>::Zero(2 * b, 1);
      upstream.topRows(b) = diff * (T(2) / static_cast<T>(b));
      critics_[i].backward(upstream);
    }
    if (!std::isfinite(loss)) throw NumericalFault("critic loss is not finite");
    last_critic_report_ = critic_opt_.step(critic_params_view());
    if (!last_critic_report_.accepted) ++rejected_updates_;
    if (cfg_.use_target_net) {
      for (std::size_t i = 0; i < critics_.size(); ++i) {
        polyak_update(targets_[i], critics_[i], static_cast<T>(cfg_.tau));
      }
    }
    ++critic_updates_;
    last_critic_loss_ = loss;
    return loss;
  }

  /// Reparameterized actor step against min_i Q_i (critics in eval mode),
  /// followed by one temperature step on log(alpha).
  ActorStats actor_and_temperature_update(const Batch<T>& batch) {
    const Index b = batch.size();
    const auto sd = static_cast<Index>(state_dim_);
    const auto m = static_cast<Index>(action_dim_);
    const T a_coef = alpha();
    const T inv_b = T(1) / static_cast<T>(b);

    const Tensor<T> head = actor_.forward(batch.states, nn::Mode::train, nn::StatUpdate::apply);
    const PolicySample<T> ps = sample_squashed(head, gaussian(b, m), cfg_.log_std_min, cfg_.log_std_max);

    Tensor<T> x(b, sd + m);
    x.leftCols(sd) = batch.states;
    x.rightCols(m) = ps.action;
    std::vector<Tensor<T>> q(critics_.size());
    for (std::size_t i = 0; i < critics_.size(); ++i) q[i] = critics_[i].forward(x, nn::Mode::eval);
    Tensor<T> min_q = q[0];
    std::vector<std::size_t> argmin(static_cast<std::size_t>(b), 0);
    for (std::size_t i = 1; i < critics_.size(); ++i) {
      for (Index r = 0; r < b; ++r) {
        if (q[i](r, 0) < min_q(r, 0)) {
          min_q(r, 0) = q[i](r, 0);
          argmin[static_cast<std::size_t>(r)] = i;
        }
      }
    }

    ActorStats stats;
    stats.actor_loss = static_cast<double>((a_coef * ps.log_prob - min_q).mean());
    stats.mean_log_prob = static_cast<double>(ps.log_prob.mean());
    if (!std::isfinite(stats.actor_loss)) throw NumericalFault("actor loss is not finite");

    Tensor<T> d_action = Tensor<T>::Zero(b, m);
    for (std::size_t i = 0; i < critics_.size(); ++i) {
      Tensor<T> up = Tensor<T>::Zero(b, 1);
      for (Index r = 0; r < b; ++r) {
        if (argmin[static_cast<std::size_t>(r)] == i) up(r, 0) = -inv_b;
      }
      d_action += critics_[i].backward(up, /*param_grads=*/false).rightCols(m);
    }

    const auto t = ps.action.array();
    const auto one_minus = T(1) - t.square();
    const Tensor<T> d_pre = d_action.array() * one_minus +
                            (a_coef * inv_b) * (T(2) * t * one_minus / (one_minus + static_cast<T>(kTanhGuard)));
    Tensor<T> d_head(b, 2 * m);
    d_head.leftCols(m) = d_pre;
    d_head.rightCols(m) = ((d_pre.array() * ps.log_std.array().exp() * ps.noise.array()) - a_coef * inv_b) *
                          ps.clamp_mask.array();
    actor_.backward(d_head);
    const auto actor_report = actor_opt_.step(actor_params_view());
    if (!actor_report.accepted) ++rejected_updates_;

    const double target_entropy = cfg_.resolved_target_entropy(action_dim_);
    const double gap = stats.mean_log_prob + target_entropy;
    stats.temperature_loss = -static_cast<double>(log_alpha_(0, 0)) * gap;
    log_alpha_grad_(0, 0) = static_cast<T>(-gap);
    const auto temp_report = temperature_opt_.step(temperature_params_view());
    if (!temp_report.accepted) ++rejected_updates_;
    stats.alpha = static_cast<double>(alpha());
    ++actor_updates_;
    last_actor_ = stats;
    return stats;
  }

  /// Re-initializes networks, targets, running statistics, temperature and
  /// optimizer state from a fresh init stream. The replay buffer is kept.
  void reset_agent() {
    ++resets_done_;
    build(resets_done_);
  }

  // --- accessors ----------------------------------------------------------

  T alpha() const { return std::exp(log_alpha_(0, 0)); }
  T log_alpha() const { return log_alpha_(0, 0); }
  const AgentConfig& config() const { return cfg_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::uint64_t seed() const { return seed_; }

  nn::Mlp<T>& actor() { return actor_; }
  const nn::Mlp<T>& actor() const { return actor_; }
  std::vector<nn::Mlp<T>>& critics() { return critics_; }
  const std::vector<nn::Mlp<T>>& critics() const { return critics_; }
  std::vector<nn::Mlp<T>>& targets() { return targets_; }
  const std::vector<nn::Mlp<T>>& targets() const { return targets_; }
  ReplayBuffer<T>& buffer() { return buffer_; }
  const ReplayBuffer<T>& buffer() const { return buffer_; }
  const optim::AdamW<T>& critic_optimizer() const { return critic_opt_; }
  const optim::AdamW<T>& actor_optimizer() const { return actor_opt_; }
  const optim::AdamW<T>& temperature_optimizer() const { return temperature_opt_; }
  const optim::StepReport& last_critic_report() const { return last_critic_report_; }

  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t critic_updates() const { return critic_updates_; }
  std::uint64_t actor_updates() const { return actor_updates_; }
  std::uint64_t resets_done() const { return resets_done_; }
  std::uint64_t rejected_updates() const { return rejected_updates_; }
  std::uint64_t underfull_skips() const { return underfull_skips_; }
  double last_critic_loss() const { return last_critic_loss_; }
  const std::optional<ActorStats>& last_actor_stats() const { return last_actor_; }

  /// Worst post-projection column-norm deviation over every optimizer step
  /// of the current actor/critic optimizers.
  double max_projection_deviation() const {
    return std::max(critic_opt_.max_norm_deviation(), actor_opt_.max_norm_deviation());
  }

  std::vector<nn::ParamRef<T>> critic_parameters() {
    std::vector<nn::ParamRef<T>> out;
    for (auto& c : critics_) {
      auto p = c.parameters();
      out.insert(out.end(), p.begin(), p.end());
    }
    return out;
  }

  // --- checkpointing ------------------------------------------------------

  nlohmann::json state() const;
  void load_state(const nlohmann::json& j);

 private:
  static constexpr double kActionBound = 1.0 - 1e-6;

  void build(std::uint64_t init_index) {
    Rng init = make_rng(seed_, Stream::init, init_index);
    const auto to_index = [](const std::vector<int>& v) { return std::vector<Index>(v.begin(), v.end()); };

    nn::NetworkSpec actor_spec;
    actor_spec.input_dim = static_cast<Index>(state_dim_);
    actor_spec.hidden = to_index(cfg_.actor_hidden);
    actor_spec.output_dim = static_cast<Index>(2 * action_dim_);
    actor_spec.batch_norm = cfg_.use_batch_norm;
    actor_spec.weight_norm = cfg_.use_wn;
    actor_spec.bn_momentum = cfg_.bn_momentum;
    actor_spec.bn_eps = cfg_.bn_eps;
    actor_ = nn::Mlp<T>(actor_spec, init);

    nn::NetworkSpec critic_spec = actor_spec;
    critic_spec.input_dim = static_cast<Index>(state_dim_ + action_dim_);
    critic_spec.hidden = to_index(cfg_.critic_hidden);
    critic_spec.output_dim = 1;
    critics_.clear();
    targets_.clear();
    for (int i = 0; i < cfg_.n_critics; ++i) critics_.emplace_back(critic_spec, init);
    if (cfg_.use_target_net) targets_ = critics_;

    log_alpha_ = Tensor<T>::Constant(1, 1, static_cast<T>(std::log(cfg_.initial_temperature)));
    log_alpha_grad_ = Tensor<T>::Zero(1, 1);

    const auto cp = critic_params_view();
    critic_opt_ = optim::AdamW<T>(make_param_groups<T>(cp, cfg_.lr_critic, cfg_), cp);
    const auto ap = actor_params_view();
    actor_opt_ = optim::AdamW<T>(make_param_groups<T>(ap, cfg_.lr_actor, cfg_), ap);
    const auto tp = temperature_params_view();
    temperature_opt_ = optim::AdamW<T>({optim::ParamGroup{{cfg_.lr_temperature, 0.0, 0.0, false, 1.0}, {0}}}, tp);
    last_critic_report_ = {};
  }

  std::vector<nn::ParamRef<T>> critic_params_view() { return critic_parameters(); }
  std::vector<nn::ParamRef<T>> actor_params_view() { return actor_.parameters(); }
  std::vector<nn::ParamRef<T>> temperature_params_view() {
    return {nn::ParamRef<T>{&log_alpha_, &log_alpha_grad_, nn::ParamKind::scalar, 0, false, false}};
  }

  Tensor<T> gaussian(Index rows, Index cols) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Tensor<T> n(rows, cols);
    for (Index i = 0; i < n.size(); ++i) n.data()[i] = static_cast<T>(gauss(sampling_rng_));
    return n;
  }

  AgentConfig cfg_;
  std::size_t state_dim_;
  std::size_t action_dim_;
  std::uint64_t seed_;

  nn::Mlp<T> actor_;
  std::vector<nn::Mlp<T>> critics_;
  std::vector<nn::Mlp<T>> targets_;
  Tensor<T> log_alpha_;
  Tensor<T> log_alpha_grad_;

  optim::AdamW<T> critic_opt_;
  optim::AdamW<T> actor_opt_;
  optim::AdamW<T> temperature_opt_;
  optim::StepReport last_critic_report_;

  ReplayBuffer<T> buffer_;
  Rng sampling_rng_;
  Rng noise_rng_;

  std::uint64_t env_steps_ = 0;
  std::uint64_t critic_updates_ = 0;
  std::uint64_t actor_updates_ = 0;
  std::uint64_t resets_done_ = 0;
  std::uint64_t rejected_updates_ = 0;
  std::uint64_t underfull_skips_ = 0;
  double last_critic_loss_ = 0.0;
  std::optional<ActorStats> last_actor_;
};

}  // namespace crossq::agent

#include "crossq/agent/checkpoint.hpp"
