#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "crossq/agent/agent.hpp"
#include "helpers.hpp"

using crossq::Index;
using crossq::Tensor;
using namespace crossq::agent;

namespace {

AgentConfig small_config() {
  AgentConfig c;
  c.critic_hidden = {16, 16};
  c.actor_hidden = {8, 8};
  c.batch_size = 8;
  c.warmup = 0;
  c.buffer_capacity = 1000;
  return c;
}

Transition<double> random_transition(crossq::Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  return {{g(rng), g(rng), g(rng)}, {u(rng)}, g(rng), {g(rng), g(rng), g(rng)}, false};
}

void fill(Agent<double>& agent, int n, std::uint64_t seed) {
  crossq::Rng rng(seed);
  for (int i = 0; i < n; ++i) agent.observe(random_transition(rng));
}

bool same_parameters(const crossq::nn::Mlp<double>& a, const crossq::nn::Mlp<double>& b) {
  const auto pa = a.parameter_values();
  const auto pb = b.parameter_values();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (*pa[i] != *pb[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Agent, UpdateCountsWithPolicyDelay) {
  auto cfg = small_config();
  cfg.batch_size = 1;
  Agent<double> agent(cfg, 3, 1, 0);
  crossq::Rng rng(1);
  for (int i = 0; i < 3; ++i) agent.step(random_transition(rng));
  EXPECT_EQ(agent.critic_updates(), 3u);
  EXPECT_EQ(agent.actor_updates(), 1u);
}

TEST(Agent, UpdateCountsScaleWithUtd) {
  auto cfg = small_config();
  cfg.utd = 5;
  Agent<double> agent(cfg, 3, 1, 0);
  fill(agent, 8, 2);
  crossq::Rng rng(3);
  for (int n = 1; n <= 6; ++n) {
    const auto stats = agent.step(random_transition(rng));
    EXPECT_EQ(stats.critic_updates, 5);
    EXPECT_EQ(agent.critic_updates(), 5u * static_cast<unsigned>(n));
  }
  EXPECT_EQ(agent.actor_updates(), 10u);
}

TEST(Agent, UnderfullBufferIsCountedNoOp) {
  Agent<double> agent(small_config(), 3, 1, 0);
  crossq::Rng rng(4);
  const auto stats = agent.step(random_transition(rng));
  EXPECT_TRUE(stats.skipped_underfull);
  EXPECT_EQ(agent.critic_updates(), 0u);
  EXPECT_EQ(agent.underfull_skips(), 1u);
}

TEST(Agent, WarmupActionsAreUniformAndIgnoreTheNetwork) {
  auto cfg = small_config();
  cfg.warmup = 5000;
  Agent<double> a(cfg, 3, 2, 7);
  Agent<double> b(cfg, 3, 2, 7);
  for (auto& p : b.actor().parameters()) p.value->setConstant(3.0);
  const std::vector<double> s{0.1, 0.2, 0.3};
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n / 2; ++i) {
    const auto x = a.select_action(s, true);
    EXPECT_EQ(x, b.select_action(s, true));
    for (double v : x) {
      ASSERT_GE(v, -1.0);
      ASSERT_LE(v, 1.0);
      sum += v;
      sq += v * v;
    }
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 * std::sqrt(1.0 / 3.0 / n));
  EXPECT_NEAR(sq / n, 1.0 / 3.0, 0.01);
}

TEST(Agent, ZeroFinalActorLayerGivesZeroAction) {
  Agent<double> agent(small_config(), 3, 2, 1);
  agent.actor().output_layer().weight.setZero();
  agent.actor().output_layer().bias.setZero();
  EXPECT_EQ(agent.select_action(std::vector<double>{1, -2, 3}, false), (std::vector<double>{0.0, 0.0}));
  EXPECT_THROW(agent.select_action(std::vector<double>{1, NAN, 3}, false), crossq::NumericalFault);
  EXPECT_THROW(agent.select_action(std::vector<double>{1, 2}, false), crossq::StructuralError);
}

TEST(Agent, CriticStatisticsArePooledOverTheJointBatch) {
  auto cfg = small_config();
  cfg.use_target_net = false;
  cfg.log_std_min = cfg.log_std_max = -30.0;  // next actions become deterministic
  Agent<double> agent(cfg, 3, 1, 5);
  fill(agent, 40, 6);
  crossq::Rng rng(8);
  const auto batch = agent.buffer().sample(8, rng);

  Tensor<double> next_actions = agent.actor().infer(batch.next_states, crossq::nn::Mode::eval).leftCols(1);
  next_actions = next_actions.array().tanh();
  Tensor<double> joint(16, 4);
  joint << batch.states, batch.actions, batch.next_states, next_actions;
  const auto& dense = agent.critics()[0].blocks()[0].dense;
  const Tensor<double> pre = joint * dense.weight + dense.bias.replicate(16, 1);
  const Tensor<double> pooled = pre.colwise().mean();
  const Tensor<double> first_half = pre.topRows(8).colwise().mean();

  agent.critic_update(batch);
  const auto& bn_mean = agent.critics()[0].blocks()[0].bn->last_batch_mean();
  EXPECT_LT((bn_mean - pooled).cwiseAbs().maxCoeff(), 1e-7);
  EXPECT_GT((bn_mean - first_half).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Agent, TargetRunningStatisticsOnlyMoveByAveraging) {
  auto cfg = small_config();
  cfg.tau = 0.0;
  Agent<double> agent(cfg, 3, 1, 9);
  fill(agent, 30, 10);
  const auto before = agent.targets()[0];
  crossq::Rng rng(11);
  for (int i = 0; i < 5; ++i) agent.critic_update(agent.buffer().sample(8, rng));
  const auto after = agent.targets()[0].running_stats();
  for (std::size_t i = 0; i < after.size(); ++i) EXPECT_EQ(*after[i], *before.running_stats()[i]);
  EXPECT_NE(*agent.critics()[0].running_stats()[0], *before.running_stats()[0]);
}

TEST(Agent, PerfectFitHasZeroLossAndOutputGradient) {
  auto cfg = small_config();
  cfg.discount = 0.0;
  cfg.use_target_net = false;
  Agent<double> agent(cfg, 3, 1, 12);
  crossq::Rng rng(13);
  for (int i = 0; i < 20; ++i) {
    auto t = random_transition(rng);
    t.reward = 1.0;
    agent.observe(t);
  }
  for (auto& c : agent.critics()) {
    c.output_layer().weight.setZero();
    c.output_layer().bias.setConstant(1.0);
  }
  EXPECT_EQ(agent.critic_update(agent.buffer().sample(8, rng)), 0.0);
  for (auto& c : agent.critics()) {
    EXPECT_EQ(c.output_layer().grad_weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c.output_layer().grad_bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Agent, TemperatureStaysPositive) {
  auto cfg = small_config();
  cfg.batch_size = 4;
  cfg.policy_delay = 1;
  cfg.lr_temperature = 0.5;
  Agent<double> agent(cfg, 3, 1, 14);
  crossq::Rng rng(15);
  for (int i = 0; i < 200; ++i) {
    agent.step(random_transition(rng));
    ASSERT_GT(agent.alpha(), 0.0);
  }
}

TEST(Agent, WeightNormHoldsAfterUpdates) {
  auto cfg = small_config();
  Agent<double> agent(cfg, 3, 1, 16);
  fill(agent, 20, 17);
  crossq::Rng rng(18);
  for (int i = 0; i < 30; ++i) agent.step(random_transition(rng));
  EXPECT_LT(agent.max_projection_deviation(), 1e-12);
  for (const auto& b : agent.critics()[1].blocks()) {
    if (b.dense.normalize) {
      EXPECT_LT(crossq::nn::max_column_norm_deviation(b.dense.weight), 1e-12);
    }
  }
  EXPECT_FALSE(agent.critics()[0].output_layer().normalize);
}

TEST(Agent, ResetKeepsBufferAndReinitializes) {
  auto cfg = small_config();
  cfg.reset_steps = {25};
  Agent<double> agent(cfg, 3, 1, 19);
  const auto initial_actor = agent.actor();
  crossq::Rng rng(20);
  for (int i = 0; i < 24; ++i) agent.step(random_transition(rng));
  ASSERT_GT(agent.critic_optimizer().step_count(), 0u);
  agent.observe(random_transition(rng));
  EXPECT_EQ(agent.resets_done(), 1u);
  EXPECT_EQ(agent.buffer().size(), 25u);
  EXPECT_EQ(agent.critic_optimizer().step_count(), 0u);
  EXPECT_EQ(agent.alpha(), 1.0);
  for (const auto* s : agent.critics()[0].running_stats()) {
    EXPECT_TRUE(s->isZero() || s->isOnes());
  }
  // Fresh draw from the init stream, not a copy of the step-0 weights.
  EXPECT_FALSE(same_parameters(agent.actor(), initial_actor));
}

TEST(Agent, SameSeedSameTrajectory) {
  auto run = [] {
    Agent<double> agent(small_config(), 3, 1, 21);
    crossq::Rng rng(22);
    std::vector<double> trace;
    for (int i = 0; i < 30; ++i) {
      auto t = random_transition(rng);
      t.action = agent.select_action(t.state, true);
      trace.push_back(agent.step(t).critic_loss);
      trace.push_back(t.action[0]);
    }
    return trace;
  };
  EXPECT_EQ(run(), run());
}

TEST(Agent, CheckpointRoundTrip) {
  auto cfg = small_config();
  Agent<double> a(cfg, 3, 1, 23);
  crossq::Rng rng(24);
  for (int i = 0; i < 20; ++i) a.step(random_transition(rng));
  const auto path = std::filesystem::temp_directory_path() / "crossq_agent_roundtrip.cbor";
  save_checkpoint(a, path.string());
  Agent<double> b(cfg, 3, 1, 999);
  load_checkpoint(b, path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(b.state(), a.state());
  crossq::Rng r1(25), r2(25);
  for (int i = 0; i < 10; ++i) {
    auto t1 = random_transition(r1);
    auto t2 = random_transition(r2);
    t1.action = a.select_action(t1.state, true);
    t2.action = b.select_action(t2.state, true);
    ASSERT_EQ(t1.action, t2.action);
    ASSERT_EQ(a.step(t1).critic_loss, b.step(t2).critic_loss);
  }
  Agent<float> wrong(cfg, 3, 1, 23);
  EXPECT_THROW(wrong.load_state(a.state()), crossq::ConfigError);
  Agent<double> other_dims(cfg, 4, 1, 23);
  EXPECT_THROW(other_dims.load_state(a.state()), crossq::StructuralError);
}

TEST(Agent, ConfigValidation) {
  auto cfg = small_config();
  cfg.utd = 0;
  EXPECT_THROW(Agent<double>(cfg, 3, 1, 0), crossq::ConfigError);
  cfg = small_config();
  cfg.tau = 1.5;
  EXPECT_THROW(Agent<double>(cfg, 3, 1, 0), crossq::ConfigError);
  AgentConfig parsed;
  EXPECT_THROW(apply_overrides(parsed, nlohmann::json{{"utd_ratio", 5}}), crossq::ConfigError);
  EXPECT_THROW(apply_overrides(parsed, nlohmann::json{{"utd", "five"}}), crossq::ConfigError);
  apply_overrides(parsed, nlohmann::json{{"utd", 5}, {"target_entropy", -0.25}});
  EXPECT_EQ(parsed.utd, 5);
  EXPECT_EQ(parsed.resolved_target_entropy(3), -0.25);
  EXPECT_EQ(AgentConfig{}.resolved_target_entropy(3), -1.5);
  EXPECT_EQ(nlohmann::json(parsed).get<AgentConfig>().utd, 5);
}

TEST(Agent, DecayOnlyOnOutputLayers) {
  const auto cfg = AgentConfig{};
  crossq::nn::NetworkSpec spec{.input_dim = 3, .hidden = {4, 4}, .output_dim = 1, .weight_norm = true};
  crossq::Rng rng(0);
  crossq::nn::Mlp<double> net(spec, rng);
  const auto params = net.parameters();
  const auto groups = make_param_groups<double>(params, 3e-4, cfg);
  for (const auto& g : groups) {
    for (std::size_t idx : g.members) {
      EXPECT_EQ(g.options.weight_decay > 0.0, params[idx].output_layer);
      EXPECT_EQ(g.options.project_after_step, params[idx].unit_columns);
    }
  }
}
