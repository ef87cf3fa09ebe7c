#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "crossq/envs/registry.hpp"

using namespace crossq::envs;

namespace {

// Energy conserved by the semi-implicit Euler map to second order in dt.
double modified_energy(const Pendulum& env) {
  const double k = env.gravity_gain();
  const double w = env.theta_dot();
  const double dt = env.spec().dt;
  return 0.5 * w * w + k * std::cos(env.theta()) + 0.5 * dt * w * k * std::sin(env.theta());
}

double episode_return(Environment& env, std::uint64_t seed, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  env.reset(seed);
  double total = 0.0;
  for (;;) {
    std::vector<double> a(env.spec().action_dim);
    for (auto& x : a) x = u(rng);
    const auto r = env.step(a);
    total += r.reward;
    if (r.terminal || r.truncated) return total;
  }
}

}  // namespace

TEST(Pendulum, ResetIsSeededAndInRange) {
  Pendulum a, b;
  EXPECT_EQ(a.reset(17), b.reset(17));
  EXPECT_NE(a.reset(17), a.reset(18));
  double max_abs_theta = 0.0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    a.reset(s);
    ASSERT_LE(std::abs(a.theta()), std::numbers::pi);
    ASSERT_LE(std::abs(a.theta_dot()), 1.0);
    max_abs_theta = std::max(max_abs_theta, std::abs(a.theta()));
    const auto obs = a.observe();
    ASSERT_NEAR(obs[0] * obs[0] + obs[1] * obs[1], 1.0, 1e-12);
  }
  EXPECT_GT(max_abs_theta, 3.0);
}

TEST(Pendulum, UprightRestCostsNothing) {
  Pendulum env;
  env.reset(0);
  env.set_state(0.0, 0.0);
  const auto r = env.step(std::vector<double>{0.0});
  EXPECT_EQ(r.reward, 0.0);
  EXPECT_EQ(env.theta(), 0.0);
}

namespace {

struct EnergyError {
  double worst_step = 0.0;
  double worst_drift = 0.0;
};

EnergyError unforced_energy_error(double dt, double seconds) {
  Pendulum env({{"action_repeat", 1}, {"dt", dt}, {"horizon", 1e9}});
  EnergyError e;
  for (std::uint64_t s = 0; s < 50; ++s) {
    env.reset(s);
    const double start = modified_energy(env);
    for (int t = 0; t < static_cast<int>(seconds / dt); ++t) {
      const double before = modified_energy(env);
      env.step(std::vector<double>{0.0});
      e.worst_step = std::max(e.worst_step, std::abs(modified_energy(env) - before));
      e.worst_drift = std::max(e.worst_drift, std::abs(modified_energy(env) - start));
    }
  }
  return e;
}

}  // namespace

TEST(Pendulum, ZeroActionConservesModifiedEnergy) {
  // Local error O(dt^3), bounded global error O(dt^2).
  const auto coarse = unforced_energy_error(0.05, 10.0);
  const auto fine = unforced_energy_error(0.025, 10.0);
  EXPECT_NEAR(coarse.worst_step / fine.worst_step, 8.0, 1.0);
  EXPECT_NEAR(coarse.worst_drift / fine.worst_drift, 4.0, 0.5);
  EXPECT_LT(coarse.worst_drift, 0.25);
  // No secular growth over a longer horizon.
  EXPECT_LT(unforced_energy_error(0.05, 40.0).worst_drift, 1.2 * coarse.worst_drift);
}

TEST(Pendulum, EnergyControllerSwingsUp) {
  Pendulum env;
  for (std::uint64_t s = 0; s < 100; ++s) {
    env.reset(s);
    bool reached = false;
    for (int t = 0; t < 200 && !reached; ++t) {
      env.step(std::vector<double>{pendulum_energy_controller(env)});
      reached = std::abs(Pendulum::angle_normalize(env.theta())) < 0.2;
    }
    EXPECT_TRUE(reached) << "seed " << s;
  }
}

TEST(Pendulum, HorizonTruncatesWithoutTerminal) {
  Pendulum env({{"horizon", 5}});
  env.reset(1);
  for (int t = 0; t < 4; ++t) EXPECT_FALSE(env.step(std::vector<double>{0.3}).truncated);
  const auto r = env.step(std::vector<double>{0.3});
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminal);
}

TEST(Pendulum, AngleNormalization) {
  EXPECT_NEAR(Pendulum::angle_normalize(2.0 * std::numbers::pi + 0.1), 0.1, 1e-12);
  EXPECT_NEAR(Pendulum::angle_normalize(-0.1), -0.1, 1e-15);
  EXPECT_NEAR(std::abs(Pendulum::angle_normalize(3.0 * std::numbers::pi)), std::numbers::pi, 1e-12);
}

TEST(Environments, ReturnsStayWithinDeclaredBounds) {
  std::mt19937_64 rng(3);
  for (const auto& name : env_names()) {
    auto env = make_env(name);
    const auto& spec = env->spec();
    EXPECT_LT(spec.return_lower, spec.return_upper);
    EXPECT_DOUBLE_EQ(spec.normalize_return(spec.return_upper), 1.0);
    EXPECT_DOUBLE_EQ(spec.normalize_return(spec.return_lower), 0.0);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const double r = episode_return(*env, s, rng);
      EXPECT_GE(r, spec.return_lower) << name;
      EXPECT_LE(r, spec.return_upper) << name;
    }
  }
}

TEST(Environments, DeterministicUnderFixedActions) {
  for (const auto& name : env_names()) {
    auto a = make_env(name);
    auto b = make_env(name);
    std::mt19937_64 ra(9), rb(9);
    EXPECT_EQ(episode_return(*a, 4, ra), episode_return(*b, 4, rb)) << name;
  }
}

TEST(Environments, RejectMalformedActions) {
  auto env = make_env("reacher");
  env->reset(0);
  EXPECT_THROW(env->step(std::vector<double>{0.1}), crossq::StructuralError);
  EXPECT_THROW(env->step(std::vector<double>{0.1, NAN}), crossq::NumericalFault);
}

TEST(Environments, UnknownNamesAndParameters) {
  EXPECT_THROW(make_env("cartpole"), crossq::ConfigError);
  EXPECT_THROW(make_env("pendulum", {{"friction", 1.0}}), crossq::ConfigError);
  EXPECT_THROW(make_env("pendulum", {{"dt", 0.0}}), crossq::ConfigError);
  EXPECT_EQ(make_env("pendulum", {{"action_repeat", 3}})->spec().action_repeat, 3);
}

TEST(MountainCar, ResetDistribution) {
  MountainCar env;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const auto obs = env.reset(s);
    ASSERT_GE(obs[0], -0.6);
    ASSERT_LE(obs[0], -0.4);
    ASSERT_EQ(obs[1], 0.0);
  }
}

TEST(MountainCar, GoalIsTerminalWithBonus) {
  MountainCar env;
  env.reset(0);
  env.set_state(0.44, 0.07);
  const auto r = env.step(std::vector<double>{1.0});
  EXPECT_TRUE(r.terminal);
  EXPECT_FALSE(r.truncated);
  // The terminal substep ends the action repeat early.
  EXPECT_DOUBLE_EQ(r.reward, 100.0 - 0.1);
}

TEST(Reacher, GoalOnUnitCircleAndDistanceReward) {
  PointMassReacher env;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto obs = env.reset(s);
    ASSERT_NEAR(std::hypot(obs[4], obs[5]), 1.0, 1e-12);
    ASSERT_EQ(obs[0], 0.0);
    const auto r = env.step(std::vector<double>{0.0, 0.0});
    // Both substeps start at the origin, one unit from the goal.
    ASSERT_NEAR(r.reward, -2.0, 1e-12);
  }
}
