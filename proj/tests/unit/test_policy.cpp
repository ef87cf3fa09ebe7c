#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "crossq/agent/policy.hpp"
#include "crossq/agent/polyak.hpp"
#include "helpers.hpp"

using crossq::Tensor;
using namespace crossq::agent;

namespace {

double log_prob(double u, double mean, double sd) {
  const std::vector<double> uu{u}, mm{mean}, ss{sd};
  return squashed_log_prob<double>(uu, mm, ss);
}

Tensor<double> col(double v) { return Tensor<double>::Constant(1, 1, v); }

}  // namespace

TEST(SquashedLogProb, StandardNormalAtOrigin) {
  const double expected = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(1.0 + 1e-6);
  EXPECT_NEAR(log_prob(0, 0, 1), expected, 1e-15);
  EXPECT_NEAR(log_prob(0, 0, 1), -0.91894, 1e-5);
}

TEST(SquashedLogProb, FactorizesOverDimensions) {
  const std::vector<double> u{0.3, -1.2}, m{0.1, -0.5}, s{0.7, 1.3};
  EXPECT_NEAR(squashed_log_prob<double>(u, m, s), log_prob(0.3, 0.1, 0.7) + log_prob(-1.2, -0.5, 1.3), 1e-14);
}

TEST(SquashedLogProb, LargeArgumentsStayFinite) {
  // The guard only dominates once sech^2(u) approaches 1e-6.
  for (double u : {3.0, -4.0, 5.0}) {
    const double gauss = -0.5 * std::log(2.0 * std::numbers::pi);
    const double correction = log_prob(u, u, 1.0) - gauss;
    EXPECT_NEAR(correction, 2.0 * std::abs(u) - 2.0 * std::log(2.0), 1e-2);
  }
  for (double u : {30.0, -500.0}) {
    const double v = log_prob(u, u, 1.0);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_NEAR(v, -0.5 * std::log(2.0 * std::numbers::pi) - std::log(1e-6), 1e-9);
  }
}

TEST(SquashedLogProb, RejectsBadInput) {
  const std::vector<double> one{0.0}, two{0.0, 0.0}, zero{0.0};
  EXPECT_THROW(squashed_log_prob<double>(one, two, two), crossq::StructuralError);
  EXPECT_THROW(squashed_log_prob<double>(one, one, zero), crossq::UsageError);
}

TEST(SampleSquashed, AgreesWithDensityAndClamps) {
  Tensor<double> head(2, 4);
  head << 0.2, -0.4, -0.1, 5.0, 1.0, 0.0, -30.0, 0.3;
  Tensor<double> noise(2, 2);
  noise << 0.5, -1.0, 0.0, 2.0;
  const auto s = sample_squashed(head, noise, -20.0, 2.0);
  EXPECT_EQ(s.log_std(0, 1), 2.0);
  EXPECT_EQ(s.log_std(1, 0), -20.0);
  EXPECT_EQ(s.clamp_mask(0, 0), 1.0);
  EXPECT_EQ(s.clamp_mask(0, 1), 0.0);
  for (crossq::Index r = 0; r < 2; ++r) {
    std::vector<double> u{s.pre_squash(r, 0), s.pre_squash(r, 1)};
    std::vector<double> m{s.mean(r, 0), s.mean(r, 1)};
    std::vector<double> sd{std::exp(s.log_std(r, 0)), std::exp(s.log_std(r, 1))};
    EXPECT_NEAR(s.log_prob(r, 0), squashed_log_prob<double>(u, m, sd), 1e-9);
    EXPECT_EQ(s.action(r, 0), std::tanh(s.pre_squash(r, 0)));
  }
  EXPECT_THROW(sample_squashed(head, Tensor<double>(Tensor<double>::Zero(2, 3)), -20.0, 2.0), crossq::StructuralError);
}

TEST(TdTarget, TerminalIgnoresBootstrap) {
  for (double q : {-100.0, 0.0, 1e6}) {
    EXPECT_EQ(compute_td_target(col(1), col(1), col(q), col(-2), 0.5, 0.99)(0, 0), 1.0);
  }
}

TEST(TdTarget, WorkedExamples) {
  EXPECT_NEAR(compute_td_target(col(1), col(0), col(10), col(-2), 0.0, 0.99)(0, 0), 10.9, 1e-12);
  EXPECT_NEAR(compute_td_target(col(1), col(0), col(10), col(-2), 0.5, 0.99)(0, 0), 11.89, 1e-12);
}

TEST(TdTarget, MonotoneInBootstrapValue) {
  double prev = -1e300;
  for (double q = -5; q <= 5; q += 0.5) {
    const double y = compute_td_target(col(0.3), col(0), col(q), col(0.1), 0.2, 0.9)(0, 0);
    EXPECT_GT(y, prev);
    prev = y;
  }
  EXPECT_THROW(compute_td_target(col(1), Tensor<double>(Tensor<double>::Zero(2, 1)), col(1), col(1), 0.0, 0.9),
               crossq::StructuralError);
}

namespace {

crossq::nn::Mlp<double> constant_net(double v) {
  auto net = testing_helpers::random_bn_net(1, 2, {3}, 1, 1e-5);
  for (auto& p : net.parameters()) p.value->setConstant(v);
  for (auto* s : net.running_stats()) s->setConstant(v);
  return net;
}

}  // namespace

TEST(Polyak, TargetMomentumExample) {
  auto target = constant_net(1.0);
  auto online = constant_net(0.0);
  polyak_update(target, online, 0.005);
  for (const auto* p : target.parameter_values()) EXPECT_LT((p->array() - 0.995).abs().maxCoeff(), 1e-12);
  for (const auto* s : target.running_stats()) EXPECT_LT((s->array() - 0.995).abs().maxCoeff(), 1e-12);
}

TEST(Polyak, EndpointsAreExact) {
  auto online = testing_helpers::random_bn_net(2, 2, {3}, 1, 1e-5);
  auto target = testing_helpers::random_bn_net(3, 2, {3}, 1, 1e-5);
  const auto original = target;
  polyak_update(target, online, 0.0);
  for (std::size_t i = 0; i < target.parameter_values().size(); ++i) {
    EXPECT_EQ(*target.parameter_values()[i], *original.parameter_values()[i]);
  }
  polyak_update(target, online, 1.0);
  for (std::size_t i = 0; i < target.parameter_values().size(); ++i) {
    EXPECT_EQ(*target.parameter_values()[i], *online.parameter_values()[i]);
  }
  for (std::size_t i = 0; i < target.running_stats().size(); ++i) {
    EXPECT_EQ(*target.running_stats()[i], *online.running_stats()[i]);
  }
}

TEST(Polyak, ArchitectureMismatch) {
  auto a = testing_helpers::random_bn_net(2, 2, {3}, 1, 1e-5);
  auto b = testing_helpers::random_bn_net(2, 2, {4}, 1, 1e-5);
  auto c = testing_helpers::random_bn_net(2, 2, {3, 3}, 1, 1e-5);
  EXPECT_THROW(polyak_update(a, b, 0.5), crossq::StructuralError);
  EXPECT_THROW(polyak_update(a, c, 0.5), crossq::StructuralError);
}
