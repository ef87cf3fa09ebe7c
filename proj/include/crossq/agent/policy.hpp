#pragma once

// Squashed Gaussian policy math and the entropy-regularized TD target.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "crossq/tensor.hpp"

namespace crossq::agent {

inline constexpr double kTanhGuard = 1e-6;

/// sum_i [ log N(u_i; mean_i, std_i) - log(1 - tanh(u_i)^2 + 1e-6) ]
template <typename T>
T squashed_log_prob(std::span<const T> u, std::span<const T> mean, std::span<const T> std_dev) {
  if (u.size() != mean.size() || u.size() != std_dev.size()) {
    throw StructuralError("squashed_log_prob: dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double s = static_cast<double>(std_dev[i]);
    if (!(s > 0.0)) throw UsageError("squashed_log_prob: std must be positive");
    const double z = (static_cast<double>(u[i]) - static_cast<double>(mean[i])) / s;
    const double t = std::tanh(static_cast<double>(u[i]));
    total += -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * std::numbers::pi);
    total -= std::log(1.0 - t * t + kTanhGuard);
  }
  return static_cast<T>(total);
}

/// Per-row policy sample for a batch: u = mean + std * noise, a = tanh(u).
template <typename T>
struct PolicySample {
  Tensor<T> mean;
  Tensor<T> log_std;       // after clamping
  Tensor<T> clamp_mask;    // 1 where the raw log-std was inside the clamp range
  Tensor<T> noise;
  Tensor<T> pre_squash;    // u
  Tensor<T> action;        // tanh(u)
  Tensor<T> log_prob;      // [B, 1]
};

/// Splits a [B, 2m] head into mean and clamped log-std, draws `noise` and
/// evaluates the squashed sample with its log density.
template <typename T>
PolicySample<T> sample_squashed(const Tensor<T>& head, const Tensor<T>& noise, double log_std_min,
                                double log_std_max) {
  const Index m = head.cols() / 2;
  if (head.cols() != 2 * m || noise.rows() != head.rows() || noise.cols() != m) {
    throw StructuralError("sample_squashed: head " + shape_string(head) + " vs noise " + shape_string(noise));
  }
  PolicySample<T> ps;
  ps.mean = head.leftCols(m);
  const Tensor<T> raw = head.rightCols(m);
  const T lo = static_cast<T>(log_std_min);
  const T hi = static_cast<T>(log_std_max);
  ps.log_std = raw.cwiseMax(lo).cwiseMin(hi);
  ps.clamp_mask = ((raw.array() >= lo) && (raw.array() <= hi)).template cast<T>();
  ps.noise = noise;
  ps.pre_squash = ps.mean.array() + ps.log_std.array().exp() * noise.array();
  ps.action = ps.pre_squash.array().tanh();
  ps.log_prob.resize(head.rows(), 1);
  const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
  for (Index r = 0; r < head.rows(); ++r) {
    double lp = 0.0;
    for (Index c = 0; c < m; ++c) {
      const double z = static_cast<double>(noise(r, c));
      const double t = static_cast<double>(ps.action(r, c));
      lp += -0.5 * z * z - static_cast<double>(ps.log_std(r, c)) - half_log_two_pi;
      lp -= std::log(1.0 - t * t + kTanhGuard);
    }
    ps.log_prob(r, 0) = static_cast<T>(lp);
  }
  return ps;
}

/// y = r + discount * (1 - done) * (min_q_next - alpha * log_prob_next)
template <typename T>
Tensor<T> compute_td_target(const Tensor<T>& rewards, const Tensor<T>& dones, const Tensor<T>& min_q_next,
                            const Tensor<T>& log_prob_next, T alpha, T discount) {
  require_same_shape(rewards, dones, "td target");
  require_same_shape(rewards, min_q_next, "td target");
  require_same_shape(rewards, log_prob_next, "td target");
  return rewards.array() +
         discount * (T(1) - dones.array()) * (min_q_next.array() - alpha * log_prob_next.array());
}

}  // namespace crossq::agent
