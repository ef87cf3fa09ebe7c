#pragma once

// Property checks for batch-normalized networks: output invariance under
// rescaling of a hidden block's (W, b), the matching 1/c gradient scaling,
// and a central finite-difference gradient check.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "crossq/nn/mlp.hpp"

namespace crossq::nn {

namespace detail {

template <typename T>
void require_scalable(const Mlp<T>& net, std::optional<std::size_t> block) {
  if (block && *block >= net.hidden_count()) {
    throw UsageError("scale check: block " + std::to_string(*block) + " is not a hidden block");
  }
  for (std::size_t i = 0; i < net.hidden_count(); ++i) {
    if (block && *block != i) continue;
    if (!net.blocks()[i].bn) {
      throw UsageError("scale check: hidden block " + std::to_string(i) +
                       " is not followed by batch norm, so it is not scale-invariant");
    }
  }
}

template <typename T>
void scale_blocks(Mlp<T>& net, T c, std::optional<std::size_t> block) {
  for (std::size_t i = 0; i < net.hidden_count(); ++i) {
    if (block && *block != i) continue;
    net.blocks()[i].dense.weight *= c;
    net.blocks()[i].dense.bias *= c;
  }
}

}  // namespace detail

/// max |f(X; cW, cb) - f(X; W, b)| in train mode, scaling every hidden block
/// (or only `block`). The output layer is never scaled.
template <typename T>
double scale_invariance_check(const Mlp<T>& net, const Tensor<T>& x, T c,
                              std::optional<std::size_t> block = std::nullopt) {
  if (!(c > T(0))) throw UsageError("scale check: c must be positive");
  detail::require_scalable(net, block);
  Mlp<T> scaled = net;
  detail::scale_blocks(scaled, c, block);
  const Tensor<T> base = net.infer(x, Mode::train);
  const Tensor<T> moved = scaled.infer(x, Mode::train);
  return (moved - base).cwiseAbs().maxCoeff();
}

/// Largest relative deviation between c * grad(at cW, cb) and grad(at W, b)
/// for the scalar loss sum(f(X) * upstream), per scaled block: the block's
/// weight and bias gradients form one vector, ||c g_scaled - g|| / ||g||.
/// (The bias gradient of a batch-normalized layer is identically zero, so
/// it is only meaningful relative to the block as a whole.)
template <typename T>
double gradient_scaling_check(const Mlp<T>& net, const Tensor<T>& x, const Tensor<T>& upstream, T c,
                              std::optional<std::size_t> block = std::nullopt) {
  if (!(c > T(0))) throw UsageError("gradient check: c must be positive");
  detail::require_scalable(net, block);
  Mlp<T> base = net;
  Mlp<T> scaled = net;
  detail::scale_blocks(scaled, c, block);
  base.forward(x, Mode::train, StatUpdate::skip);
  base.backward(upstream);
  scaled.forward(x, Mode::train, StatUpdate::skip);
  scaled.backward(upstream);
  double worst = 0.0;
  for (std::size_t i = 0; i < net.hidden_count(); ++i) {
    if (block && *block != i) continue;
    const auto& b0 = base.blocks()[i].dense;
    const auto& b1 = scaled.blocks()[i].dense;
    const double cd = static_cast<double>(c);
    const double diff = (b1.grad_weight.template cast<double>() * cd - b0.grad_weight.template cast<double>())
                            .squaredNorm() +
                        (b1.grad_bias.template cast<double>() * cd - b0.grad_bias.template cast<double>()).squaredNorm();
    const double ref = b0.grad_weight.template cast<double>().squaredNorm() +
                       b0.grad_bias.template cast<double>().squaredNorm();
    if (!(ref > 0.0)) {
      if (diff > 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    worst = std::max(worst, std::sqrt(diff / ref));
  }
  return worst;
}

struct GradientCheckResult {
  double max_relative_error = 0.0;  // over all parameter tensors and the input
  std::size_t tensors_checked = 0;
};

/// Compares backward() against central differences of the scalar loss
/// sum(f(X) * upstream) in the given mode, one parameter element at a time.
/// Running statistics are never updated by the probe passes. The error of
/// each tensor is ||analytic - numeric|| / max(||analytic||, ||numeric||,
/// floor), so tensors whose exact gradient vanishes are compared absolutely.
template <typename T>
GradientCheckResult finite_difference_check(const Mlp<T>& net, const Tensor<T>& x, const Tensor<T>& upstream,
                                            Mode mode = Mode::train, double step = 1e-5,
                                            double floor = 1e-4) {
  Mlp<T> work = net;
  work.forward(x, mode, StatUpdate::skip);
  const Tensor<T> input_grad = work.backward(upstream);

  auto loss = [&](const Mlp<T>& m, const Tensor<T>& in) {
    return static_cast<double>((m.infer(in, mode).array() * upstream.array()).sum());
  };

  GradientCheckResult result;
  auto params = work.parameters();
  for (auto& p : params) {
    Tensor<T> numeric(p.value->rows(), p.value->cols());
    for (Index k = 0; k < p.value->size(); ++k) {
      T& v = p.value->data()[k];
      const T saved = v;
      v = saved + static_cast<T>(step);
      const double up = loss(work, x);
      v = saved - static_cast<T>(step);
      const double down = loss(work, x);
      v = saved;
      numeric.data()[k] = static_cast<T>((up - down) / (2.0 * step));
    }
    const double denom = std::max({p.grad->template cast<double>().norm(),
                                   numeric.template cast<double>().norm(), floor});
    const double err = (p.grad->template cast<double>() - numeric.template cast<double>()).norm() / denom;
    result.max_relative_error = std::max(result.max_relative_error, err);
    ++result.tensors_checked;
  }

  Tensor<T> probe = x;
  Tensor<T> numeric(x.rows(), x.cols());
  for (Index k = 0; k < probe.size(); ++k) {
    const T saved = probe.data()[k];
    probe.data()[k] = saved + static_cast<T>(step);
    const double up = loss(work, probe);
    probe.data()[k] = saved - static_cast<T>(step);
    const double down = loss(work, probe);
    probe.data()[k] = saved;
    numeric.data()[k] = static_cast<T>((up - down) / (2.0 * step));
  }
  const double denom = std::max({input_grad.template cast<double>().norm(),
                                 numeric.template cast<double>().norm(), floor});
  result.max_relative_error = std::max(
      result.max_relative_error, (input_grad.template cast<double>() - numeric.template cast<double>()).norm() / denom);
  ++result.tensors_checked;
  return result;
}

}  // namespace crossq::nn
