#pragma once

#include "crossq/nn/mlp.hpp"

namespace crossq::agent {

/// target <- (1 - tau) * target + tau * online for every learnable tensor and
/// every batch-norm running statistic.
template <typename T>
void polyak_update(nn::Mlp<T>& target, nn::Mlp<T>& online, T tau) {
  auto tp = target.parameters();
  auto op = online.parameters();
  auto ts = target.running_stats();
  auto os = online.running_stats();
  if (tp.size() != op.size() || ts.size() != os.size()) {
    throw StructuralError("polyak_update: architectures differ");
  }
  for (std::size_t i = 0; i < tp.size(); ++i) require_same_shape(*tp[i].value, *op[i].value, "polyak_update");
  for (std::size_t i = 0; i < ts.size(); ++i) require_same_shape(*ts[i], *os[i], "polyak_update");
  const T keep = T(1) - tau;
  for (std::size_t i = 0; i < tp.size(); ++i) *tp[i].value = keep * *tp[i].value + tau * *op[i].value;
  for (std::size_t i = 0; i < ts.size(); ++i) *ts[i] = keep * *ts[i] + tau * *os[i];
}

}  // namespace crossq::agent
