#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "crossq/nn/layers.hpp"

namespace crossq::nn {

/// Columns whose norm falls below this are left untouched by projection.
inline constexpr double kDegenerateNorm = 1e-12;

/// Rescales every column of `w` to L2 norm `c`. Returns the number of
/// degenerate (near-zero) columns that were skipped.
template <typename T>
std::size_t project_columns(Tensor<T>& w, T c = T(1)) {
  std::size_t degenerate = 0;
  for (Index j = 0; j < w.cols(); ++j) {
    const double norm = w.col(j).template cast<double>().norm();
    if (!(norm >= kDegenerateNorm)) {
      ++degenerate;
      continue;
    }
    const double scale = static_cast<double>(c) / norm;
    for (Index i = 0; i < w.rows(); ++i) {
      w(i, j) = static_cast<T>(static_cast<double>(w(i, j)) * scale);
    }
  }
  return degenerate;
}

/// Projects a weight-normalized layer's incoming weight vectors onto the
/// sphere of radius `c`. Biases are not touched.
template <typename T>
std::size_t project_weights(DenseLayer<T>& layer, T c = T(1)) {
  if (!layer.normalize) throw UsageError("project_weights on a layer that is not weight-normalized");
  return project_columns(layer.weight, c);
}

/// max_j | ||w_j|| - c |
template <typename T>
double max_column_norm_deviation(const Tensor<T>& w, double c = 1.0) {
  double worst = 0.0;
  for (Index j = 0; j < w.cols(); ++j) {
    worst = std::max(worst, std::abs(w.col(j).template cast<double>().norm() - c));
  }
  return worst;
}

}  // namespace crossq::nn
