#pragma once

// Dense numeric arrays used throughout the library.
//
// Every activation and parameter is a row-major 2-D array: activations are
// [batch, features], weights are [in, out] and per-feature vectors are [1, n].
// Eigen owns the storage, so shape/data consistency holds by construction.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "crossq/errors.hpp"

namespace crossq {

template <typename T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using Index = Eigen::Index;

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return t.allFinite();
}

template <typename T>
bool all_finite(std::span<const T> v) {
  for (T x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template <typename T>
void require_finite(const Tensor<T>& t, const std::string& what) {
  if (!t.allFinite()) throw NumericalFault(what + ": non-finite value");
}

template <typename T>
std::string shape_string(const Tensor<T>& t) {
  return "[" + std::to_string(t.rows()) + ", " + std::to_string(t.cols()) + "]";
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw StructuralError(what + ": shape " + shape_string(a) + " vs " + shape_string(b));
  }
}

/// Copies a flat vector into a single-row tensor.
template <typename T, typename U>
Tensor<T> row_tensor(std::span<const U> v) {
  Tensor<T> t(1, static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) t(0, static_cast<Index>(i)) = static_cast<T>(v[i]);
  return t;
}

/// Per-column sum, accumulated row by row over contiguous storage.
template <typename T>
RowVector<T> column_sum(const Tensor<T>& x) {
  RowVector<T> s = RowVector<T>::Zero(x.cols());
  for (Index r = 0; r < x.rows(); ++r) s += x.row(r);
  return s;
}

/// Per-column sum of the elementwise product a * b.
template <typename T>
RowVector<T> column_dot(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "column_dot");
  RowVector<T> s = RowVector<T>::Zero(a.cols());
  for (Index r = 0; r < a.rows(); ++r) s.array() += a.row(r).array() * b.row(r).array();
  return s;
}

/// Per-column population variance about `mean`.
template <typename T>
RowVector<T> column_variance(const Tensor<T>& x, const RowVector<T>& mean) {
  RowVector<T> s = RowVector<T>::Zero(x.cols());
  for (Index r = 0; r < x.rows(); ++r) s.array() += (x.row(r) - mean).array().square();
  return s / static_cast<T>(x.rows());
}

/// Frobenius norm accumulated in double regardless of T.
template <typename T>
double frobenius_norm(const Tensor<T>& t) {
  return std::sqrt(t.template cast<double>().squaredNorm());
}

}  // namespace crossq
