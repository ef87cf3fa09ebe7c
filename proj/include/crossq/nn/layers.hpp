#pragma once

#include <cmath>
#include <utility>

#include "crossq/tensor.hpp"

namespace crossq::nn {

enum class Mode { train, eval };

/// Whether a train-mode batch-norm pass folds its batch statistics into the
/// stored running statistics.
enum class StatUpdate { apply, skip };

/// momentum * old + (1 - momentum) * batch_stat
template <typename T>
constexpr T running_stat_update(T old, T batch_stat, T momentum) {
  return momentum * old + (T(1) - momentum) * batch_stat;
}

/// Affine layer y = x W + b with W stored [in, out].
///
/// `normalize` marks the layer as weight-normalized: every column of W (the
/// incoming weights of one output unit) is held at a fixed L2 norm by the
/// optimizer's projection hook.
template <typename T>
struct DenseLayer {
  Tensor<T> weight;
  Tensor<T> bias;
  Tensor<T> grad_weight;
  Tensor<T> grad_bias;
  bool normalize = false;
  bool followed_by_bn = false;

  DenseLayer() = default;
  DenseLayer(Index in, Index out)
      : weight(Tensor<T>::Zero(in, out)),
        bias(Tensor<T>::Zero(1, out)),
        grad_weight(Tensor<T>::Zero(in, out)),
        grad_bias(Tensor<T>::Zero(1, out)) {}

  Index in_features() const { return weight.rows(); }
  Index out_features() const { return weight.cols(); }

  Tensor<T> apply(const Tensor<T>& x) const {
    if (x.cols() != weight.rows()) {
      throw StructuralError("dense: input " + shape_string(x) + " does not match weight " +
                            shape_string(weight));
    }
    Tensor<T> y(x.rows(), weight.cols());
    y.noalias() = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  Tensor<T> forward(Tensor<T> x) {
    input_ = std::move(x);
    has_cache_ = true;
    return apply(input_);
  }

  /// Overwrites grad_weight/grad_bias when `param_grads`; returns dL/dx.
  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) {
    if (!has_cache_) throw UsageError("dense backward without a cached forward");
    if (param_grads) {
      grad_weight.noalias() = input_.transpose() * dy;
      grad_bias = column_sum(dy);
    }
    Tensor<T> dx(dy.rows(), weight.rows());
    dx.noalias() = dy * weight.transpose();
    return dx;
  }

  const Tensor<T>& cached_input() const { return input_; }

  void clear_cache() {
    input_.resize(0, 0);
    has_cache_ = false;
  }

 private:
  Tensor<T> input_;
  bool has_cache_ = false;
};

/// Per-feature batch normalization with learned affine (gamma, beta).
///
/// Train mode normalizes with the batch mean and population variance; eval
/// mode uses the running statistics. Backward propagates through the batch
/// mean and variance exactly.
template <typename T>
class BatchNormLayer {
 public:
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  Tensor<T> grad_gamma;
  Tensor<T> grad_beta;
  T momentum = T(0.99);
  T eps = T(1e-5);

  BatchNormLayer() = default;
  explicit BatchNormLayer(Index features, T momentum_ = T(0.99), T eps_ = T(1e-5))
      : gamma(Tensor<T>::Ones(1, features)),
        beta(Tensor<T>::Zero(1, features)),
        running_mean(Tensor<T>::Zero(1, features)),
        running_var(Tensor<T>::Ones(1, features)),
        grad_gamma(Tensor<T>::Zero(1, features)),
        grad_beta(Tensor<T>::Zero(1, features)),
        momentum(momentum_),
        eps(eps_) {}

  Index features() const { return gamma.cols(); }

  /// Stateless evaluation. `mean_out`/`var_out` receive the statistics used.
  Tensor<T> apply(const Tensor<T>& x, Mode mode, RowVector<T>* mean_out = nullptr,
                  RowVector<T>* var_out = nullptr) const {
    check_shape(x);
    RowVector<T> mean;
    RowVector<T> var;
    if (mode == Mode::train) {
      if (x.rows() < 1) throw StructuralError("batch norm: empty batch");
      mean = column_sum(x) / static_cast<T>(x.rows());
      var = column_variance(x, mean);
    } else {
      mean = running_mean.row(0);
      var = running_var.row(0);
    }
    const RowVector<T> inv_std = (var.array() + eps).rsqrt();
    const RowVector<T> scale = (inv_std.array() * gamma.row(0).array()).matrix();
    Tensor<T> y(x.rows(), x.cols());
    const RowVector<T> shift = (beta.row(0).array() - mean.array() * scale.array()).matrix();
    for (Index r = 0; r < x.rows(); ++r) y.row(r).array() = x.row(r).array() * scale.array() + shift.array();
    if (mean_out) *mean_out = mean;
    if (var_out) *var_out = var;
    return y;
  }

  Tensor<T> forward(Tensor<T> x, Mode mode, StatUpdate update = StatUpdate::apply) {
    check_shape(x);
    mode_ = mode;
    if (mode == Mode::train) {
      if (x.rows() < 1) throw StructuralError("batch norm: empty batch");
      batch_mean_ = column_sum(x) / static_cast<T>(x.rows());
      xhat_ = std::move(x);
      xhat_.rowwise() -= batch_mean_;
      batch_var_ = column_dot(xhat_, xhat_) / static_cast<T>(xhat_.rows());
      inv_std_ = (batch_var_.array() + eps).rsqrt();
      if (update == StatUpdate::apply) {
        for (Index j = 0; j < features(); ++j) {
          running_mean(0, j) = running_stat_update(running_mean(0, j), batch_mean_(j), momentum);
          running_var(0, j) = running_stat_update(running_var(0, j), batch_var_(j), momentum);
        }
      }
    } else {
      xhat_ = std::move(x);
      xhat_.rowwise() -= running_mean.row(0);
      inv_std_ = (running_var.row(0).array() + eps).rsqrt();
    }
    xhat_.array().rowwise() *= inv_std_.array();
    has_cache_ = true;

    Tensor<T> y(xhat_.rows(), xhat_.cols());
    for (Index r = 0; r < y.rows(); ++r) {
      y.row(r).array() = xhat_.row(r).array() * gamma.row(0).array() + beta.row(0).array();
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy, bool param_grads) {
    if (!has_cache_) throw UsageError("batch norm backward without a cached forward");
    require_same_shape(dy, xhat_, "batch norm backward");
    if (param_grads) {
      grad_gamma = column_dot(dy, xhat_);
      grad_beta = column_sum(dy);
    }
    if (mode_ == Mode::eval) {
      Tensor<T> dx = dy;
      dx.array().rowwise() *= (gamma.row(0).array() * inv_std_.array());
      return dx;
    }
    // dx = gamma * inv_std / N * (N dy - sum(dy) - xhat * sum(dy * xhat)), per feature
    const T n = static_cast<T>(dy.rows());
    const RowVector<T> mean_dy = (param_grads ? RowVector<T>(grad_beta.row(0)) : column_sum(dy)) / n;
    const RowVector<T> mean_dy_xhat = (param_grads ? RowVector<T>(grad_gamma.row(0)) : column_dot(dy, xhat_)) / n;
    const RowVector<T> scale = (gamma.row(0).array() * inv_std_.array()).matrix();
    Tensor<T> dx(dy.rows(), dy.cols());
    for (Index r = 0; r < dy.rows(); ++r) {
      dx.row(r).array() =
          (dy.row(r).array() - mean_dy.array() - xhat_.row(r).array() * mean_dy_xhat.array()) * scale.array();
    }
    return dx;
  }

  /// Statistics of the most recent train-mode forward.
  const RowVector<T>& last_batch_mean() const { return batch_mean_; }
  const RowVector<T>& last_batch_var() const { return batch_var_; }

  void clear_cache() {
    xhat_.resize(0, 0);
    has_cache_ = false;
  }

 private:
  void check_shape(const Tensor<T>& x) const {
    if (x.cols() != gamma.cols() || beta.cols() != gamma.cols()) {
      throw StructuralError("batch norm: input " + shape_string(x) + " vs gamma " +
                            shape_string(gamma) + ", beta " + shape_string(beta));
    }
  }

  Tensor<T> xhat_;
  RowVector<T> inv_std_;
  RowVector<T> batch_mean_;
  RowVector<T> batch_var_;
  Mode mode_ = Mode::train;
  bool has_cache_ = false;
};

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  x.array() = x.array().max(T(0));
  return x;
}

}  // namespace crossq::nn
