#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "crossq/nn/layers.hpp"
#include "crossq/nn/projection.hpp"
#include "crossq/random.hpp"

namespace crossq::nn {

/// Architecture of a multilayer perceptron: each hidden width becomes a
/// dense -> [batch norm] -> ReLU block, followed by a plain dense output layer.
struct NetworkSpec {
  Index input_dim = 1;
  std::vector<Index> hidden;
  Index output_dim = 1;
  bool batch_norm = true;
  bool weight_norm = false;  // unit-norm columns on every hidden dense layer
  double bn_momentum = 0.99;
  double bn_eps = 1e-5;
};

enum class ParamKind { weight, bias, bn_scale, bn_shift, scalar };

/// Non-owning handle to one learnable tensor and its gradient buffer.
template <typename T>
struct ParamRef {
  Tensor<T>* value;
  Tensor<T>* grad;
  ParamKind kind;
  std::size_t block;
  bool output_layer;
  bool unit_columns;
};

template <typename T>
class Mlp {
 public:
  struct Block {
    DenseLayer<T> dense;
    std::optional<BatchNormLayer<T>> bn;
    bool relu = false;
  };

  Mlp() = default;

  Mlp(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
    if (spec_.input_dim < 1 || spec_.output_dim < 1) {
      throw StructuralError("network needs positive input and output dimensions");
    }
    Index in = spec_.input_dim;
    for (Index width : spec_.hidden) {
      if (width < 1) throw StructuralError("hidden width must be positive");
      Block b;
      b.dense = DenseLayer<T>(in, width);
      b.dense.normalize = spec_.weight_norm;
      b.dense.followed_by_bn = spec_.batch_norm;
      if (spec_.batch_norm) {
        b.bn.emplace(width, static_cast<T>(spec_.bn_momentum), static_cast<T>(spec_.bn_eps));
      }
      b.relu = true;
      blocks_.push_back(std::move(b));
      in = width;
    }
    Block out;
    out.dense = DenseLayer<T>(in, spec_.output_dim);
    blocks_.push_back(std::move(out));
    initialize(rng);
  }

  /// LeCun-normal weights, zero biases, identity batch-norm affine and
  /// running statistics. Weight-normalized layers start on the unit sphere.
  void initialize(Rng& rng) {
    for (auto& b : blocks_) {
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(b.dense.in_features())));
      for (Index i = 0; i < b.dense.weight.size(); ++i) {
        b.dense.weight.data()[i] = static_cast<T>(dist(rng));
      }
      b.dense.bias.setZero();
      b.dense.grad_weight.setZero();
      b.dense.grad_bias.setZero();
      if (b.dense.normalize) project_weights(b.dense, T(1));
      if (b.bn) {
        b.bn->gamma.setOnes();
        b.bn->beta.setZero();
        b.bn->running_mean.setZero();
        b.bn->running_var.setOnes();
        b.bn->grad_gamma.setZero();
        b.bn->grad_beta.setZero();
      }
    }
    clear_cache();
  }

  const NetworkSpec& spec() const { return spec_; }
  std::vector<Block>& blocks() { return blocks_; }
  const std::vector<Block>& blocks() const { return blocks_; }
  std::size_t hidden_count() const { return blocks_.size() - 1; }
  DenseLayer<T>& output_layer() { return blocks_.back().dense; }
  const DenseLayer<T>& output_layer() const { return blocks_.back().dense; }

  /// Forward pass that caches intermediates for `backward`.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, StatUpdate update = StatUpdate::apply) {
    check_input(x);
    Tensor<T> h = x;
    for (auto& b : blocks_) {
      h = b.dense.forward(std::move(h));
      if (b.bn) h = b.bn->forward(std::move(h), mode, update);
      if (b.relu) h = relu(std::move(h));
    }
    has_cache_ = true;
    return h;
  }

  /// Reverse pass for the most recent `forward`. Overwrites the parameter
  /// gradient buffers (unless `param_grads` is false) and returns dL/dx.
  Tensor<T> backward(const Tensor<T>& upstream, bool param_grads = true) {
    if (!has_cache_) throw UsageError("backward called without a cached forward pass");
    Tensor<T> g = upstream;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      auto& b = blocks_[i];
      if (b.relu) {
        // The ReLU output is the next dense layer's cached input.
        const Tensor<T>& out = relu_output(i);
        g.array() = (out.array() > T(0)).select(g.array(), T(0));
      }
      if (b.bn) g = b.bn->backward(g, param_grads);
      g = b.dense.backward(g, param_grads);
    }
    return g;
  }

  /// Stateless evaluation; never touches caches or running statistics.
  /// When `hidden_outputs` is given it receives each hidden block's
  /// post-activation output.
  Tensor<T> infer(const Tensor<T>& x, Mode mode, std::vector<Tensor<T>>* hidden_outputs = nullptr) const {
    check_input(x);
    if (hidden_outputs) hidden_outputs->clear();
    Tensor<T> h = x;
    for (const auto& b : blocks_) {
      h = b.dense.apply(h);
      if (b.bn) h = b.bn->apply(h, mode);
      if (b.relu) {
        h = relu(std::move(h));
        if (hidden_outputs) hidden_outputs->push_back(h);
      }
    }
    return h;
  }

  std::vector<ParamRef<T>> parameters() {
    std::vector<ParamRef<T>> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      auto& b = blocks_[i];
      const bool last = i + 1 == blocks_.size();
      out.push_back({&b.dense.weight, &b.dense.grad_weight, ParamKind::weight, i, last, b.dense.normalize});
      out.push_back({&b.dense.bias, &b.dense.grad_bias, ParamKind::bias, i, last, false});
      if (b.bn) {
        out.push_back({&b.bn->gamma, &b.bn->grad_gamma, ParamKind::bn_scale, i, last, false});
        out.push_back({&b.bn->beta, &b.bn->grad_beta, ParamKind::bn_shift, i, last, false});
      }
    }
    return out;
  }

  /// Read-only view of the learnable tensors, same order as parameters().
  std::vector<const Tensor<T>*> parameter_values() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& b : blocks_) {
      out.push_back(&b.dense.weight);
      out.push_back(&b.dense.bias);
      if (b.bn) {
        out.push_back(&b.bn->gamma);
        out.push_back(&b.bn->beta);
      }
    }
    return out;
  }

  /// Running means and variances, in block order.
  std::vector<Tensor<T>*> running_stats() {
    std::vector<Tensor<T>*> out;
    for (auto& b : blocks_) {
      if (b.bn) {
        out.push_back(&b.bn->running_mean);
        out.push_back(&b.bn->running_var);
      }
    }
    return out;
  }

  std::vector<const Tensor<T>*> running_stats() const {
    std::vector<const Tensor<T>*> out;
    for (const auto& b : blocks_) {
      if (b.bn) {
        out.push_back(&b.bn->running_mean);
        out.push_back(&b.bn->running_var);
      }
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : parameters()) p.grad->setZero();
  }

  void clear_cache() {
    for (auto& b : blocks_) {
      b.dense.clear_cache();
      if (b.bn) b.bn->clear_cache();
    }
    has_cache_ = false;
  }

  bool has_cache() const { return has_cache_; }

 private:
  void check_input(const Tensor<T>& x) const {
    if (x.cols() != spec_.input_dim) {
      throw StructuralError("network input has " + std::to_string(x.cols()) + " features, expected " +
                            std::to_string(spec_.input_dim));
    }
    if (!x.allFinite()) {
      for (Index r = 0; r < x.rows(); ++r) {
        for (Index c = 0; c < x.cols(); ++c) {
          if (!std::isfinite(x(r, c))) {
            throw NumericalFault("network input has non-finite value at row " + std::to_string(r) +
                                 ", column " + std::to_string(c));
          }
        }
      }
    }
  }

  const Tensor<T>& relu_output(std::size_t block) const { return blocks_[block + 1].dense.cached_input(); }

  NetworkSpec spec_;
  std::vector<Block> blocks_;
  bool has_cache_ = false;
};

}  // namespace crossq::nn
