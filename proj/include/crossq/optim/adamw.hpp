#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crossq/nn/mlp.hpp"
#include "crossq/nn/projection.hpp"

namespace crossq::optim {

struct GroupOptions {
  double learning_rate = 3e-4;
  double weight_decay = 0.0;  // decoupled: theta -= lr * decay * theta
  double l2_scale = 0.0;      // loss-coupled: grad += l2_scale * theta
  bool project_after_step = false;
  double projection_norm = 1.0;
};

/// A set of parameters (indices into the parameter list handed to `step`)
/// sharing one set of options.
struct ParamGroup {
  GroupOptions options;
  std::vector<std::size_t> members;
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct StepReport {
  bool accepted = true;
  std::size_t degenerate_columns = 0;
  double max_column_norm_deviation = 0.0;  // over projected tensors, after projection
};

/// Adam with decoupled weight decay, an optional loss-coupled L2 term, and
/// a unit-norm projection hook per parameter group.
template <typename T>
class AdamW {
 public:
  AdamW() = default;

  AdamW(std::vector<ParamGroup> groups, std::span<const nn::ParamRef<T>> params, AdamHyper hyper = {})
      : groups_(std::move(groups)), hyper_(hyper) {
    std::vector<int> seen(params.size(), 0);
    for (const auto& g : groups_) {
      if (!(g.options.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
      if (g.options.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
      if (g.options.l2_scale < 0.0) throw ConfigError("l2 scale must be non-negative");
      for (std::size_t idx : g.members) {
        if (idx >= params.size()) throw StructuralError("parameter group member out of range");
        if (seen[idx]++) throw StructuralError("parameter assigned to more than one group");
        if (g.options.project_after_step && !params[idx].unit_columns) {
          throw StructuralError("projection group contains a parameter that is not weight-normalized");
        }
      }
    }
    first_moment_.reserve(params.size());
    second_moment_.reserve(params.size());
    for (const auto& p : params) {
      first_moment_.push_back(Tensor<T>::Zero(p.value->rows(), p.value->cols()));
      second_moment_.push_back(Tensor<T>::Zero(p.value->rows(), p.value->cols()));
    }
  }

  /// One optimizer step over `params`, which must be the same list (same
  /// order and shapes) the optimizer was built with. A step with any
  /// non-finite gradient is rejected without touching parameters or state.
  StepReport step(std::span<const nn::ParamRef<T>> params) {
    if (params.size() != first_moment_.size()) throw StructuralError("optimizer parameter list changed size");
    StepReport report;
    for (const auto& g : groups_) {
      for (std::size_t idx : g.members) {
        if (!params[idx].grad->allFinite()) {
          report.accepted = false;
          ++rejected_steps_;
          return report;
        }
      }
    }
    ++step_count_;
    const double t = static_cast<double>(step_count_);
    const T bc1 = static_cast<T>(1.0 - std::pow(hyper_.beta1, t));
    const T bc2 = static_cast<T>(1.0 - std::pow(hyper_.beta2, t));
    const T b1 = static_cast<T>(hyper_.beta1);
    const T b2 = static_cast<T>(hyper_.beta2);
    const T eps = static_cast<T>(hyper_.eps);

    for (const auto& g : groups_) {
      const T lr = static_cast<T>(g.options.learning_rate);
      const T decay = static_cast<T>(g.options.weight_decay);
      const T l2 = static_cast<T>(g.options.l2_scale);
      for (std::size_t idx : g.members) {
        auto theta = params[idx].value->array();
        require_same_shape(*params[idx].value, first_moment_[idx], "adam state");
        auto m = first_moment_[idx].array();
        auto v = second_moment_[idx].array();
        if (l2 != T(0)) {
          const auto grad = params[idx].grad->array() + l2 * theta;
          m = b1 * m + (T(1) - b1) * grad;
          v = b2 * v + (T(1) - b2) * grad.square();
        } else {
          const auto grad = params[idx].grad->array();
          m = b1 * m + (T(1) - b1) * grad;
          v = b2 * v + (T(1) - b2) * grad.square();
        }
        if (decay != T(0)) theta -= lr * decay * theta;
        theta -= lr * (m / bc1) / ((v / bc2).sqrt() + eps);
        if (g.options.project_after_step) {
          report.degenerate_columns +=
              nn::project_columns(*params[idx].value, static_cast<T>(g.options.projection_norm));
          report.max_column_norm_deviation =
              std::max(report.max_column_norm_deviation,
                       nn::max_column_norm_deviation(*params[idx].value, g.options.projection_norm));
        }
      }
    }
    degenerate_columns_ += report.degenerate_columns;
    max_norm_deviation_ = std::max(max_norm_deviation_, report.max_column_norm_deviation);
    return report;
  }

  const std::vector<ParamGroup>& groups() const { return groups_; }
  const AdamHyper& hyper() const { return hyper_; }
  std::uint64_t step_count() const { return step_count_; }
  std::size_t rejected_steps() const { return rejected_steps_; }
  std::size_t degenerate_columns() const { return degenerate_columns_; }
  /// Worst post-projection column-norm deviation seen over all steps.
  double max_norm_deviation() const { return max_norm_deviation_; }

  std::vector<Tensor<T>>& first_moments() { return first_moment_; }
  std::vector<Tensor<T>>& second_moments() { return second_moment_; }
  const std::vector<Tensor<T>>& first_moments() const { return first_moment_; }
  const std::vector<Tensor<T>>& second_moments() const { return second_moment_; }

  void restore_counters(std::uint64_t steps, std::size_t rejected, std::size_t degenerate, double max_dev) {
    step_count_ = steps;
    rejected_steps_ = rejected;
    degenerate_columns_ = degenerate;
    max_norm_deviation_ = max_dev;
  }

 private:
  std::vector<ParamGroup> groups_;
  AdamHyper hyper_;
  std::vector<Tensor<T>> first_moment_;
  std::vector<Tensor<T>> second_moment_;
  std::uint64_t step_count_ = 0;
  std::size_t rejected_steps_ = 0;
  std::size_t degenerate_columns_ = 0;
  double max_norm_deviation_ = 0.0;
};

}  // namespace crossq::optim
