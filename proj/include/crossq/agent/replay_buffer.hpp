#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "crossq/random.hpp"
#include "crossq/tensor.hpp"

namespace crossq::agent {

template <typename T>
struct Transition {
  std::vector<T> state;
  std::vector<T> action;
  T reward = T(0);
  std::vector<T> next_state;
  bool done = false;  // genuine terminal only; time-limit truncation stays false
};

template <typename T>
struct Batch {
  Tensor<T> states;
  Tensor<T> actions;
  Tensor<T> rewards;  // [B, 1]
  Tensor<T> next_states;
  Tensor<T> dones;    // [B, 1], 1 for terminal

  Index size() const { return states.rows(); }
};

/// Fixed-capacity ring buffer with uniform sampling; the oldest entry is
/// overwritten once full.
template <typename T>
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity, std::size_t state_dim, std::size_t action_dim)
      : capacity_(capacity), state_dim_(state_dim), action_dim_(action_dim) {
    if (capacity == 0) throw ConfigError("replay buffer capacity must be positive");
  }

  void add(const Transition<T>& t) {
    if (t.state.size() != state_dim_ || t.next_state.size() != state_dim_ || t.action.size() != action_dim_) {
      throw StructuralError("transition does not match buffer dimensions");
    }
    for (T a : t.action) {
      if (!(a >= T(-1) && a <= T(1))) throw NumericalFault("transition action outside [-1, 1]");
    }
    if (!std::isfinite(t.reward)) throw NumericalFault("transition reward is not finite");
    if (!all_finite(std::span<const T>(t.state)) || !all_finite(std::span<const T>(t.next_state))) {
      throw NumericalFault("transition state is not finite");
    }
    if (size_ < capacity_) {
      states_.insert(states_.end(), t.state.begin(), t.state.end());
      actions_.insert(actions_.end(), t.action.begin(), t.action.end());
      rewards_.push_back(t.reward);
      next_states_.insert(next_states_.end(), t.next_state.begin(), t.next_state.end());
      dones_.push_back(t.done ? T(1) : T(0));
      ++size_;
    } else {
      std::copy(t.state.begin(), t.state.end(), states_.begin() + cursor_ * state_dim_);
      std::copy(t.action.begin(), t.action.end(), actions_.begin() + cursor_ * action_dim_);
      rewards_[cursor_] = t.reward;
      std::copy(t.next_state.begin(), t.next_state.end(), next_states_.begin() + cursor_ * state_dim_);
      dones_[cursor_] = t.done ? T(1) : T(0);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (size_ == 0) throw UsageError("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
    std::vector<std::size_t> idx(batch);
    for (auto& i : idx) i = pick(rng);
    return idx;
  }

  Batch<T> gather(std::span<const std::size_t> idx) const {
    const auto n = static_cast<Index>(idx.size());
    const auto sd = static_cast<Index>(state_dim_);
    const auto ad = static_cast<Index>(action_dim_);
    Batch<T> b{Tensor<T>(n, sd), Tensor<T>(n, ad), Tensor<T>(n, 1), Tensor<T>(n, sd), Tensor<T>(n, 1)};
    for (Index r = 0; r < n; ++r) {
      const std::size_t i = idx[static_cast<std::size_t>(r)];
      for (Index c = 0; c < sd; ++c) {
        b.states(r, c) = states_[i * state_dim_ + static_cast<std::size_t>(c)];
        b.next_states(r, c) = next_states_[i * state_dim_ + static_cast<std::size_t>(c)];
      }
      for (Index c = 0; c < ad; ++c) b.actions(r, c) = actions_[i * action_dim_ + static_cast<std::size_t>(c)];
      b.rewards(r, 0) = rewards_[i];
      b.dones(r, 0) = dones_[i];
    }
    return b;
  }

  Batch<T> sample(std::size_t batch, Rng& rng) const {
    const auto idx = sample_indices(batch, rng);
    return gather(idx);
  }

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }

  // Raw storage, oldest-first ordering is not implied once the ring wraps.
  const std::vector<T>& states() const { return states_; }
  const std::vector<T>& actions() const { return actions_; }
  const std::vector<T>& rewards() const { return rewards_; }
  const std::vector<T>& next_states() const { return next_states_; }
  const std::vector<T>& dones() const { return dones_; }

  void restore(std::size_t size, std::size_t cursor, std::vector<T> states, std::vector<T> actions,
               std::vector<T> rewards, std::vector<T> next_states, std::vector<T> dones) {
    if (size > capacity_ || cursor >= capacity_ || states.size() != size * state_dim_ ||
        next_states.size() != size * state_dim_ || actions.size() != size * action_dim_ ||
        rewards.size() != size || dones.size() != size) {
      throw StructuralError("replay buffer restore: inconsistent sizes");
    }
    size_ = size;
    cursor_ = cursor;
    states_ = std::move(states);
    actions_ = std::move(actions);
    rewards_ = std::move(rewards);
    next_states_ = std::move(next_states);
    dones_ = std::move(dones);
  }

 private:
  std::size_t capacity_ = 1;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t size_ = 0;
  std::size_t cursor_ = 0;
  std::vector<T> states_;
  std::vector<T> actions_;
  std::vector<T> rewards_;
  std::vector<T> next_states_;
  std::vector<T> dones_;
};

}  // namespace crossq::agent
