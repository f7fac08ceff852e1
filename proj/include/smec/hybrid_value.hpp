#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "smec/errors.hpp"
#include "smec/mdp.hpp"
#include "smec/policy.hpp"
#include "smec/rng.hpp"

namespace smec {

/// Short-horizon discount schedule: gamma_bar = epsilon^(1/h), so gamma_bar^h = epsilon.
struct TruncationSchedule {
  double epsilon;
  std::size_t h;
  double gamma_bar;
};

inline DiscountFactor truncated_discount(double epsilon, std::size_t h) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw DomainError("truncation epsilon must lie in (0, 1)");
  if (h < 1) throw DomainError("truncation horizon h must be >= 1");
  if (h == 1) return DiscountFactor(epsilon);
  return DiscountFactor(std::pow(epsilon, 1.0 / static_cast<double>(h)));
}

inline TruncationSchedule make_schedule(double epsilon, std::size_t h) {
  return {epsilon, h, truncated_discount(epsilon, h).value()};
}

/// Value tensor indexed (state, action, head). Head 0 evaluates the task
/// policy with the long discount, head i >= 1 evaluates prior i with its own
/// (normally truncated) discount.
class HybridQTable {
 public:
  HybridQTable() = default;
  HybridQTable(std::size_t num_states, std::size_t num_actions, std::vector<double> discounts, double reward_max)
      : num_states_(num_states),
        num_actions_(num_actions),
        discounts_(std::move(discounts)),
        reward_max_(reward_max),
        values_(num_states * num_actions * discounts_.size(), 0.0) {
    if (discounts_.empty()) throw DomainError("hybrid table needs at least the task head");
    for (double d : discounts_) (void)DiscountFactor(d);
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_heads() const { return discounts_.size(); }
  const std::vector<double>& discounts() const { return discounts_; }
  double reward_max() const { return reward_max_; }

  /// Upper end of the admissible range of head h.
  double bound(std::size_t head) const { return reward_max_ / (1.0 - discounts_[head]); }

  double operator()(std::size_t s, std::size_t a, std::size_t head) const { return values_[index(s, a, head)]; }
  double& operator()(std::size_t s, std::size_t a, std::size_t head) { return values_[index(s, a, head)]; }

  /// One head as a (state, action) table.
  QTable head(std::size_t h) const {
    QTable q(num_states_, num_actions_);
    for (std::size_t s = 0; s < num_states_; ++s)
      for (std::size_t a = 0; a < num_actions_; ++a) q(s, a) = (*this)(s, a, h);
    return q;
  }

  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool operator==(const HybridQTable&) const = default;

 private:
  std::size_t index(std::size_t s, std::size_t a, std::size_t h) const {
    return (s * num_actions_ + a) * discounts_.size() + h;
  }

  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> discounts_;
  double reward_max_ = 1.0;
  std::vector<double> values_;
};

/// Bootstrapping copy of the hybrid table.
struct TargetTable {
  HybridQTable table;
  std::size_t sync_counter = 0;
  std::size_t updates = 0;

  TargetTable() = default;
  explicit TargetTable(const HybridQTable& t) : table(t) {}
};

/// Counts one update and hard-copies the main table every `period` updates.
inline void sync_target(const HybridQTable& table, TargetTable& target, std::size_t period) {
  if (period < 1) throw DomainError("target sync period must be >= 1");
  ++target.updates;
  if (target.updates % period == 0) {
    target.table = table;
    ++target.sync_counter;
  }
}

/// Polyak averaging alternative: target <- (1 - tau) target + tau table.
inline void polyak_target(const HybridQTable& table, TargetTable& target, double tau) {
  auto& tv = target.table.values();
  const auto& v = table.values();
  for (std::size_t i = 0; i < v.size(); ++i) tv[i] = (1.0 - tau) * tv[i] + tau * v[i];
  ++target.updates;
}

/// FIFO ring buffer with uniform sampling (with replacement).
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw DomainError("replay capacity must be >= 1");
    items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  void push(const Transition& t) {
    if (items_.size() < capacity_) {
      items_.push_back(t);
    } else {
      items_[head_] = t;
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const { return items_[(head_ + i) % items_.size()]; }

  void sample(std::size_t batch, SplitMix64& rng, std::vector<Transition>& out) const {
    out.clear();
    for (std::size_t b = 0; b < batch; ++b) out.push_back(items_[rng.below(items_.size())]);
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> items_;
};

/// Per-transition, per-head bootstrap targets, laid out (transition, head).
/// Expectations over the next action are exact weighted sums; done transitions
/// do not bootstrap.
inline std::vector<double> td_targets(std::span<const Transition> batch, const TargetTable& target,
                                      const TabularPolicy& task_policy, const PriorSet& priors) {
  const HybridQTable& q = target.table;
  const std::size_t heads = q.num_heads();
  if (heads != priors.size() + 1) throw ShapeError("td_targets: head count does not match 1 + K");
  check_prior_shapes(priors, q.num_states(), q.num_actions());
  if (task_policy.num_states() != q.num_states() || task_policy.num_actions() != q.num_actions())
    throw ShapeError("td_targets: task policy shape does not match table");

  std::vector<double> out(batch.size() * heads);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    for (std::size_t h = 0; h < heads; ++h) {
      double boot = 0.0;
      if (!t.done) {
        const TabularPolicy& nu = h == 0 ? task_policy : priors[h - 1];
        for (std::size_t a = 0; a < q.num_actions(); ++a) {
          const double w = nu(t.next_state, a);
          if (w != 0.0) boot += w * q(t.next_state, a, h);
        }
      }
      out[i * heads + h] = t.reward + q.discounts()[h] * boot;
    }
  }
  return out;
}

/// Q <- Q + lr (target - Q) at each visited (s, a), then clipping to
/// [0, R_max / (1 - discount_h)]. Only the first `trained_heads` heads move.
inline void apply_update(HybridQTable& table, std::span<const Transition> batch, std::span<const double> targets,
                         double learning_rate, std::size_t trained_heads = static_cast<std::size_t>(-1)) {
  if (!(learning_rate >= 0.0 && learning_rate <= 1.0)) throw DomainError("learning rate must lie in [0, 1]");
  const std::size_t heads = table.num_heads();
  const std::size_t active = std::min(heads, trained_heads);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Transition& t = batch[i];
    for (std::size_t h = 0; h < active; ++h) {
      double& q = table(t.state, t.action, h);
      q += learning_rate * (targets[i * heads + h] - q);
      q = std::clamp(q, 0.0, table.bound(h));
    }
  }
}

/// Raw head values at (s, a), task head first.
inline std::vector<double> head_values_at(const HybridQTable& table, std::size_t state, std::size_t action) {
  std::vector<double> v(table.num_heads());
  for (std::size_t h = 0; h < v.size(); ++h) v[h] = table(state, action, h);
  return v;
}

}  // namespace smec
