#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smec/errors.hpp"

namespace smec {

/// Per-state action distribution stored row-major as (state, action).
/// The task policy and every prior share this representation.
class TabularPolicy {
 public:
  TabularPolicy() = default;
  TabularPolicy(std::size_t num_states, std::size_t num_actions, std::string name = {})
      : num_states_(num_states),
        num_actions_(num_actions),
        probs_(num_states * num_actions, num_actions ? 1.0 / static_cast<double>(num_actions) : 0.0),
        name_(std::move(name)) {}

  static TabularPolicy uniform(std::size_t num_states, std::size_t num_actions, std::string name = "uniform") {
    return TabularPolicy(num_states, num_actions, std::move(name));
  }

  /// One-hot rows from a per-state action choice.
  static TabularPolicy deterministic(std::span<const std::size_t> actions, std::size_t num_actions,
                                     std::string name = {}) {
    TabularPolicy p(actions.size(), num_actions, std::move(name));
    for (std::size_t s = 0; s < actions.size(); ++s) p.set_deterministic(s, actions[s]);
    return p;
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

  double operator()(std::size_t s, std::size_t a) const { return probs_[s * num_actions_ + a]; }
  double& operator()(std::size_t s, std::size_t a) { return probs_[s * num_actions_ + a]; }

  std::span<const double> row(std::size_t s) const {
    return {probs_.data() + s * num_actions_, num_actions_};
  }
  std::span<double> row(std::size_t s) { return {probs_.data() + s * num_actions_, num_actions_}; }

  void set_deterministic(std::size_t s, std::size_t a) {
    auto r = row(s);
    std::fill(r.begin(), r.end(), 0.0);
    r[a] = 1.0;
  }

  const std::vector<double>& data() const { return probs_; }
  std::vector<double>& data() { return probs_; }

  bool is_deterministic() const {
    for (double p : probs_)
      if (p != 0.0 && p != 1.0) return false;
    return true;
  }

  /// Largest |row sum - 1| and whether all entries are in [0, 1].
  bool is_stochastic(double tol = 1e-12) const {
    for (std::size_t s = 0; s < num_states_; ++s) {
      double sum = 0.0;
      for (double p : row(s)) {
        if (p < 0.0 || p > 1.0) return false;
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) return false;
    }
    return true;
  }

  bool operator==(const TabularPolicy& o) const {
    return num_states_ == o.num_states_ && num_actions_ == o.num_actions_ && probs_ == o.probs_;
  }

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  std::vector<double> probs_;
  std::string name_;
};

/// The frozen prior policies. K = size(); K = 0 degenerates to learning from scratch.
using PriorSet = std::vector<TabularPolicy>;

/// Real table indexed (state, action).
struct QTable {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> values;

  QTable() = default;
  QTable(std::size_t s, std::size_t a, double fill = 0.0) : num_states(s), num_actions(a), values(s * a, fill) {}

  double operator()(std::size_t s, std::size_t a) const { return values[s * num_actions + a]; }
  double& operator()(std::size_t s, std::size_t a) { return values[s * num_actions + a]; }
  std::span<const double> row(std::size_t s) const { return {values.data() + s * num_actions, num_actions}; }
};

/// Argmax with lowest-index tie break.
inline std::size_t argmax_lowest(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

inline TabularPolicy greedy_from_q(const QTable& q, std::string name = "greedy") {
  TabularPolicy p(q.num_states, q.num_actions, std::move(name));
  for (std::size_t s = 0; s < q.num_states; ++s) p.set_deterministic(s, argmax_lowest(q.row(s)));
  return p;
}

/// Writes softmax(row / temperature) into `out`; max-shifted for stability.
inline void softmax_row(std::span<const double> row, double temperature, std::span<double> out) {
  const double mx = *std::max_element(row.begin(), row.end());
  double z = 0.0;
  for (std::size_t a = 0; a < row.size(); ++a) {
    out[a] = std::exp((row[a] - mx) / temperature);
    z += out[a];
  }
  for (double& v : out) v /= z;
}

inline TabularPolicy boltzmann_from_q(const QTable& q, double temperature, std::string name = "boltzmann") {
  if (!(temperature > 0.0)) throw DomainError("boltzmann_from_q: temperature must be > 0");
  TabularPolicy p(q.num_states, q.num_actions, std::move(name));
  for (std::size_t s = 0; s < q.num_states; ++s) softmax_row(q.row(s), temperature, p.row(s));
  return p;
}

/// Raises ShapeError unless every prior matches the given shape.
inline void check_prior_shapes(const PriorSet& priors, std::size_t num_states, std::size_t num_actions) {
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (priors[i].num_states() != num_states || priors[i].num_actions() != num_actions)
      throw ShapeError("prior " + std::to_string(i) + " ('" + priors[i].name() + "') has shape " +
                       std::to_string(priors[i].num_states()) + "x" + std::to_string(priors[i].num_actions()) +
                       ", expected " + std::to_string(num_states) + "x" + std::to_string(num_actions));
  }
}

}  // namespace smec
