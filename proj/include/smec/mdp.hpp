#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smec/errors.hpp"
#include "smec/policy.hpp"
#include "smec/rng.hpp"

namespace smec {

/// Discount in [0, 1).
class DiscountFactor {
 public:
  explicit DiscountFactor(double v) : value_(v) {
    if (!(v >= 0.0 && v < 1.0)) throw DomainError("discount must lie in [0, 1), got " + std::to_string(v));
  }
  double value() const { return value_; }
  operator double() const { return value_; }

 private:
  double value_;
};

/// Finite MDP. Transitions are stored row-major as (state, action, next_state),
/// rewards as (state, action). Terminal states are zero-reward absorbing self-loops.
struct TabularMdp {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::vector<double> transitions;
  std::vector<double> rewards;
  std::vector<double> initial_dist;
  double reward_max = 1.0;
  std::vector<std::size_t> terminals;  // sorted, unique

  TabularMdp() = default;
  TabularMdp(std::size_t s, std::size_t a)
      : num_states(s),
        num_actions(a),
        transitions(s * a * s, 0.0),
        rewards(s * a, 0.0),
        initial_dist(s, 0.0) {}

  double& p(std::size_t s, std::size_t a, std::size_t s2) { return transitions[(s * num_actions + a) * num_states + s2]; }
  double p(std::size_t s, std::size_t a, std::size_t s2) const {
    return transitions[(s * num_actions + a) * num_states + s2];
  }
  std::span<const double> next_row(std::size_t s, std::size_t a) const {
    return {transitions.data() + (s * num_actions + a) * num_states, num_states};
  }
  double& r(std::size_t s, std::size_t a) { return rewards[s * num_actions + a]; }
  double r(std::size_t s, std::size_t a) const { return rewards[s * num_actions + a]; }

  bool is_terminal(std::size_t s) const { return std::binary_search(terminals.begin(), terminals.end(), s); }

  /// Marks `s` terminal and rewrites its rows as a zero-reward self-loop.
  void make_terminal(std::size_t s) {
    for (std::size_t a = 0; a < num_actions; ++a) {
      for (std::size_t s2 = 0; s2 < num_states; ++s2) p(s, a, s2) = 0.0;
      p(s, a, s) = 1.0;
      r(s, a) = 0.0;
    }
    if (!is_terminal(s)) {
      terminals.insert(std::upper_bound(terminals.begin(), terminals.end(), s), s);
    }
  }

  bool operator==(const TabularMdp&) const = default;
};

struct Violation {
  std::string rule;
  std::string where;
};

/// Lists every broken TabularMdp invariant; empty iff the MDP is well formed.
inline std::vector<Violation> validate(const TabularMdp& m) {
  std::vector<Violation> out;
  const auto S = m.num_states, A = m.num_actions;
  if (m.transitions.size() != S * A * S) out.push_back({"shape", "transitions"});
  if (m.rewards.size() != S * A) out.push_back({"shape", "rewards"});
  if (m.initial_dist.size() != S) out.push_back({"shape", "initial_dist"});
  if (!out.empty()) return out;

  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      const std::string at = "(" + std::to_string(s) + "," + std::to_string(a) + ")";
      double sum = 0.0;
      bool range_ok = true;
      for (double p : m.next_row(s, a)) {
        if (p < 0.0 || p > 1.0) range_ok = false;
        sum += p;
      }
      if (!range_ok) out.push_back({"probability-range", at});
      if (std::abs(sum - 1.0) > 1e-12) out.push_back({"row-stochasticity", at});
      const double r = m.r(s, a);
      if (!(r >= 0.0 && r <= m.reward_max)) out.push_back({"reward-range", at});
    }
  }
  double init = 0.0;
  for (std::size_t s = 0; s < S; ++s) {
    if (m.initial_dist[s] < 0.0 || m.initial_dist[s] > 1.0)
      out.push_back({"probability-range", "initial_dist[" + std::to_string(s) + "]"});
    init += m.initial_dist[s];
  }
  if (std::abs(init - 1.0) > 1e-12) out.push_back({"initial-normalization", "initial_dist"});
  if (!std::is_sorted(m.terminals.begin(), m.terminals.end()) ||
      std::adjacent_find(m.terminals.begin(), m.terminals.end()) != m.terminals.end())
    out.push_back({"terminal-set", "terminals not sorted/unique"});
  for (std::size_t t : m.terminals) {
    if (t >= S) {
      out.push_back({"terminal-set", "terminal " + std::to_string(t) + " out of range"});
      continue;
    }
    for (std::size_t a = 0; a < A; ++a)
      if (m.p(t, a, t) != 1.0 || m.r(t, a) != 0.0)
        out.push_back({"terminal-absorbing", "(" + std::to_string(t) + "," + std::to_string(a) + ")"});
  }
  return out;
}

inline void check_policy_shape(const TabularMdp& m, const TabularPolicy& pi) {
  if (pi.num_states() != m.num_states || pi.num_actions() != m.num_actions)
    throw ShapeError("policy '" + pi.name() + "' shape " + std::to_string(pi.num_states()) + "x" +
                     std::to_string(pi.num_actions()) + " does not match MDP " + std::to_string(m.num_states) +
                     "x" + std::to_string(m.num_actions));
}

/// State-to-state kernel P^pi(s'|s).
inline Eigen::MatrixXd policy_kernel(const TabularMdp& m, const TabularPolicy& pi) {
  check_policy_shape(m, pi);
  const auto S = static_cast<Eigen::Index>(m.num_states);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(S, S);
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      const double w = pi(s, a);
      if (w == 0.0) continue;
      const auto row = m.next_row(s, a);
      for (std::size_t s2 = 0; s2 < m.num_states; ++s2) P(s, s2) += w * row[s2];
    }
  return P;
}

/// Expected one-step reward r^pi(s).
inline Eigen::VectorXd policy_reward(const TabularMdp& m, const TabularPolicy& pi) {
  check_policy_shape(m, pi);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.num_states));
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a) r(s) += pi(s, a) * m.r(s, a);
  return r;
}

inline Eigen::VectorXd to_eigen(std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(i) = v[i];
  return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

/// V^pi_gamma by a dense direct solve of (I - gamma P^pi) V = r^pi.
inline std::vector<double> exact_state_values(const TabularMdp& m, const TabularPolicy& pi, DiscountFactor gamma) {
  const Eigen::MatrixXd P = policy_kernel(m, pi);
  const Eigen::VectorXd r = policy_reward(m, pi);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - gamma.value() * P;
  return to_std(A.partialPivLu().solve(r));
}

inline QTable q_from_values(const TabularMdp& m, std::span<const double> v, double gamma) {
  QTable q(m.num_states, m.num_actions);
  for (std::size_t s = 0; s < m.num_states; ++s)
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      double next = 0.0;
      const auto row = m.next_row(s, a);
      for (std::size_t s2 = 0; s2 < m.num_states; ++s2) next += row[s2] * v[s2];
      q(s, a) = m.r(s, a) + gamma * next;
    }
  return q;
}

inline QTable exact_q_values(const TabularMdp& m, const TabularPolicy& pi, DiscountFactor gamma) {
  const auto v = exact_state_values(m, pi, gamma);
  return q_from_values(m, v, gamma.value());
}

/// d^pi = (1 - gamma) sum_t gamma^t P_t, starting from `start`.
inline std::vector<double> discounted_visitation(const TabularMdp& m, const TabularPolicy& pi, DiscountFactor gamma,
                                                 std::span<const double> start) {
  if (start.size() != m.num_states) throw ShapeError("start distribution has wrong length");
  const Eigen::MatrixXd P = policy_kernel(m, pi);
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - gamma.value() * P.transpose();
  const Eigen::VectorXd d = (1.0 - gamma.value()) * A.partialPivLu().solve(to_eigen(start));
  return to_std(d);
}

inline std::vector<double> point_mass(std::size_t n, std::size_t at) {
  std::vector<double> v(n, 0.0);
  v[at] = 1.0;
  return v;
}

struct Transition {
  std::size_t state = 0;
  std::size_t action = 0;
  double reward = 0.0;
  std::size_t next_state = 0;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

struct Trajectory {
  std::vector<Transition> steps;
  std::uint64_t seed = 0;

  bool operator==(const Trajectory&) const = default;
};

/// Samples s' ~ P(.|s,a). The reward is the tabulated expected reward r(s,a).
inline Transition step(const TabularMdp& m, std::size_t s, std::size_t a, SplitMix64& rng) {
  const std::size_t s2 = rng.categorical(m.next_row(s, a));
  return {s, a, m.r(s, a), s2, m.is_terminal(s2)};
}

inline std::size_t sample_initial(const TabularMdp& m, SplitMix64& rng) { return rng.categorical(m.initial_dist); }

/// Rollout from a given start state; stops after max_steps or on reaching a terminal.
inline Trajectory rollout_from(const TabularMdp& m, const TabularPolicy& pi, std::size_t start, std::size_t max_steps,
                               SplitMix64& rng) {
  Trajectory t;
  std::size_t s = start;
  for (std::size_t k = 0; k < max_steps; ++k) {
    const std::size_t a = rng.categorical(pi.row(s));
    const Transition tr = step(m, s, a, rng);
    t.steps.push_back(tr);
    if (tr.done) break;
    s = tr.next_state;
  }
  return t;
}

inline Trajectory rollout(const TabularMdp& m, const TabularPolicy& pi, std::size_t max_steps, std::uint64_t seed) {
  if (max_steps < 1) throw DomainError("rollout: max_steps must be >= 1");
  check_policy_shape(m, pi);
  SplitMix64 rng(seed);
  const std::size_t s0 = sample_initial(m, rng);
  Trajectory t = rollout_from(m, pi, s0, max_steps, rng);
  t.seed = seed;
  return t;
}

inline double monte_carlo_return(const Trajectory& t, double gamma) {
  double g = 0.0, w = 1.0;
  for (const auto& tr : t.steps) {
    g += w * tr.reward;
    w *= gamma;
  }
  return g;
}

/// Fraction of rollouts that end in a terminal state within max_steps.
inline double success_rate(const TabularMdp& m, const TabularPolicy& pi, std::size_t episodes, std::size_t max_steps,
                           std::uint64_t seed) {
  if (episodes == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t e = 0; e < episodes; ++e) {
    const auto t = rollout(m, pi, max_steps, derive_seed(seed, e));
    if (!t.steps.empty() && t.steps.back().done) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(episodes);
}

}  // namespace smec
