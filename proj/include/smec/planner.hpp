#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "smec/errors.hpp"

namespace smec {

/// Selection bookkeeping for segment-wise behavior switching. Index 0 is
/// the task policy, 1..K the priors.
struct PlannerState {
  std::size_t num_policies = 1;
  std::uint64_t T = 0;
  std::vector<std::uint64_t> N1;  // selections per policy
  std::vector<std::uint64_t> N2;  // (from, to) switch counts, row-major
  std::size_t current = 0;
  std::size_t steps_in_segment = 0;
  std::size_t h = 1;
  double c = 0.0;

  PlannerState() = default;
  PlannerState(std::size_t policies, std::size_t segment_length, double ucb_coefficient)
      : num_policies(policies),
        N1(policies, 0),
        N2(policies * policies, 0),
        h(segment_length),
        c(ucb_coefficient) {
    if (policies < 1) throw DomainError("planner needs at least the task policy");
    if (segment_length < 1) throw DomainError("segment length h must be >= 1");
    if (!(ucb_coefficient >= 0.0)) throw DomainError("UCB coefficient must be >= 0");
  }

  std::uint64_t n2(std::size_t from, std::size_t to) const { return N2[from * num_policies + to]; }

  /// True when the step about to be advanced closes the current segment.
  bool at_boundary() const { return steps_in_segment + 1 == h; }

  /// New episode: the task policy controls the first segment.
  void reset_episode() {
    current = 0;
    steps_in_segment = 0;
  }
};

/// Argmax; ties go to the task policy, then the lowest prior index.
inline std::size_t select_greedy(std::span<const double> values) {
  if (values.empty()) throw DomainError("select_greedy: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

/// c * sqrt(log(2 max(T,1)) / (N_nu + N_{current->nu})); +inf when the denominator is zero.
inline double ucb_bonus(const PlannerState& p, std::size_t candidate) {
  const auto n = p.N1[candidate] + p.n2(p.current, candidate);
  if (n == 0) return std::numeric_limits<double>::infinity();
  const double t = static_cast<double>(std::max<std::uint64_t>(p.T, 1));
  return p.c * std::sqrt(std::log(2.0 * t) / static_cast<double>(n));
}

inline std::vector<double> ucb_bonuses(const PlannerState& p) {
  std::vector<double> b(p.num_policies);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = ucb_bonus(p, i);
  return b;
}

/// Argmax of value + bonus. Infinite bonuses beat every finite score and are
/// tie-broken among themselves like select_greedy.
inline std::size_t select_ucb(std::span<const double> values, const PlannerState& p) {
  if (values.empty()) throw DomainError("select_ucb: no candidates");
  if (values.size() != p.num_policies) throw ShapeError("select_ucb: value vector length != 1 + K");
  std::vector<double> score(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double b = ucb_bonus(p, i);
    score[i] = std::isinf(b) ? std::numeric_limits<double>::infinity() : values[i] + b;
  }
  return select_greedy(score);
}

/// Advances the segment clock by one environment step. A switch may only be
/// passed on the last step of a segment.
inline void advance(PlannerState& p, std::optional<std::size_t> switch_to) {
  if (switch_to) {
    if (!p.at_boundary())
      throw SwitchError("switch requested mid-segment (step " + std::to_string(p.steps_in_segment) + " of " +
                        std::to_string(p.h) + ")");
    const std::size_t to = *switch_to;
    if (to >= p.num_policies) throw DomainError("switch target out of range");
    ++p.T;
    ++p.N1[to];
    ++p.N2[p.current * p.num_policies + to];
    p.current = to;
    p.steps_in_segment = 0;
    return;
  }
  p.steps_in_segment = p.at_boundary() ? 0 : p.steps_in_segment + 1;
}

/// Audit entry for one switch opportunity.
struct SelectionRecord {
  std::size_t step = 0;
  std::size_t state = 0;
  std::size_t action = 0;
  std::vector<double> values;
  std::vector<double> bonuses;
  std::size_t chosen = 0;

  bool operator==(const SelectionRecord&) const = default;
};

}  // namespace smec
