#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "smec/agent.hpp"
#include "smec/errors.hpp"
#include "smec/io.hpp"
#include "smec/mdp.hpp"

namespace smec {

/// One behavior segment: the steps from a segment start until the next
/// segment start or episode end, controlled by a single policy.
struct Segment {
  std::size_t episode = 0;
  std::size_t step = 0;  // global step of the first action
  std::size_t t = 0;     // within-episode index of the first action
  int controller = 0;    // -1 during warm-start
};

/// Segments in order of occurrence. Requires recorded transitions.
inline std::vector<Segment> segments(const RunLog& log, bool include_warm = false) {
  if (log.env_steps > 0 && log.transitions.empty())
    throw DomainError("segments: run log carries no transition records");
  std::vector<Segment> out;
  for (const auto& r : log.transitions) {
    if (r.t % log.h != 0) continue;
    if (r.controller < 0 && !include_warm) continue;
    out.push_back({r.episode, r.step, r.t, r.controller});
  }
  return out;
}

struct UtilizationSummary {
  std::size_t num_policies = 1;
  std::vector<std::vector<double>> fractions;  // [window][policy]
  std::vector<std::size_t> window_end_step;    // step of the last segment start in each window
  double final_prior_fraction = 0.0;

  double prior_fraction(std::size_t w) const { return 1.0 - fractions.at(w).at(0); }
};

/// Splits the post-warm-start segments into `windows` contiguous groups of
/// near-equal size and reports the share of segments each policy controlled.
inline UtilizationSummary utilization(const RunLog& log, std::size_t windows) {
  if (windows == 0) throw DomainError("utilization: window count must be >= 1");
  const auto seg = segments(log);
  if (seg.size() < windows)
    throw DomainError("utilization: too few segments (" + std::to_string(seg.size()) + " for " +
                      std::to_string(windows) + " windows)");
  UtilizationSummary u;
  u.num_policies = log.num_policies;
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t lo = w * seg.size() / windows;
    const std::size_t hi = (w + 1) * seg.size() / windows;
    std::vector<double> f(log.num_policies, 0.0);
    for (std::size_t i = lo; i < hi; ++i) f[static_cast<std::size_t>(seg[i].controller)] += 1.0;
    for (double& x : f) x /= static_cast<double>(hi - lo);
    u.fractions.push_back(std::move(f));
    u.window_end_step.push_back(seg[hi - 1].step);
  }
  u.final_prior_fraction = u.prior_fraction(windows - 1);
  return u;
}

/// (segment start within the episode, controlling policy) for one episode.
inline std::vector<std::pair<std::size_t, int>> switch_dynamics(const RunLog& log, std::size_t episode) {
  std::vector<std::pair<std::size_t, int>> out;
  for (const auto& r : log.transitions) {
    if (r.episode != episode) continue;
    if (r.t % log.h == 0) out.emplace_back(r.t, r.controller);
  }
  if (out.empty()) throw DomainError("switch_dynamics: episode " + std::to_string(episode) + " is not in the log");
  return out;
}

/// First evaluation step reaching `threshold`, if any.
inline std::optional<std::size_t> steps_to_threshold(const std::vector<EvalRecord>& evals, double threshold) {
  for (const auto& e : evals)
    if (e.success_rate >= threshold) return e.step;
  return std::nullopt;
}

/// Mean evaluation success over the run.
inline double success_auc(const std::vector<EvalRecord>& evals) {
  if (evals.empty()) return 0.0;
  double s = 0.0;
  for (const auto& e : evals) s += e.success_rate;
  return s / static_cast<double>(evals.size());
}

/// Per-eval metrics rows; utilization covers the segments that started since
/// the previous evaluation ("nan" when none did, e.g. during warm-start).
inline std::string metrics_csv(const RunLog& log) {
  const std::size_t K = log.num_policies - 1;
  std::string out = "step,success_rate,mean_return,util_task";
  for (std::size_t i = 1; i <= K; ++i) out += ",util_prior_" + std::to_string(i);
  out += '\n';
  const auto seg = log.transitions.empty() ? std::vector<Segment>{} : segments(log);
  std::size_t j = 0;
  for (const auto& e : log.evals) {
    std::vector<double> f(K + 1, 0.0);
    std::size_t n = 0;
    for (; j < seg.size() && seg[j].step < e.step; ++j, ++n) f[static_cast<std::size_t>(seg[j].controller)] += 1.0;
    out += std::to_string(e.step) + ',' + fmt(e.success_rate) + ',' + fmt(e.mean_return);
    for (double x : f) out += ',' + (n ? fmt(x / static_cast<double>(n)) : std::string("nan"));
    out += '\n';
  }
  return out;
}

inline std::string utilization_csv(const UtilizationSummary& u) {
  std::string out = "window,end_step,util_task";
  for (std::size_t i = 1; i < u.num_policies; ++i) out += ",util_prior_" + std::to_string(i);
  out += '\n';
  for (std::size_t w = 0; w < u.fractions.size(); ++w) {
    out += std::to_string(w) + ',' + std::to_string(u.window_end_step[w]);
    for (double x : u.fractions[w]) out += ',' + fmt(x);
    out += '\n';
  }
  return out;
}

// ---- value accuracy -------------------------------------------------------

struct ValuePoint {
  std::size_t step = 0;
  double predicted = 0.0;
  double exact = 0.0;
  double monte_carlo = 0.0;
};

struct PriorValueSeries {
  std::string name;
  double discount = 0.0;
  std::vector<ValuePoint> points;
};

/// V(s) = sum_a nu(a|s) Q(s, a, head) from a flat hybrid value vector.
inline double head_state_value(const std::vector<double>& values, std::size_t heads, std::size_t num_actions,
                               std::size_t head, const TabularPolicy& nu, std::size_t s) {
  double v = 0.0;
  for (std::size_t a = 0; a < num_actions; ++a) v += nu(s, a) * values[(s * num_actions + a) * heads + head];
  return v;
}

/// Discounted Monte Carlo return of `pi` from the initial distribution.
inline double monte_carlo_value(const TabularMdp& mdp, const TabularPolicy& pi, double gamma, std::size_t rollouts,
                                std::uint64_t seed) {
  std::size_t len = 1;
  if (gamma > 0.0) len = static_cast<std::size_t>(std::ceil(std::log(1e-12) / std::log(gamma))) + 1;
  len = std::min<std::size_t>(len, 100000);
  double sum = 0.0;
  for (std::size_t k = 0; k < rollouts; ++k) sum += monte_carlo_return(rollout(mdp, pi, len, derive_seed(seed, k)), gamma);
  return rollouts ? sum / static_cast<double>(rollouts) : 0.0;
}

/// Start-state value of every prior head at each snapshot, against the exact
/// value of the prior under that head's discount and a 100-rollout Monte Carlo estimate.
inline std::vector<PriorValueSeries> value_accuracy_report(const RunLog& log, const TabularMdp& mdp,
                                                           const PriorSet& priors, std::size_t rollouts = 100,
                                                           std::uint64_t seed = 0) {
  if (priors.size() + 1 != log.num_policies) throw ShapeError("value_accuracy_report: prior count does not match log");
  if (log.snapshots.empty()) throw DomainError("value_accuracy_report: log has no value snapshots");
  const std::size_t heads = log.num_policies;
  std::vector<PriorValueSeries> out;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const double g = log.discounts.at(i + 1);
    const auto exact_v = exact_state_values(mdp, priors[i], DiscountFactor(g));
    double exact = 0.0;
    for (std::size_t s = 0; s < mdp.num_states; ++s) exact += mdp.initial_dist[s] * exact_v[s];
    const double mc = monte_carlo_value(mdp, priors[i], g, rollouts, derive_seed(seed, i));
    PriorValueSeries ser{priors[i].name(), g, {}};
    for (const auto& snap : log.snapshots) {
      double pred = 0.0;
      for (std::size_t s = 0; s < mdp.num_states; ++s)
        if (mdp.initial_dist[s] > 0.0)
          pred += mdp.initial_dist[s] * head_state_value(snap.values, heads, log.num_actions, i + 1, priors[i], s);
      ser.points.push_back({snap.step, pred, exact, mc});
    }
    out.push_back(std::move(ser));
  }
  return out;
}

inline std::string value_accuracy_csv(const std::vector<PriorValueSeries>& rep) {
  std::string out = "prior,name,discount,step,predicted,exact,monte_carlo\n";
  for (std::size_t i = 0; i < rep.size(); ++i)
    for (const auto& p : rep[i].points)
      out += std::to_string(i + 1) + ',' + rep[i].name + ',' + fmt(rep[i].discount) + ',' + std::to_string(p.step) +
             ',' + fmt(p.predicted) + ',' + fmt(p.exact) + ',' + fmt(p.monte_carlo) + '\n';
  return out;
}

/// Share of logged transitions starting in each state.
inline std::vector<double> visitation_frequencies(const RunLog& log) {
  std::vector<double> f(log.num_states, 0.0);
  for (const auto& r : log.transitions) f[r.transition.state] += 1.0;
  if (!log.transitions.empty())
    for (double& x : f) x /= static_cast<double>(log.transitions.size());
  return f;
}

/// States whose share of logged transitions is at least `min_visitation`.
inline std::vector<std::size_t> visited_states(const RunLog& log, double min_visitation) {
  const auto freq = visitation_frequencies(log);
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s < freq.size(); ++s)
    if (freq[s] >= min_visitation) out.push_back(s);
  return out;
}

/// |predicted - exact| of each prior head's state value at `states`, per prior.
inline std::vector<std::vector<double>> head_errors_at(const HybridQTable& t, const TabularMdp& mdp,
                                                       const PriorSet& priors, const std::vector<std::size_t>& states) {
  if (priors.size() + 1 != t.num_heads()) throw ShapeError("head_errors_at: prior count does not match table");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    const auto exact_v = exact_state_values(mdp, priors[i], DiscountFactor(t.discounts()[i + 1]));
    std::vector<double> err;
    for (std::size_t s : states)
      err.push_back(std::abs(head_state_value(t.values(), t.num_heads(), t.num_actions(), i + 1, priors[i], s) -
                             exact_v[s]));
    out.push_back(std::move(err));
  }
  return out;
}

/// head_errors_at over the states the run itself visited at least `min_visitation` of the time.
inline std::vector<std::vector<double>> head_errors_on_visited(const RunLog& log, const TabularMdp& mdp,
                                                               const PriorSet& priors, double min_visitation) {
  return head_errors_at(log.final_table, mdp, priors, visited_states(log, min_visitation));
}

}  // namespace smec
