#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "smec/errors.hpp"
#include "smec/mdp.hpp"
#include "smec/policy.hpp"
#include "smec/rng.hpp"

namespace smec {

struct PriorTrainingSettings {
  double gamma = 0.95;
  double learning_rate = 1.0;
  std::size_t episodes_per_round = 200;
  std::size_t max_rounds = 200;
  std::size_t episode_length = 100;  // also the rollout horizon for the success check
  std::size_t eval_episodes = 100;
  double success_threshold = 0.99;
  double convergence_tol = 1e-12;
  std::string name = "prior";
};

/// Tabular Q-learning with exploring starts and uniform behavior, run in
/// rounds until the table stops moving; the greedy policy is then accepted if
/// it reaches a terminal from the task's start distribution often enough.
/// With learning_rate 1 on a deterministic MDP the fixed point is reached
/// exactly, so equal-length routes tie bit-for-bit and the lowest action wins.
inline TabularPolicy train_prior(const TabularMdp& mdp, const PriorTrainingSettings& cfg, std::uint64_t seed) {
  if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0)) throw DomainError("prior learning rate must lie in (0, 1]");
  (void)DiscountFactor(cfg.gamma);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    if (!mdp.is_terminal(s)) starts.push_back(s);
  if (starts.empty()) throw NonConvergenceError("train_prior: MDP has no non-terminal state");

  SplitMix64 rng(derive_seed(seed, stream::behavior));
  QTable q(mdp.num_states, mdp.num_actions);
  for (std::size_t round = 0; round < cfg.max_rounds; ++round) {
    double max_delta = 0.0;
    for (std::size_t e = 0; e < cfg.episodes_per_round; ++e) {
      std::size_t s = starts[rng.below(starts.size())];
      for (std::size_t t = 0; t < cfg.episode_length; ++t) {
        const std::size_t a = rng.below(mdp.num_actions);
        const Transition tr = step(mdp, s, a, rng);
        double boot = 0.0;
        if (!tr.done) {
          const auto next = q.row(tr.next_state);
          boot = *std::max_element(next.begin(), next.end());
        }
        const double old = q(s, a);
        q(s, a) = old + cfg.learning_rate * (tr.reward + cfg.gamma * boot - old);
        max_delta = std::max(max_delta, std::abs(q(s, a) - old));
        if (tr.done) break;
        s = tr.next_state;
      }
    }
    const bool last = round + 1 == cfg.max_rounds;
    if ((round > 0 && max_delta <= cfg.convergence_tol) || last) {
      TabularPolicy pi = greedy_from_q(q, cfg.name);
      const double sr = success_rate(mdp, pi, cfg.eval_episodes, cfg.episode_length, derive_seed(seed, stream::rollout));
      if (sr >= cfg.success_threshold) return pi;
      throw NonConvergenceError("train_prior: greedy policy success rate " + std::to_string(sr) + " < " +
                                std::to_string(cfg.success_threshold) + " after " + std::to_string(round + 1) +
                                " rounds");
    }
  }
  throw NonConvergenceError("train_prior: no training rounds configured");
}

}  // namespace smec
