#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "smec/hybrid_value.hpp"
#include "smec/mdp.hpp"
#include "smec/rng.hpp"

namespace smec {

/// Plain single-table expected-SARSA learner with a Boltzmann behavior
/// policy, written without the planner or hybrid heads. It draws from the
/// environment, behavior and replay streams in the same order as train(), so
/// with K = 0 both must produce the same table bit for bit.
struct SarsaResult {
  std::vector<double> q;  // (state, action)
  std::vector<Transition> transitions;
};

inline SarsaResult expected_sarsa(const TabularMdp& mdp, double gamma, double learning_rate, double temperature,
                                  std::size_t batch_size, std::size_t replay_capacity, std::size_t warm_start_steps,
                                  std::size_t sync_period, std::size_t episode_length, std::size_t total_steps,
                                  std::uint64_t seed) {
  const std::size_t S = mdp.num_states;
  const std::size_t A = mdp.num_actions;
  const double hi = mdp.reward_max / (1.0 - gamma);
  std::vector<double> q(S * A, 0.0), q_target(S * A, 0.0), pi(S * A, 1.0 / static_cast<double>(A));

  auto soften = [&](std::size_t s) {
    const double* row = &q[s * A];
    double* out = &pi[s * A];
    const double mx = *std::max_element(row, row + A);
    double z = 0.0;
    for (std::size_t a = 0; a < A; ++a) {
      out[a] = std::exp((row[a] - mx) / temperature);
      z += out[a];
    }
    for (std::size_t a = 0; a < A; ++a) out[a] /= z;
  };
  for (std::size_t s = 0; s < S; ++s) soften(s);

  SplitMix64 env_rng(derive_seed(seed, stream::environment));
  SplitMix64 act_rng(derive_seed(seed, stream::behavior));
  SplitMix64 replay_rng(derive_seed(seed, stream::replay));
  ReplayBuffer replay(replay_capacity);
  std::vector<Transition> batch;
  std::vector<double> targets;
  SarsaResult res;
  std::size_t updates = 0;

  std::size_t s = sample_initial(mdp, env_rng);
  std::size_t t = 0;
  for (std::size_t k = 0; k < total_steps; ++k) {
    const std::size_t a =
        k < warm_start_steps ? act_rng.below(A) : act_rng.categorical(std::span<const double>(&pi[s * A], A));
    const Transition tr = step(mdp, s, a, env_rng);
    replay.push(tr);
    res.transitions.push_back(tr);

    if (replay.size() >= batch_size) {
      replay.sample(batch_size, replay_rng, batch);
      targets.assign(batch.size(), 0.0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        double boot = 0.0;
        if (!batch[i].done)
          for (std::size_t b = 0; b < A; ++b) {
            const double w = pi[batch[i].next_state * A + b];
            if (w != 0.0) boot += w * q_target[batch[i].next_state * A + b];
          }
        targets[i] = batch[i].reward + gamma * boot;
      }
      for (std::size_t i = 0; i < batch.size(); ++i) {
        double& v = q[batch[i].state * A + batch[i].action];
        v += learning_rate * (targets[i] - v);
        v = std::clamp(v, 0.0, hi);
      }
      if (++updates % sync_period == 0) q_target = q;
      for (const auto& b : batch) soften(b.state);
    }

    if (tr.done || t + 1 >= episode_length) {
      s = sample_initial(mdp, env_rng);
      t = 0;
    } else {
      s = tr.next_state;
      ++t;
    }
  }
  res.q = std::move(q);
  return res;
}

}  // namespace smec
