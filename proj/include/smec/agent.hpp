#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "smec/errors.hpp"
#include "smec/hybrid_value.hpp"
#include "smec/mdp.hpp"
#include "smec/planner.hpp"
#include "smec/policy.hpp"
#include "smec/rng.hpp"

namespace smec {

struct VariantFlags {
  bool disentangled = true;   // per-prior value heads; false = score candidates with the task head
  bool truncated = true;      // prior heads use epsilon^(1/h); false = same discount as the task head
  bool ucb = true;            // count bonus at selection
  bool random_switch = false; // uniform choice among 1+K, overrides ucb

  bool operator==(const VariantFlags&) const = default;
};

struct AgentConfig {
  std::size_t h = 10;
  double epsilon = 1e-4;
  double c = 1.0;
  double gamma = 0.95;
  double learning_rate = 0.2;
  std::size_t batch_size = 32;
  std::size_t replay_capacity = 50000;
  std::size_t warm_start_steps = 2000;
  std::size_t target_sync_period = 100;
  double polyak_tau = 0.0;          // > 0 replaces hard copies by averaging
  double temperature = 0.02;
  double temperature_final = 0.0;   // > 0 anneals linearly to this value
  std::size_t episode_length = 100; // H
  std::size_t total_env_steps = 15000;
  std::size_t eval_interval = 500;
  std::size_t eval_episodes = 20;
  std::uint64_t seed = 0;
  VariantFlags flags;
  bool record_transitions = true;
  bool record_snapshots = true;
};

inline void validate_config(const AgentConfig& c) {
  auto bad = [](const std::string& field, const std::string& msg) { throw ConfigError("agent." + field, msg); };
  if (c.h < 1) bad("h", "must be >= 1");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) bad("epsilon", "must lie in (0, 1)");
  if (!(c.c >= 0.0)) bad("c", "must be >= 0");
  if (!(c.gamma >= 0.0 && c.gamma < 1.0)) bad("gamma", "must lie in [0, 1)");
  if (!(c.learning_rate > 0.0 && c.learning_rate <= 1.0)) bad("learning_rate", "must lie in (0, 1]");
  if (c.batch_size < 1) bad("batch_size", "must be >= 1");
  if (c.replay_capacity < 1) bad("replay_capacity", "must be >= 1");
  if (c.target_sync_period < 1) bad("target_sync_period", "must be >= 1");
  if (!(c.polyak_tau >= 0.0 && c.polyak_tau <= 1.0)) bad("polyak_tau", "must lie in [0, 1]");
  if (!(c.temperature > 0.0)) bad("temperature", "must be > 0");
  if (!(c.temperature_final >= 0.0)) bad("temperature_final", "must be >= 0");
  if (c.episode_length < 1) bad("episode_length", "must be >= 1");
  if (c.eval_interval < 1) bad("eval_interval", "must be >= 1");
}

/// Per-head discounts implied by the config: task head gamma, prior heads
/// epsilon^(1/h) unless truncation is disabled.
inline std::vector<double> head_discounts(const AgentConfig& c, std::size_t num_priors) {
  std::vector<double> d(num_priors + 1, c.gamma);
  if (c.flags.truncated) {
    const double gb = truncated_discount(c.epsilon, c.h).value();
    for (std::size_t i = 1; i < d.size(); ++i) d[i] = gb;
  }
  return d;
}

/// One environment step as recorded in the run log. `controller` is the
/// behavior index, or -1 during warm-start.
struct StepRecord {
  std::size_t step = 0;
  std::size_t episode = 0;
  std::size_t t = 0;  // step index within the episode
  Transition transition;
  int controller = -1;

  bool operator==(const StepRecord&) const = default;
};

struct EvalRecord {
  std::size_t step = 0;  // environment steps taken when the evaluation ran
  double success_rate = 0.0;
  double mean_return = 0.0;

  bool operator==(const EvalRecord&) const = default;
};

struct SnapshotRecord {
  std::size_t step = 0;
  std::vector<double> values;  // HybridQTable::values() at that point

  bool operator==(const SnapshotRecord&) const = default;
};

struct RunLog {
  std::size_t num_states = 0;
  std::size_t num_actions = 0;
  std::size_t num_policies = 1;
  std::size_t h = 1;
  std::size_t episode_length = 0;
  std::size_t warm_start_steps = 0;
  std::vector<double> discounts;
  std::vector<StepRecord> transitions;
  std::vector<SelectionRecord> switches;
  std::vector<EvalRecord> evals;
  std::vector<SnapshotRecord> snapshots;
  HybridQTable final_table;
  std::size_t env_steps = 0;
  std::size_t updates = 0;
  std::size_t episodes = 0;
  PlannerState planner;

  bool operator==(const RunLog& o) const {
    return transitions == o.transitions && switches == o.switches && evals == o.evals &&
           snapshots == o.snapshots && final_table == o.final_table && env_steps == o.env_steps;
  }
};

/// Boltzmann policy over the task head.
inline TabularPolicy derive_task_policy(const HybridQTable& table, double temperature) {
  return boltzmann_from_q(table.head(0), temperature, "task");
}

inline AgentConfig variant_single_head(AgentConfig c) {
  c.flags.disentangled = false;
  return c;
}

inline AgentConfig variant_no_truncation(AgentConfig c) {
  c.flags.truncated = false;
  return c;
}

inline AgentConfig variant_random_switch(AgentConfig c) {
  c.flags.random_switch = true;
  return c;
}

inline AgentConfig variant_no_ucb(AgentConfig c) {
  c.flags.ucb = false;
  return c;
}

/// Greedy task-policy evaluation over seeded episodes of length H.
inline EvalRecord evaluate_greedy(const TabularMdp& mdp, const HybridQTable& table, std::size_t episode_length,
                                  std::size_t episodes, std::uint64_t seed, std::size_t step) {
  const TabularPolicy greedy = greedy_from_q(table.head(0));
  EvalRecord e;
  e.step = step;
  if (episodes == 0) return e;
  std::size_t hits = 0;
  double ret = 0.0;
  for (std::size_t k = 0; k < episodes; ++k) {
    const Trajectory t = rollout(mdp, greedy, episode_length, derive_seed(seed, k));
    if (!t.steps.empty() && t.steps.back().done) ++hits;
    for (const auto& tr : t.steps) ret += tr.reward;
  }
  e.success_rate = static_cast<double>(hits) / static_cast<double>(episodes);
  e.mean_return = ret / static_cast<double>(episodes);
  return e;
}

namespace detail {

inline double temperature_at(const AgentConfig& c, std::size_t step) {
  if (c.temperature_final <= 0.0 || c.total_env_steps == 0) return c.temperature;
  const double frac = static_cast<double>(step) / static_cast<double>(c.total_env_steps);
  return c.temperature + (c.temperature_final - c.temperature) * frac;
}

inline void refresh_rows(TabularPolicy& pi, const HybridQTable& table, std::span<const Transition> batch,
                         double temperature) {
  std::vector<double> row(table.num_actions());
  for (const Transition& t : batch) {
    for (std::size_t a = 0; a < row.size(); ++a) row[a] = table(t.state, a, 0);
    softmax_row(row, temperature, pi.row(t.state));
  }
}

inline void refresh_all(TabularPolicy& pi, const HybridQTable& table, double temperature) {
  std::vector<double> row(table.num_actions());
  for (std::size_t s = 0; s < table.num_states(); ++s) {
    for (std::size_t a = 0; a < row.size(); ++a) row[a] = table(s, a, 0);
    softmax_row(row, temperature, pi.row(s));
  }
}

}  // namespace detail

/// Candidate scores at a switch opportunity. With disentangled heads this is
/// every head at the executed (s, a); otherwise the task head's expectation
/// under each candidate's action distribution at the next state.
inline std::vector<double> selection_scores(const HybridQTable& table, const Transition& t,
                                            const TabularPolicy& task_policy, const PriorSet& priors,
                                            bool disentangled) {
  if (disentangled) return head_values_at(table, t.state, t.action);
  std::vector<double> v(priors.size() + 1, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const TabularPolicy& nu = i == 0 ? task_policy : priors[i - 1];
    for (std::size_t a = 0; a < table.num_actions(); ++a) v[i] += nu(t.next_state, a) * table(t.next_state, a, 0);
  }
  return v;
}

/// The training loop: act with the current behavior policy, switch every h
/// steps by value (+ UCB) guidance, store transitions, and take one hybrid TD
/// step per environment step against a periodically synced target table.
inline RunLog train(const TabularMdp& mdp, const PriorSet& priors, const AgentConfig& config) {
  validate_config(config);
  check_prior_shapes(priors, mdp.num_states, mdp.num_actions);
  const std::size_t K = priors.size();
  const std::size_t A = mdp.num_actions;

  HybridQTable table(mdp.num_states, A, head_discounts(config, K), mdp.reward_max);
  TargetTable target(table);
  ReplayBuffer replay(config.replay_capacity);
  PlannerState planner(K + 1, config.h, config.flags.ucb ? config.c : 0.0);
  const std::size_t trained_heads = config.flags.disentangled ? K + 1 : 1;

  SplitMix64 env_rng(derive_seed(config.seed, stream::environment));
  SplitMix64 act_rng(derive_seed(config.seed, stream::behavior));
  SplitMix64 replay_rng(derive_seed(config.seed, stream::replay));
  SplitMix64 plan_rng(derive_seed(config.seed, stream::planner));
  const std::uint64_t eval_seed = derive_seed(config.seed, stream::evaluation);

  double temperature = detail::temperature_at(config, 0);
  TabularPolicy task_policy = derive_task_policy(table, temperature);

  RunLog log;
  log.num_states = mdp.num_states;
  log.num_actions = A;
  log.num_policies = K + 1;
  log.h = config.h;
  log.episode_length = config.episode_length;
  log.warm_start_steps = config.warm_start_steps;
  log.discounts = table.discounts();

  std::vector<Transition> batch;
  std::vector<double> scores;
  std::size_t state = sample_initial(mdp, env_rng);
  std::size_t t_ep = 0;
  std::size_t episode = 0;

  for (std::size_t step = 0; step < config.total_env_steps; ++step) {
    const bool warm = step < config.warm_start_steps;
    std::size_t action;
    if (warm) {
      action = act_rng.below(A);
    } else {
      const TabularPolicy& behavior = planner.current == 0 ? task_policy : priors[planner.current - 1];
      action = act_rng.categorical(behavior.row(state));
    }
    const Transition tr = smec::step(mdp, state, action, env_rng);
    replay.push(tr);
    if (config.record_transitions)
      log.transitions.push_back({step, episode, t_ep, tr, warm ? -1 : static_cast<int>(planner.current)});

    const bool timeout = t_ep + 1 >= config.episode_length;
    const bool episode_over = tr.done || timeout;

    // Switch opportunity at the end of a segment that is followed by another one.
    std::optional<std::size_t> chosen;
    if (!warm && !episode_over && planner.at_boundary()) {
      SelectionRecord rec;
      rec.step = step;
      rec.state = tr.state;
      rec.action = tr.action;
      rec.values = selection_scores(table, tr, task_policy, priors, config.flags.disentangled);
      if (config.flags.random_switch) {
        rec.bonuses.assign(K + 1, 0.0);
        chosen = plan_rng.below(K + 1);
      } else if (config.flags.ucb) {
        rec.bonuses = ucb_bonuses(planner);
        chosen = select_ucb(rec.values, planner);
      } else {
        rec.bonuses.assign(K + 1, 0.0);
        chosen = select_greedy(rec.values);
      }
      rec.chosen = *chosen;
      log.switches.push_back(std::move(rec));
    }
    advance(planner, chosen);

    // One TD batch per environment step.
    if (replay.size() >= config.batch_size) {
      replay.sample(config.batch_size, replay_rng, batch);
      const auto targets = td_targets(batch, target, task_policy, priors);
      apply_update(table, batch, targets, config.learning_rate, trained_heads);
      if (config.polyak_tau > 0.0)
        polyak_target(table, target, config.polyak_tau);
      else
        sync_target(table, target, config.target_sync_period);
      ++log.updates;
      const double next_temperature = detail::temperature_at(config, step + 1);
      if (next_temperature != temperature) {
        temperature = next_temperature;
        detail::refresh_all(task_policy, table, temperature);
      } else {
        detail::refresh_rows(task_policy, table, batch, temperature);
      }
    }

    if ((step + 1) % config.eval_interval == 0) {
      const std::size_t idx = (step + 1) / config.eval_interval;
      log.evals.push_back(evaluate_greedy(mdp, table, config.episode_length, config.eval_episodes,
                                          derive_seed(eval_seed, idx), step + 1));
      if (config.record_snapshots) log.snapshots.push_back({step + 1, table.values()});
    }

    if (episode_over) {
      state = sample_initial(mdp, env_rng);
      t_ep = 0;
      ++episode;
      planner.reset_episode();
    } else {
      state = tr.next_state;
      ++t_ep;
    }
  }

  log.env_steps = config.total_env_steps;
  log.episodes = episode;
  log.final_table = std::move(table);
  log.planner = planner;
  return log;
}

}  // namespace smec
