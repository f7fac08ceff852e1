#include <gtest/gtest.h>

#include <set>

#include "smec/baseline.hpp"
#include "smec/experiment.hpp"

using namespace smec;

namespace {

struct Fixture {
  TabularMdp mdp;
  PriorSet priors;
};

const Fixture& composed() {
  static const Fixture f = [] {
    const auto env = builtin_suite().at("composed-route");
    const auto corners = corner_priors_for(env.layout, cached_corner_priors(0));
    return Fixture{compile(env.layout), {corners[3], corners[1]}};
  }();
  return f;
}

AgentConfig small(std::uint64_t seed = 0) {
  AgentConfig c;
  c.seed = seed;
  c.total_env_steps = 4000;
  c.warm_start_steps = 500;
  return c;
}

}  // namespace

TEST(Agent, DeterministicPerSeed) {
  const auto& f = composed();
  const auto a = train(f.mdp, f.priors, small(1));
  const auto b = train(f.mdp, f.priors, small(1));
  EXPECT_TRUE(a == b);
  const auto c = train(f.mdp, f.priors, small(2));
  EXPECT_FALSE(a.transitions == c.transitions);
}

TEST(Agent, WarmStartIsUncontrolled) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  for (const auto& r : log.transitions) EXPECT_EQ(r.controller < 0, r.step < 500) << r.step;
  ASSERT_FALSE(log.switches.empty());
  EXPECT_GE(log.switches.front().step, 500u);
}

TEST(Agent, SwitchesOnlyAtSegmentEnds) {
  const auto& f = composed();
  AgentConfig c = small();
  c.h = 7;
  const auto log = train(f.mdp, f.priors, c);
  std::set<std::size_t> switch_steps;
  for (const auto& s : log.switches) {
    const auto& r = log.transitions.at(s.step);
    EXPECT_EQ((r.t + 1) % c.h, 0u);
    EXPECT_FALSE(r.transition.done);
    EXPECT_LT(r.t + 1, c.episode_length);
    switch_steps.insert(s.step);
  }
  for (std::size_t i = 1; i < log.transitions.size(); ++i) {
    const auto& prev = log.transitions[i - 1];
    const auto& cur = log.transitions[i];
    if (cur.controller < 0 || prev.controller < 0) continue;
    if (cur.t == 0) {
      EXPECT_EQ(cur.controller, 0) << "episodes open under the task policy";
    } else if (!switch_steps.count(prev.step)) {
      EXPECT_EQ(cur.controller, prev.controller) << "controller changed mid-segment at step " << cur.step;
    } else {
      const auto it = std::find_if(log.switches.begin(), log.switches.end(),
                                   [&](const SelectionRecord& s) { return s.step == prev.step; });
      EXPECT_EQ(cur.controller, static_cast<int>(it->chosen));
    }
  }
}

TEST(Agent, PlannerCountsMatchSwitchLog) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  EXPECT_EQ(log.planner.T, log.switches.size());
  std::vector<std::uint64_t> n1(3, 0);
  for (const auto& s : log.switches) ++n1[s.chosen];
  EXPECT_EQ(log.planner.N1, n1);
}

TEST(Agent, ValuesStayInsideClipBounds) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  const auto& t = log.final_table;
  for (std::size_t s = 0; s < t.num_states(); ++s)
    for (std::size_t a = 0; a < t.num_actions(); ++a)
      for (std::size_t h = 0; h < t.num_heads(); ++h) {
        EXPECT_GE(t(s, a, h), 0.0);
        EXPECT_LE(t(s, a, h), t.bound(h));
      }
}

TEST(Agent, HeadDiscounts) {
  AgentConfig c;
  c.h = 10;
  auto d = head_discounts(c, 2);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d[0], 0.95);
  EXPECT_NEAR(std::pow(d[1], 10.0), 1e-4, 1e-15);
  EXPECT_EQ(d[1], d[2]);
  d = head_discounts(variant_no_truncation(c), 2);
  EXPECT_EQ(d, std::vector<double>(3, 0.95));
}

TEST(Agent, ScratchMatchesExpectedSarsa) {
  const auto& f = composed();
  AgentConfig c = small(4);
  const auto log = train(f.mdp, {}, c);
  const auto ref = expected_sarsa(f.mdp, c.gamma, c.learning_rate, c.temperature, c.batch_size, c.replay_capacity,
                                  c.warm_start_steps, c.target_sync_period, c.episode_length, c.total_env_steps, c.seed);
  EXPECT_EQ(log.final_table.values(), ref.q);
  ASSERT_EQ(log.transitions.size(), ref.transitions.size());
  for (std::size_t i = 0; i < ref.transitions.size(); ++i) ASSERT_EQ(log.transitions[i].transition, ref.transitions[i]);
  for (const auto& s : log.switches) EXPECT_EQ(s.chosen, 0u);
}

TEST(Agent, SingleHeadTrainsOnlyTaskHead) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, variant_single_head(small()));
  const auto& v = log.final_table.values();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (i % 3 != 0) {
      ASSERT_EQ(v[i], 0.0);
    }
  for (const auto& s : log.switches) EXPECT_EQ(s.values.size(), 3u);
}

TEST(Agent, RandomSwitchHasNoBonuses) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, variant_random_switch(small()));
  std::set<std::size_t> chosen;
  for (const auto& s : log.switches) {
    EXPECT_EQ(s.bonuses, std::vector<double>(3, 0.0));
    chosen.insert(s.chosen);
  }
  EXPECT_EQ(chosen.size(), 3u);
}

TEST(Agent, NoUcbPicksArgmax) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, variant_no_ucb(small()));
  for (const auto& s : log.switches) EXPECT_EQ(s.chosen, select_greedy(s.values));
}

TEST(Agent, UcbRecordsBonusesAndObeysArgmax) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  ASSERT_FALSE(log.switches.empty());
  EXPECT_TRUE(std::isinf(log.switches.front().bonuses[0]));
  for (const auto& s : log.switches) {
    std::vector<double> score(s.values.size());
    for (std::size_t i = 0; i < score.size(); ++i)
      score[i] = std::isinf(s.bonuses[i]) ? s.bonuses[i] : s.values[i] + s.bonuses[i];
    EXPECT_EQ(s.chosen, select_greedy(score));
  }
}

TEST(Agent, EvaluationSchedule) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  ASSERT_EQ(log.evals.size(), 8u);
  for (std::size_t i = 0; i < log.evals.size(); ++i) EXPECT_EQ(log.evals[i].step, 500 * (i + 1));
  EXPECT_EQ(log.snapshots.size(), 8u);
  EXPECT_EQ(log.snapshots.back().values, log.final_table.values());
}

TEST(Agent, RejectsBadConfig) {
  const auto& f = composed();
  AgentConfig c = small();
  c.learning_rate = 0.0;
  EXPECT_THROW(train(f.mdp, f.priors, c), ConfigError);
  EXPECT_THROW(train(f.mdp, {TabularPolicy(3, 4)}, small()), ShapeError);
}

TEST(RunLog, JsonlRoundTrip) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  const auto back = parse_run_log(run_log_jsonl(log));
  EXPECT_TRUE(back == log);
  EXPECT_EQ(back.h, log.h);
  EXPECT_EQ(back.discounts, log.discounts);
}

TEST(RunLog, CorruptionReportsByteOffset) {
  const auto& f = composed();
  AgentConfig c = small();
  c.total_env_steps = 600;
  const std::string text = run_log_jsonl(train(f.mdp, f.priors, c));

  const std::size_t cut = text.rfind('\n', text.size() - 2) + 1;
  try {
    parse_run_log(text.substr(0, cut + 5));
    FAIL();
  } catch (const CorruptLogError& e) {
    EXPECT_EQ(e.offset(), cut);
  }

  try {
    parse_run_log(text.substr(0, cut));
    FAIL();
  } catch (const CorruptLogError& e) {
    EXPECT_EQ(e.offset(), cut);
  }

  const std::size_t second = text.find('\n') + 1;
  std::string bad = text;
  bad.replace(second, 1, "x");
  try {
    parse_run_log(bad);
    FAIL();
  } catch (const CorruptLogError& e) {
    EXPECT_EQ(e.offset(), second);
  }
  EXPECT_THROW(parse_run_log(""), CorruptLogError);
}

TEST(Metrics, UtilizationWindowsSumToOne) {
  const auto& f = composed();
  const auto log = train(f.mdp, f.priors, small());
  const auto u = utilization(log, 5);
  ASSERT_EQ(u.fractions.size(), 5u);
  for (const auto& w : u.fractions) {
    double s = 0.0;
    for (double x : w) s += x;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const auto scratch = utilization(train(f.mdp, {}, small()), 5);
  for (const auto& w : scratch.fractions) EXPECT_EQ(w, std::vector<double>{1.0});
  EXPECT_THROW(utilization(log, 0), DomainError);
}

TEST(Metrics, ThresholdAndAuc) {
  const std::vector<EvalRecord> e{{500, 0.2, 0}, {1000, 0.95, 0}, {1500, 0.85, 0}, {2000, 1.0, 0}};
  EXPECT_EQ(steps_to_threshold(e, 0.9), std::optional<std::size_t>(1000));
  EXPECT_FALSE(steps_to_threshold(e, 1.1).has_value());
  EXPECT_NEAR(success_auc(e), (0.2 + 0.95 + 0.85 + 1.0) / 4.0, 1e-12);
}
