#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"
#include "smec/theory.hpp"

using namespace smec;

namespace {

TabularMdp two_state_chain() {
  TabularMdp m(2, 2);
  m.p(0, 0, 0) = 1.0;
  m.p(0, 1, 1) = 1.0;
  m.p(1, 0, 1) = 1.0;
  m.p(1, 1, 0) = 1.0;
  m.r(1, 0) = 1.0;
  m.initial_dist = {1.0, 0.0};
  return m;
}

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.rule == rule; });
}

}  // namespace

TEST(DiscountFactor, RejectsOutsideUnitInterval) {
  EXPECT_NO_THROW(DiscountFactor(0.0));
  EXPECT_NO_THROW(DiscountFactor(0.999));
  EXPECT_THROW(DiscountFactor(1.0), DomainError);
  EXPECT_THROW(DiscountFactor(-0.1), DomainError);
  EXPECT_THROW(DiscountFactor(std::nan("")), DomainError);
}

TEST(Validate, AcceptsWellFormed) { EXPECT_TRUE(validate(two_state_chain()).empty()); }

TEST(Validate, FlagsEachRule) {
  auto m = two_state_chain();
  m.p(0, 0, 1) = 0.5;
  EXPECT_TRUE(has_rule(validate(m), "row-stochasticity"));

  m = two_state_chain();
  m.r(0, 0) = 2.0;
  EXPECT_TRUE(has_rule(validate(m), "reward-range"));

  m = two_state_chain();
  m.initial_dist = {0.5, 0.2};
  EXPECT_TRUE(has_rule(validate(m), "initial-normalization"));

  m = two_state_chain();
  m.terminals = {1};
  EXPECT_TRUE(has_rule(validate(m), "terminal-absorbing"));

  m = two_state_chain();
  m.transitions.pop_back();
  EXPECT_TRUE(has_rule(validate(m), "shape"));
}

TEST(Validate, MakeTerminalIsAbsorbing) {
  auto m = two_state_chain();
  m.make_terminal(1);
  EXPECT_TRUE(validate(m).empty());
  EXPECT_TRUE(m.is_terminal(1));
  EXPECT_DOUBLE_EQ(m.r(1, 0), 0.0);
}

TEST(ExactValues, HandComputedChain) {
  // stay in 0 forever: V = 0; jump to 1 then stay: V(1) = 1 / (1 - g)
  const auto m = two_state_chain();
  const auto pi = constant_action(2, 2, 0, "stay");
  const auto v = exact_state_values(m, pi, DiscountFactor(0.9));
  EXPECT_NEAR(v[0], 0.0, 1e-12);
  EXPECT_NEAR(v[1], 10.0, 1e-12);
  const auto q = exact_q_values(m, pi, DiscountFactor(0.9));
  EXPECT_NEAR(q(0, 1), 9.0, 1e-12);
}

TEST(ExactValues, MatchIterativeOracleOnRandomMdps) {
  SplitMix64 rng(7);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_mdp(rng, 8, 4);
    const auto pi = random_policy(rng, m.num_states, m.num_actions);
    const double g = random_discount(rng);
    const auto v = exact_state_values(m, pi, DiscountFactor(g));
    const auto ref = oracle::policy_evaluation(m, pi, g);
    for (std::size_t s = 0; s < m.num_states; ++s) EXPECT_NEAR(v[s], ref[s], 1e-9);
    const auto q = exact_q_values(m, pi, DiscountFactor(g));
    const auto qref = oracle::q_from_v(m, ref, g);
    for (std::size_t k = 0; k < qref.size(); ++k) EXPECT_NEAR(q.values[k], qref[k], 1e-9);
  }
}

TEST(Visitation, IsDistributionAndMatchesSeries) {
  SplitMix64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto m = random_mdp(rng, 6, 3);
    const auto pi = random_policy(rng, m.num_states, m.num_actions);
    const double g = 0.9 * rng.uniform();
    const auto d = discounted_visitation(m, pi, DiscountFactor(g), m.initial_dist);
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 1.0, 1e-12);
    for (double x : d) EXPECT_GE(x, -1e-15);
    const auto ref = oracle::visitation_series(m, pi, g, m.initial_dist);
    for (std::size_t s = 0; s < d.size(); ++s) EXPECT_NEAR(d[s], ref[s], 1e-9);
  }
}

TEST(Visitation, RejectsWrongStartLength) {
  const auto m = two_state_chain();
  EXPECT_THROW(discounted_visitation(m, TabularPolicy::uniform(2, 2), DiscountFactor(0.5), std::vector<double>{1.0}),
               ShapeError);
}

TEST(Rollout, DeterministicPerSeedAndStopsAtTerminal) {
  auto m = two_state_chain();
  m.make_terminal(1);
  const auto pi = TabularPolicy::uniform(2, 2);
  const auto a = rollout(m, pi, 50, 3);
  const auto b = rollout(m, pi, 50, 3);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t i = 0; i < a.steps.size(); ++i) EXPECT_EQ(a.steps[i].action, b.steps[i].action);
  EXPECT_TRUE(a.steps.back().done);
  EXPECT_EQ(a.steps.back().next_state, 1u);
  EXPECT_THROW(rollout(m, TabularPolicy::uniform(3, 2), 5, 0), ShapeError);
  EXPECT_THROW(rollout(m, pi, 0, 0), DomainError);
}

TEST(Rollout, MonteCarloReturn) {
  Trajectory t;
  t.steps = {{0, 0, 1.0, 0, false}, {0, 0, 0.0, 0, false}, {0, 0, 1.0, 0, true}};
  EXPECT_DOUBLE_EQ(monte_carlo_return(t, 0.5), 1.0 + 0.25);
}

TEST(Rollout, SuccessRate) {
  auto m = two_state_chain();
  m.make_terminal(1);
  EXPECT_DOUBLE_EQ(success_rate(m, constant_action(2, 2, 1, "go"), 20, 5, 0), 1.0);
  EXPECT_DOUBLE_EQ(success_rate(m, constant_action(2, 2, 0, "stay"), 20, 5, 0), 0.0);
}

TEST(Rng, SplitMixIsReproducibleAndStreamsDiffer) {
  SplitMix64 a(42), b(42);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(derive_seed(0, stream::environment), derive_seed(0, stream::behavior));
  EXPECT_NE(derive_seed(0, stream::planner), derive_seed(1, stream::planner));
  EXPECT_EQ(derive_seed(5, stream::replay), derive_seed(5, stream::replay));
}

TEST(Rng, BelowAndCategoricalRanges) {
  SplitMix64 r(1);
  std::vector<int> hist(3, 0);
  const std::vector<double> probs{0.5, 0.0, 0.5};
  for (int i = 0; i < 2000; ++i) {
    EXPECT_LT(r.below(7), 7u);
    ++hist[r.categorical(probs)];
  }
  EXPECT_EQ(hist[1], 0);
  EXPECT_GT(hist[0], 800);
  EXPECT_GT(hist[2], 800);
  EXPECT_THROW(r.below(0), std::invalid_argument);
}

TEST(Policy, ShapeCheck) {
  const auto m = two_state_chain();
  EXPECT_NO_THROW(check_policy_shape(m, TabularPolicy::uniform(2, 2)));
  EXPECT_THROW(check_policy_shape(m, TabularPolicy::uniform(2, 3)), ShapeError);
}
