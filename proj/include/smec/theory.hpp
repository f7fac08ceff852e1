#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "smec/errors.hpp"
#include "smec/mdp.hpp"
#include "smec/policy.hpp"
#include "smec/rng.hpp"

namespace smec {

inline constexpr double kBoundTolerance = 1e-9;

enum class Direction { AtMost, AtLeast };  // claimed: lhs <= rhs, or lhs >= rhs

struct BoundRow {
  std::string where;
  double lhs = 0.0;
  double rhs = 0.0;
  bool precondition = true;
  bool violated = false;
};

struct BoundReport {
  std::string name;
  std::string instance;
  Direction direction = Direction::AtMost;
  bool asserted = true;  // lemmas are asserted; theorem reports only measure
  std::vector<BoundRow> rows;
  std::vector<std::string> notes;

  std::size_t violations() const {
    return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const BoundRow& r) { return r.violated; }));
  }

  void add(std::string where, double lhs, double rhs, bool precondition = true) {
    BoundRow r{std::move(where), lhs, rhs, precondition, false};
    if (precondition)
      r.violated = direction == Direction::AtMost ? lhs > rhs + kBoundTolerance : lhs < rhs - kBoundTolerance;
    rows.push_back(std::move(r));
  }
};

/// 12 significant digits: the serialized precision of bound values. Verdicts
/// use full precision; decimal inputs such as 0.9 are not exact in binary, so
/// full-precision values carry representation noise in the last places.
inline double round_sig(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"where", x.where}, {"lhs", round_sig(x.lhs)}, {"rhs", round_sig(x.rhs)},
                    {"precondition", x.precondition}, {"violated", x.violated}});
  nlohmann::json viol = nlohmann::json::array();
  for (const auto& x : r.rows)
    if (x.violated) viol.push_back(x.where);
  return {{"name", r.name},
          {"instance", r.instance},
          {"claim", r.direction == Direction::AtMost ? "lhs <= rhs" : "lhs >= rhs"},
          {"asserted", r.asserted},
          {"tolerance", kBoundTolerance},
          {"rows", rows},
          {"violations", viol},
          {"notes", r.notes}};
}

// ---- policy distances and kernels -----------------------------------------

struct PolicyDistanceKit {
  double sup_l1 = 0.0;           // sup_s sum_a |pi(a|s) - eta(a|s)|
  std::vector<double> tv;        // per-state total variation
  double expected_tv = 0.0;      // E_{s ~ d^pi}[tv(s)]
};

inline std::vector<double> total_variation(const TabularPolicy& a, const TabularPolicy& b) {
  if (a.num_states() != b.num_states() || a.num_actions() != b.num_actions())
    throw ShapeError("policy distance: shapes differ");
  std::vector<double> tv(a.num_states(), 0.0);
  for (std::size_t s = 0; s < a.num_states(); ++s) {
    double l1 = 0.0;
    for (std::size_t x = 0; x < a.num_actions(); ++x) l1 += std::abs(a(s, x) - b(s, x));
    tv[s] = 0.5 * l1;
  }
  return tv;
}

inline double expectation(std::span<const double> dist, std::span<const double> f) {
  double e = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) e += dist[i] * f[i];
  return e;
}

inline PolicyDistanceKit policy_distances(const TabularPolicy& pi, const TabularPolicy& eta, const TabularMdp& mdp,
                                          DiscountFactor gamma) {
  PolicyDistanceKit k;
  k.tv = total_variation(pi, eta);
  for (double t : k.tv) k.sup_l1 = std::max(k.sup_l1, 2.0 * t);
  const auto d = discounted_visitation(mdp, pi, gamma, mdp.initial_dist);
  k.expected_tv = expectation(d, k.tv);
  return k;
}

/// Kernel of running `pi` for h steps: (P^pi)^h.
inline Eigen::MatrixXd h_step_kernel(const TabularMdp& mdp, const TabularPolicy& pi, std::size_t h) {
  if (h < 1) throw DomainError("h_step_kernel: h must be >= 1");
  const Eigen::MatrixXd P = policy_kernel(mdp, pi);
  Eigen::MatrixXd K = P;
  for (std::size_t i = 1; i < h; ++i) K = K * P;
  return K;
}

// ---- lemmas ---------------------------------------------------------------

/// |V_g1 - V_g2| <= (g1 - g2) / ((1 - g1)(1 - g2)) R_max at every state.
inline BoundReport check_discount_gap(const TabularMdp& mdp, const TabularPolicy& pi, DiscountFactor g1,
                                      DiscountFactor g2, std::string instance = "") {
  if (!(g1.value() > g2.value())) throw DomainError("check_discount_gap: needs gamma1 > gamma2");
  BoundReport r{"discount-gap", std::move(instance), Direction::AtMost, true, {}, {}};
  const auto v1 = exact_state_values(mdp, pi, g1);
  const auto v2 = exact_state_values(mdp, pi, g2);
  const double a = g1.value(), b = g2.value();
  const double rhs = (a - b) / ((1.0 - a) * (1.0 - b)) * mdp.reward_max;
  for (std::size_t s = 0; s < mdp.num_states; ++s) r.add("state " + std::to_string(s), std::abs(v1[s] - v2[s]), rhs);
  return r;
}

/// ||d^pi - d^eta||_1 <= 2 gamma / (1 - gamma) E_{d^eta}[TV(pi, eta)].
inline BoundReport check_visitation_gap(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& eta,
                                        DiscountFactor gamma, std::string instance = "") {
  BoundReport r{"visitation-gap", std::move(instance), Direction::AtMost, true, {}, {}};
  const auto dp = discounted_visitation(mdp, pi, gamma, mdp.initial_dist);
  const auto de = discounted_visitation(mdp, eta, gamma, mdp.initial_dist);
  double l1 = 0.0;
  for (std::size_t s = 0; s < dp.size(); ++s) l1 += std::abs(dp[s] - de[s]);
  const auto tv = total_variation(pi, eta);
  const double g = gamma.value();
  r.add("initial distribution", l1, 2.0 * g / (1.0 - g) * expectation(de, tv));
  r.notes.push_back("expectation taken under d^eta as stated; the derivation bounds it under d^pi, and both hold by symmetry");
  return r;
}

/// |V^pi(s) - V^eta(s)| <= 2 R_max / (1 - gamma)^2 E_{d^pi(.|s0 = s)}[TV(pi, eta)] for every start state s.
inline BoundReport check_value_diff(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& eta,
                                    DiscountFactor gamma, std::string instance = "") {
  BoundReport r{"value-difference", std::move(instance), Direction::AtMost, true, {}, {}};
  const auto vp = exact_state_values(mdp, pi, gamma);
  const auto ve = exact_state_values(mdp, eta, gamma);
  const auto tv = total_variation(pi, eta);
  const double g = gamma.value();
  const double scale = 2.0 * mdp.reward_max / ((1.0 - g) * (1.0 - g));
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    const auto d = discounted_visitation(mdp, pi, gamma, point_mass(mdp.num_states, s));
    r.add("state " + std::to_string(s), std::abs(vp[s] - ve[s]), scale * expectation(d, tv));
  }
  return r;
}

// ---- theorems (measured, never asserted) ----------------------------------

inline const char* kProofDirectionCaveat =
    "the lower bound is derived by applying the discount-gap upper bound |V_g - V_gbar| <= C in the >= direction; "
    "the claim can fail whenever V^mu_g - V^mu_gbar < C, so hold/violate here is an observation, not a test";

/// Per state: mu_bar = argmax_i V^{mu_i}_{gbar}(s); where V^{mu_bar}_{gbar}(s) >= V^pi_g(s), compares
/// V^{mu_bar}_g(s) - V^pi_g(s) against (g - gbar) R_max / ((1 - g)(1 - gbar)).
inline BoundReport theorem1_report(const TabularMdp& mdp, const PriorSet& priors, const TabularPolicy& pi,
                                   DiscountFactor gamma, DiscountFactor gamma_bar, std::string instance = "") {
  if (!(gamma_bar.value() < gamma.value())) throw DomainError("theorem1_report: needs gamma_bar < gamma");
  if (priors.empty()) throw DomainError("theorem1_report: needs at least one prior");
  BoundReport r{"theorem-1", std::move(instance), Direction::AtLeast, false, {}, {}};
  const double g = gamma.value(), gb = gamma_bar.value();
  const double rhs = (g - gb) * mdp.reward_max / ((1.0 - g) * (1.0 - gb));
  const auto vpi = exact_state_values(mdp, pi, gamma);
  std::vector<std::vector<double>> vshort, vlong;
  for (const auto& mu : priors) {
    vshort.push_back(exact_state_values(mdp, mu, gamma_bar));
    vlong.push_back(exact_state_values(mdp, mu, gamma));
  }
  std::size_t satisfied = 0;
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < priors.size(); ++i)
      if (vshort[i][s] > vshort[best][s]) best = i;
    if (vshort[best][s] < vpi[s]) continue;
    ++satisfied;
    r.add("state " + std::to_string(s) + " (mu_bar = " + priors[best].name() + ")", vlong[best][s] - vpi[s], rhs);
  }
  if (satisfied == 0) r.notes.push_back("no state satisfies the precondition; the report is vacuous");
  r.notes.push_back(kProofDirectionCaveat);
  return r;
}

/// Exact J(eta) for eta = pi on [0, kh), mu_bar on [kh, (k+1)h), pi afterwards,
/// from the initial distribution, by propagating the state distribution.
inline double piecewise_return(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                               std::size_t k, std::size_t h, DiscountFactor gamma) {
  const double g = gamma.value();
  const Eigen::MatrixXd Pp = policy_kernel(mdp, pi), Pm = policy_kernel(mdp, mu);
  const Eigen::VectorXd rp = policy_reward(mdp, pi), rm = policy_reward(mdp, mu);
  const Eigen::VectorXd vpi = to_eigen(exact_state_values(mdp, pi, gamma));
  Eigen::RowVectorXd dist = to_eigen(mdp.initial_dist).transpose();
  double j = 0.0, disc = 1.0;
  for (std::size_t t = 0; t < (k + 1) * h; ++t) {
    const bool prior = t >= k * h;
    j += disc * dist.dot(prior ? rm : rp);
    dist = dist * (prior ? Pm : Pp);
    disc *= g;
  }
  return j + disc * dist.dot(vpi);
}

/// The same quantity through the h-step kernel decomposition.
inline double piecewise_return_by_kernels(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                                          std::size_t k, std::size_t h, DiscountFactor gamma) {
  const double g = gamma.value();
  const Eigen::VectorXd vpi = to_eigen(exact_state_values(mdp, pi, gamma));
  const Eigen::VectorXd vmu = to_eigen(exact_state_values(mdp, mu, gamma));
  const Eigen::RowVectorXd p0 = to_eigen(mdp.initial_dist).transpose();
  const Eigen::RowVectorXd pkh = k == 0 ? p0 : Eigen::RowVectorXd(p0 * h_step_kernel(mdp, pi, k * h));
  const Eigen::MatrixXd Kmu = h_step_kernel(mdp, mu, h);
  const double gkh = std::pow(g, static_cast<double>(k * h));
  const double gh = std::pow(g, static_cast<double>(h));
  const double head = p0.dot(vpi) - gkh * pkh.dot(vpi);
  const double middle = gkh * (pkh.dot(vmu) - gh * (pkh * Kmu).dot(vmu));
  const double tail = gkh * gh * (pkh * Kmu).dot(vpi);
  return head + middle + tail;
}

struct Theorem2Terms {
  double j_eta = 0.0;
  double j_pi = 0.0;
  double first = 0.0;   // gamma^{kh} (g - gbar) R_max / ((1 - g)(1 - gbar))
  double second = 0.0;  // gamma^{(k+1)h} R_max / (1 - g)^2 ||mu - pi||_inf
};

inline Theorem2Terms theorem2_terms(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                                    std::size_t k, std::size_t h, DiscountFactor gamma, DiscountFactor gamma_bar) {
  const double g = gamma.value(), gb = gamma_bar.value();
  Theorem2Terms t;
  t.j_eta = piecewise_return(mdp, pi, mu, k, h, gamma);
  t.j_pi = expectation(mdp.initial_dist, exact_state_values(mdp, pi, gamma));
  double sup = 0.0;
  for (double tv : total_variation(mu, pi)) sup = std::max(sup, 2.0 * tv);
  t.first = std::pow(g, static_cast<double>(k * h)) * (g - gb) * mdp.reward_max / ((1.0 - g) * (1.0 - gb));
  t.second = std::pow(g, static_cast<double>((k + 1) * h)) * mdp.reward_max / ((1.0 - g) * (1.0 - g)) * sup;
  return t;
}

/// Single switched segment: compares J(eta) - J(pi) with the claimed lower bound.
/// The precondition is checked on the support of the time-kh state distribution under pi.
inline BoundReport theorem2_report(const TabularMdp& mdp, const TabularPolicy& pi, const TabularPolicy& mu,
                                   std::size_t k, std::size_t h, DiscountFactor gamma, DiscountFactor gamma_bar,
                                   std::string instance = "") {
  if (h < 1) throw ConstructionError("theorem2_report: segment length must be >= 1");
  if (!(gamma_bar.value() < gamma.value())) throw DomainError("theorem2_report: needs gamma_bar < gamma");
  check_policy_shape(mdp, pi);
  check_policy_shape(mdp, mu);
  const Eigen::RowVectorXd p0 = to_eigen(mdp.initial_dist).transpose();
  const Eigen::RowVectorXd pkh = k == 0 ? p0 : Eigen::RowVectorXd(p0 * h_step_kernel(mdp, pi, k * h));
  const auto vshort = exact_state_values(mdp, mu, gamma_bar);
  const auto vpi = exact_state_values(mdp, pi, gamma);
  bool any = false, all = true;
  for (std::size_t s = 0; s < mdp.num_states; ++s) {
    if (pkh[static_cast<Eigen::Index>(s)] <= 0.0) continue;
    const bool ok = vshort[s] >= vpi[s];
    any = any || ok;
    all = all && ok;
  }
  if (!any) throw ConstructionError("theorem2_report: no state reachable at step kh meets the switch precondition");

  const Theorem2Terms t = theorem2_terms(mdp, pi, mu, k, h, gamma, gamma_bar);
  BoundReport r{"theorem-2", std::move(instance), Direction::AtLeast, false, {}, {}};
  r.add("k=" + std::to_string(k) + " h=" + std::to_string(h), t.j_eta - t.j_pi, t.first - t.second, all);
  if (!all) r.notes.push_back("precondition fails on part of the support at step kh; row reported without a verdict");
  r.notes.push_back("the switched segment is read as [kh, (k+1)h)");
  r.notes.push_back(kProofDirectionCaveat);
  return r;
}

// ---- random instances and shipped constructions ---------------------------

/// Random MDP with rewards in [0, 1] and a random initial distribution; no terminals.
inline TabularMdp random_mdp(SplitMix64& rng, std::size_t max_states, std::size_t max_actions) {
  const std::size_t S = 1 + rng.below(max_states);
  const std::size_t A = 1 + rng.below(max_actions);
  TabularMdp m(S, A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double z = 0.0;
      for (std::size_t s2 = 0; s2 < S; ++s2) {
        // sparse-ish rows: about half the entries zero
        const double w = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
        m.p(s, a, s2) = w;
        z += w;
      }
      if (z == 0.0) {
        m.p(s, a, rng.below(S)) = 1.0;
      } else {
        for (std::size_t s2 = 0; s2 < S; ++s2) m.p(s, a, s2) /= z;
      }
      m.r(s, a) = rng.uniform();
    }
  double z = 0.0;
  for (auto& x : m.initial_dist) z += (x = rng.uniform() + 1e-3);
  for (auto& x : m.initial_dist) x /= z;
  m.reward_max = 1.0;
  return m;
}

inline TabularPolicy random_policy(SplitMix64& rng, std::size_t S, std::size_t A, std::string name = "random") {
  TabularPolicy p(S, A, std::move(name));
  const bool deterministic = rng.uniform() < 0.3;
  for (std::size_t s = 0; s < S; ++s) {
    if (deterministic) {
      p.set_deterministic(s, rng.below(A));
      continue;
    }
    double z = 0.0;
    for (std::size_t a = 0; a < A; ++a) z += (p(s, a) = rng.uniform());
    for (std::size_t a = 0; a < A; ++a) p(s, a) /= z;
  }
  return p;
}

inline double random_discount(SplitMix64& rng) { return 0.99 * rng.uniform(); }

struct LemmaSweep {
  std::size_t instances = 0;
  std::vector<BoundReport> failures;
  std::size_t checked_rows = 0;
};

inline LemmaSweep lemma_sweep(const std::string& lemma, std::size_t instances, std::uint64_t seed) {
  LemmaSweep out;
  out.instances = instances;
  SplitMix64 rng(derive_seed(seed, lemma == "discount-gap" ? 11 : lemma == "visitation-gap" ? 12 : 13));
  for (std::size_t i = 0; i < instances; ++i) {
    const TabularMdp m = random_mdp(rng, 6, 3);
    const std::string tag = lemma + " #" + std::to_string(i);
    BoundReport r;
    if (lemma == "discount-gap") {
      double a = random_discount(rng), b = random_discount(rng);
      if (a == b) b = a / 2.0;
      if (a < b) std::swap(a, b);
      r = check_discount_gap(m, random_policy(rng, m.num_states, m.num_actions), DiscountFactor(a), DiscountFactor(b), tag);
    } else if (lemma == "visitation-gap") {
      const auto p = random_policy(rng, m.num_states, m.num_actions);
      const auto e = random_policy(rng, m.num_states, m.num_actions);
      r = check_visitation_gap(m, p, e, DiscountFactor(random_discount(rng)), tag);
    } else if (lemma == "value-difference") {
      const auto p = random_policy(rng, m.num_states, m.num_actions);
      const auto e = random_policy(rng, m.num_states, m.num_actions);
      r = check_value_diff(m, p, e, DiscountFactor(random_discount(rng)), tag);
    } else {
      throw DomainError("unknown lemma '" + lemma + "'");
    }
    out.checked_rows += r.rows.size();
    if (r.violations() > 0) out.failures.push_back(std::move(r));
  }
  return out;
}

inline const std::vector<std::string>& lemma_names() {
  static const std::vector<std::string> n{"discount-gap", "visitation-gap", "value-difference"};
  return n;
}

/// One state, two self-loop actions: action 0 pays R_max, action 1 pays 0.
inline TabularMdp reward_or_nothing_mdp() {
  TabularMdp m(1, 2);
  m.p(0, 0, 0) = 1.0;
  m.p(0, 1, 0) = 1.0;
  m.r(0, 0) = 1.0;
  m.initial_dist = {1.0};
  m.reward_max = 1.0;
  return m;
}

/// State 0 as above, except action 1 drops into a zero-reward absorbing state 1.
inline TabularMdp reward_or_sink_mdp() {
  TabularMdp m(2, 2);
  m.p(0, 0, 0) = 1.0;
  m.p(0, 1, 1) = 1.0;
  m.p(1, 0, 1) = 1.0;
  m.p(1, 1, 1) = 1.0;
  m.r(0, 0) = 1.0;
  m.initial_dist = {1.0, 0.0};
  m.reward_max = 1.0;
  return m;
}

/// Chain 0..n-1; action 0 stays, action 1 moves right; the last state pays 1 per step.
inline TabularMdp corridor_mdp(std::size_t n) {
  TabularMdp m(n, 2);
  for (std::size_t s = 0; s < n; ++s) {
    m.p(s, 0, s) = 1.0;
    m.p(s, 1, std::min(s + 1, n - 1)) = 1.0;
    if (s + 1 == n) m.r(s, 0) = m.r(s, 1) = 1.0;
  }
  m.initial_dist = point_mass(n, 0);
  m.reward_max = 1.0;
  return m;
}

inline TabularPolicy constant_action(std::size_t S, std::size_t A, std::size_t a, std::string name) {
  return TabularPolicy::deterministic(std::vector<std::size_t>(S, a), A, std::move(name));
}

/// Reports for the shipped theorem constructions at gamma = 0.9, gamma_bar = 0.5.
inline std::vector<BoundReport> shipped_theorem_reports() {
  const DiscountFactor g(0.9), gb(0.5);
  std::vector<BoundReport> out;
  {
    const auto m = reward_or_nothing_mdp();
    out.push_back(theorem1_report(m, {constant_action(1, 2, 0, "collect")}, constant_action(1, 2, 1, "idle"), g, gb,
                                  "one state: prior collects R_max forever, task policy collects 0"));
  }
  {
    const auto m = reward_or_sink_mdp();
    out.push_back(theorem1_report(m, {constant_action(2, 2, 0, "collect")}, constant_action(2, 2, 1, "drop"), g, gb,
                                  "collect-or-sink: the absorbing state meets the precondition with equality"));
  }
  {
    const auto m = corridor_mdp(5);
    const auto stay = constant_action(5, 2, 0, "stay");
    const auto right = constant_action(5, 2, 1, "right");
    for (std::size_t k : {0u, 1u, 2u})
      out.push_back(theorem2_report(m, stay, right, k, 4, g, gb, "5-state corridor, pi stays, mu_bar moves right"));
  }
  return out;
}

}  // namespace smec
