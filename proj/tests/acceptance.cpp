// Acceptance checks: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "smec/baseline.hpp"
#include "smec/experiment.hpp"
#include "smec/theory.hpp"

using namespace smec;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmtd(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- shared fixtures ------------------------------------------------------

const PriorSet& corner_priors() {
  static const PriorSet p = train_corner_priors(0);
  return p;
}

PriorSet composed_priors(const MazeLayout& layout) {
  const PriorSet all = corner_priors_for(layout, corner_priors());
  return {all[3], all[1]};  // bottom-right, top-right
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = i;
  return s;
}

std::vector<RunLog> run_seeds(const TabularMdp& mdp, const PriorSet& priors, AgentConfig c, std::size_t n,
                              bool transitions = true) {
  c.record_transitions = transitions;
  c.record_snapshots = false;
  std::vector<RunLog> out;
  for (auto s : seeds(n)) {
    c.seed = s;
    out.push_back(train(mdp, priors, c));
  }
  return out;
}

double censored_steps90(const RunLog& log) {
  const auto s = steps_to_threshold(log.evals, 0.9);
  return static_cast<double>(s ? *s : log.env_steps);
}

// ---- criteria -------------------------------------------------------------

Outcome truncation_identity() {
  double worst = 0.0;
  for (double eps : {1e-4, 1e-2})
    for (std::size_t h : {5u, 10u, 50u}) worst = std::max(worst, std::abs(std::pow(truncated_discount(eps, h).value(), double(h)) - eps));
  const double g = truncated_discount(1e-4, 50).value();
  return {worst <= 1e-12 && std::abs(g - 0.831764) <= 1e-6,
          "max |gbar^h - eps| = " + fmtd("%.3g", worst) + ", gbar(1e-4, 50) = " + fmtd("%.8f", g)};
}

Outcome oracle_convergence() {
  MazeLayout layout = parse_layout(
      "#######\n"
      "#S....#\n"
      "#.#...#\n"
      "#.....#\n"
      "#...#.#\n"
      "#....G#\n"
      "#######\n");
  layout.slip_prob = 0.1;
  const TabularMdp mdp = compile(layout);
  std::mt19937_64 g(7);
  const TabularPolicy pi = oracle::random_stochastic_policy(g, mdp.num_states, mdp.num_actions, "task");
  const PriorSet priors{oracle::random_stochastic_policy(g, mdp.num_states, mdp.num_actions, "mu1"),
                        oracle::random_stochastic_policy(g, mdp.num_states, mdp.num_actions, "mu2")};
  const double gamma = 0.95;
  const double gbar = truncated_discount(1e-4, 10).value();
  HybridQTable table(mdp.num_states, mdp.num_actions, {gamma, gbar, gbar}, mdp.reward_max);
  TargetTable target(table);

  // Every (s, a, s') with positive probability, and the matching expected-update batch.
  std::vector<Transition> all, reps;
  std::vector<std::pair<std::size_t, double>> owner;  // (rep index, probability)
  for (std::size_t s = 0; s < mdp.num_states; ++s)
    for (std::size_t a = 0; a < mdp.num_actions; ++a) {
      reps.push_back({s, a, mdp.r(s, a), s, false});
      for (std::size_t s2 = 0; s2 < mdp.num_states; ++s2)
        if (mdp.p(s, a, s2) > 0.0) {
          all.push_back({s, a, mdp.r(s, a), s2, mdp.is_terminal(s2)});
          owner.emplace_back(reps.size() - 1, mdp.p(s, a, s2));
        }
    }
  const std::size_t heads = 3;
  std::size_t sweeps = 0;
  for (; sweeps < 5000; ++sweeps) {
    const auto t = td_targets(all, target, pi, priors);
    std::vector<double> expected(reps.size() * heads, 0.0);
    for (std::size_t i = 0; i < all.size(); ++i)
      for (std::size_t h = 0; h < heads; ++h) expected[owner[i].first * heads + h] += owner[i].second * t[i * heads + h];
    const auto before = table.values();
    apply_update(table, reps, expected, 1.0);
    sync_target(table, target, 1);
    double delta = 0.0;
    for (std::size_t i = 0; i < before.size(); ++i) delta = std::max(delta, std::abs(before[i] - table.values()[i]));
    if (delta < 1e-13) break;
  }
  double err = 0.0;
  for (std::size_t h = 0; h < heads; ++h) {
    const QTable exact = exact_q_values(mdp, h == 0 ? pi : priors[h - 1], DiscountFactor(table.discounts()[h]));
    for (std::size_t s = 0; s < mdp.num_states; ++s)
      for (std::size_t a = 0; a < mdp.num_actions; ++a) err = std::max(err, std::abs(table(s, a, h) - exact(s, a)));
  }
  return {err <= 1e-6, std::to_string(mdp.num_states) + " states, " + std::to_string(sweeps) +
                           " sweeps, sup-norm error " + fmtd("%.3g", err)};
}

Outcome lemma_suites() {
  std::string d;
  std::size_t bad = 0;
  for (const auto& name : lemma_names()) {
    const auto sw = lemma_sweep(name, 200, 0);
    bad += sw.failures.size();
    d += name + " " + std::to_string(sw.failures.size()) + "/200 ";
  }
  return {bad == 0, d + "violating instances"};
}

Outcome planner_reductions() {
  std::mt19937_64 g(11);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + g() % 6;
    PlannerState p(n, 1 + g() % 10, 0.0);
    p.current = g() % n;
    for (std::size_t i = 0; i < n; ++i) p.N1[i] = 1 + g() % 50;
    for (auto& x : p.N2) x = g() % 20;
    p.T = 1 + g() % 1000;
    std::vector<double> v(n);
    for (auto& x : v) x = trial % 3 == 0 ? double(g() % 3) : std::uniform_real_distribution<double>(0, 10)(g);
    if (select_ucb(v, p) != select_greedy(v)) ++mismatches;
  }
  PlannerState p(4, 7, 2.0);
  bool counts_ok = true;
  for (std::size_t step = 0; step < 100000; ++step) {
    std::optional<std::size_t> sw;
    if (p.at_boundary()) {
      std::vector<double> v(4);
      for (auto& x : v) x = std::uniform_real_distribution<double>(0, 1)(g);
      sw = select_ucb(v, p);
    }
    advance(p, sw);
    std::uint64_t n1 = 0, n2 = 0;
    for (auto x : p.N1) n1 += x;
    for (auto x : p.N2) n2 += x;
    counts_ok = counts_ok && n1 == p.T && n2 == p.T;
  }
  return {mismatches == 0 && counts_ok, std::to_string(mismatches) + " c=0 mismatches in 1000; count invariants " +
                                            (counts_ok ? "held" : "broke") + " over 1e5 steps (T=" +
                                            std::to_string(p.T) + ")"};
}

Outcome scratch_equivalence() {
  const EnvSpec env = builtin_suite().at("composed-route");
  const TabularMdp mdp = compile(env.layout);
  bool same = true;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    AgentConfig c;
    c.seed = seed;
    const RunLog log = train(mdp, {}, c);
    const SarsaResult ref = expected_sarsa(mdp, c.gamma, c.learning_rate, c.temperature, c.batch_size,
                                           c.replay_capacity, c.warm_start_steps, c.target_sync_period,
                                           c.episode_length, c.total_env_steps, seed);
    const auto& v = log.final_table.values();
    same = same && v.size() == ref.q.size() && std::memcmp(v.data(), ref.q.data(), v.size() * sizeof(double)) == 0;
    same = same && log.transitions.size() == ref.transitions.size();
    for (std::size_t i = 0; same && i < ref.transitions.size(); ++i) same = log.transitions[i].transition == ref.transitions[i];
  }
  return {same, same ? "K=0 tables and trajectories bit-identical over 3 seeds" : "tables differ"};
}

struct ComposedRuns {
  std::vector<RunLog> smec, scratch;
};

const ComposedRuns& composed_runs() {
  static const ComposedRuns r = [] {
    const EnvSpec env = builtin_suite().at("composed-route");
    const TabularMdp mdp = compile(env.layout);
    AgentConfig c;
    return ComposedRuns{run_seeds(mdp, composed_priors(env.layout), c, 10), run_seeds(mdp, {}, c, 10)};
  }();
  return r;
}

Outcome sample_efficiency() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& r = composed_runs();
  std::vector<double> a, b;
  for (const auto& l : r.smec) a.push_back(censored_steps90(l));
  for (const auto& l : r.scratch) b.push_back(censored_steps90(l));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double ma = median(a), mb = median(b);
  return {ma <= 0.5 * mb && secs < 300.0, "median steps to 0.9: SMEC " + fmtd("%.0f", ma) + ", scratch " +
                                              fmtd("%.0f", mb) + " (censored at " +
                                              std::to_string(r.scratch[0].env_steps) + "), " + fmtd("%.1f", secs) + " s"};
}

Outcome weaning() {
  std::vector<double> first, last;
  for (const auto& l : composed_runs().smec) {
    const auto u = utilization(l, 10);
    first.push_back(u.prior_fraction(0));
    last.push_back(u.prior_fraction(9));
  }
  const double mf = median(first), ml = median(last);
  return {ml <= 0.2 && ml < mf, "median prior share: first window " + fmtd("%.3f", mf) + ", final 10% " + fmtd("%.3f", ml)};
}

Outcome ablation_directions() {
  std::vector<double> smec, notrunc, single;
  std::vector<double> scratch_wp, random_wp;
  for (const auto& name : downstream_mazes()) {
    const EnvSpec env = builtin_suite().at(name);
    const TabularMdp mdp = compile(env.layout);
    const PriorSet priors = corner_priors_for(env.layout, corner_priors());
    AgentConfig c;
    auto auc = [](const std::vector<RunLog>& logs, std::vector<double>& out) {
      for (const auto& l : logs) out.push_back(success_auc(l.evals));
    };
    auc(run_seeds(mdp, priors, c, 10, false), smec);
    auc(run_seeds(mdp, priors, variant_no_truncation(c), 10, false), notrunc);
    auc(run_seeds(mdp, priors, variant_single_head(c), 10, false), single);
    if (name == "west-pocket") {
      auc(run_seeds(mdp, {}, c, 10, false), scratch_wp);
      auc(run_seeds(mdp, priors, variant_random_switch(c), 10, false), random_wp);
    }
  }
  const SignTest a = sign_test(smec, notrunc), b = sign_test(smec, single), r = sign_test(scratch_wp, random_wp);
  auto show = [](const char* n, const SignTest& t) {
    return std::string(n) + " " + std::to_string(t.wins) + "/" + std::to_string(t.losses) + "/" +
           std::to_string(t.ties) + " p=" + fmtd("%.3g", t.p_value);
  };
  return {a.p_value < 0.05 && b.p_value < 0.05 && r.p_value < 0.05,
          "success AUC sign tests (win/loss/tie): " + show("smec>no-truncation", a) + "; " +
              show("smec>single-head", b) + "; " + show("scratch>random-switch [west-pocket]", r)};
}

Outcome h_sensitivity() {
  const EnvSpec env = builtin_suite().at("composed-route");
  const TabularMdp mdp = compile(env.layout);
  const PriorSet priors = composed_priors(env.layout);
  std::map<std::size_t, std::vector<double>> fin;
  for (std::size_t div : {50u, 20u, 10u, 5u}) {
    AgentConfig c;
    c.h = env.episode_length / div;
    for (const auto& l : run_seeds(mdp, priors, c, 10, false)) fin[div].push_back(l.evals.back().success_rate);
  }
  auto lo = [&](std::size_t d) { return quantile(fin[d], 0.25); };
  auto hi = [&](std::size_t d) { return quantile(fin[d], 0.75); };
  auto overlap = [&](std::size_t x, std::size_t y) { return lo(x) <= hi(y) && lo(y) <= hi(x); };
  const bool dir = median(fin[50]) <= median(fin[10]);
  const bool iqr = overlap(20, 10) && overlap(10, 5) && overlap(20, 5);
  std::string d = "median final success";
  for (std::size_t div : {50u, 20u, 10u, 5u})
    d += " H/" + std::to_string(div) + "=" + fmtd("%.2f", median(fin[div])) + " [" + fmtd("%.2f", lo(div)) + "," +
         fmtd("%.2f", hi(div)) + "]";
  return {dir && iqr, d};
}

Outcome value_accuracy() {
  const EnvSpec env = builtin_suite().at("composed-route");
  const TabularMdp mdp = compile(env.layout);
  const PriorSet priors = composed_priors(env.layout);
  AgentConfig c;
  c.total_env_steps = 30000;
  c.record_snapshots = false;
  double worst = 0.0;
  std::vector<double> e_smec, e_full;
  std::size_t states = 0;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    c.seed = seed;
    const RunLog a = train(mdp, priors, c);
    const RunLog b = train(mdp, priors, variant_no_truncation(c));
    const auto visited = visited_states(a, 0.01);
    states += visited.size();
    for (const auto& v : head_errors_at(a.final_table, mdp, priors, visited))
      for (double x : v) {
        worst = std::max(worst, x);
        e_smec.push_back(x);
      }
    for (const auto& v : head_errors_at(b.final_table, mdp, priors, visited)) e_full.insert(e_full.end(), v.begin(), v.end());
  }
  const double ms = median(e_smec), mf = median(e_full);
  return {worst <= 1e-2 && mf > ms, std::to_string(states) + " visited states over 3 seeds: max truncated-head error " +
                                        fmtd("%.3g", worst) + ", median " + fmtd("%.3g", ms) + " vs untruncated " +
                                        fmtd("%.3g", mf)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SMEC_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

Outcome theorem_reports() {
  const auto reps = shipped_theorem_reports();
  bool rhs8 = false, caveat = true, t2 = false;
  for (const auto& r : reps) {
    const json j = to_json(r);
    if (r.name == "theorem-1" && !j["rows"].empty() && j["rows"][0]["rhs"].get<double>() == 8.0) rhs8 = true;
    if (r.name == "theorem-2") t2 = true;
    caveat = caveat && std::find(r.notes.begin(), r.notes.end(), kProofDirectionCaveat) != r.notes.end();
  }
  const auto dir = oracle::scratch_dir("acceptance-theorems");
  const int rc = run_cli("verify --theorems --out " + dir.string());
  const bool files = fs::exists(dir / "theorems.json");
  const json disk = files ? read_json(dir / "theorems.json") : json::array();
  const bool disk_rhs = files && disk[0]["rows"][0]["rhs"].dump() == "8.0";
  return {rhs8 && caveat && t2 && rc == 0 && disk_rhs,
          std::to_string(reps.size()) + " reports, theorem-1 RHS " + (disk_rhs ? "8.0" : "not 8.0") +
              ", caveat " + (caveat ? "flagged" : "missing") + ", exit " + std::to_string(rc)};
}

Outcome reproducibility() {
  const auto dir = oracle::scratch_dir("acceptance-repro");
  write_json(dir / "cfg.json", {{"env", "composed-route"},
                                {"priors", {"train-fresh:bottom-right", "train-fresh:top-right"}},
                                {"agent", {{"total_env_steps", 5000}}},
                                {"seeds", {3, 4}}});
  const int a = run_cli("run " + (dir / "cfg.json").string() + " --out " + (dir / "a").string());
  const int b = run_cli("run " + (dir / "cfg.json").string() + " --out " + (dir / "b").string());
  std::size_t compared = 0, same = 0;
  for (const auto& rel : {"seed-3/metrics.csv", "seed-4/metrics.csv", "summary.csv"}) {
    ++compared;
    if (fs::exists(dir / "a" / rel) && read_text(dir / "a" / rel) == read_text(dir / "b" / rel)) ++same;
  }
  return {a == 0 && b == 0 && same == compared,
          std::to_string(same) + "/" + std::to_string(compared) + " CSV files byte-identical across reruns"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"truncation identity", truncation_identity},
      {"oracle convergence", oracle_convergence},
      {"lemma suites", lemma_suites},
      {"planner reductions", planner_reductions},
      {"scratch equivalence", scratch_equivalence},
      {"sample efficiency", sample_efficiency},
      {"weaning", weaning},
      {"ablation directions", ablation_directions},
      {"h sensitivity", h_sensitivity},
      {"value accuracy", value_accuracy},
      {"theorem reports", theorem_reports},
      {"reproducibility", reproducibility},
  };
  const double limits[] = {1.0, 10.0, 60.0, 0, 0, 300.0, 0, 0, 0, 0, 0, 0};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (limits[i] > 0 && secs >= limits[i]) {
      o.pass = false;
      o.detail += "; over the " + fmtd("%.0f", limits[i]) + " s budget";
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %s  %-20s %s (%.2f s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
