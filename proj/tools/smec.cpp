#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "smec/experiment.hpp"
#include "smec/theory.hpp"

namespace {

using namespace smec;

enum Exit { kOk = 0, kUsage = 1, kRuntime = 2, kViolation = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path default_out(const std::string& flag, const std::string& configured, const std::string& name) {
  if (!flag.empty()) return flag;
  if (!configured.empty()) return configured;
  return output_root("") / name;
}

EnvSpec env_from_arg(const std::string& arg) {
  const auto suite = builtin_suite();
  if (auto it = suite.find(arg); it != suite.end()) return it->second;
  if (!fs::exists(arg)) throw ConfigError("layout", "'" + arg + "' is neither a builtin environment nor a file");
  return load_env_file(arg);
}

int cmd_train_prior(const std::string& layout, std::size_t goal, const std::string& out, std::uint64_t seed) {
  const EnvSpec env = env_from_arg(layout);
  const MazeLayout single = with_single_goal(env.layout, goal);
  const TabularMdp mdp = compile(single);
  const std::string name = env.name + "-goal" + std::to_string(goal);
  const TabularPolicy pi = train_prior(mdp, default_prior_settings(env, name), seed);
  const double sr = success_rate(mdp, pi, 100, env.episode_length, derive_seed(seed, stream::evaluation));
  const auto cells = single.state_cells();
  save_policy(out, pi, &cells);
  std::printf("wrote %s\nsuccess rate %s\n", out.c_str(), fmt(sr).c_str());
  return kOk;
}

int cmd_run(const std::string& config, const std::string& out, std::size_t jobs) {
  const ExperimentConfig cfg = load_experiment(config);
  const fs::path dir = default_out(out, cfg.output, cfg.name);
  const auto rs = run_experiment(cfg, dir, jobs);
  write_text(dir / "summary.csv", summary_csv(rs));
  for (const auto& r : rs)
    std::printf("seed %llu  final %.3f  auc %.3f  steps90 %s\n", static_cast<unsigned long long>(r.seed),
                r.final_success, r.auc, r.steps_to_90 ? std::to_string(*r.steps_to_90).c_str() : "-");
  std::printf("outputs in %s\n", dir.c_str());
  return kOk;
}

int cmd_ablate(const std::string& config, const std::string& grid, const std::string& hs, const std::string& cs,
               const std::string& out, std::size_t jobs) {
  const ExperimentConfig cfg = load_experiment(config);
  const AgentConfig base = agent_for_env(cfg, resolve_env(cfg.env));
  std::vector<std::string> h_tokens = hs.empty() ? std::vector<std::string>{std::to_string(base.h)} : split(hs, ',');
  std::vector<double> c_values;
  if (cs.empty()) {
    c_values.push_back(base.c);
  } else {
    for (const auto& t : split(cs, ',')) {
      try {
        std::size_t used = 0;
        c_values.push_back(std::stod(t, &used));
        if (used != t.size()) throw std::invalid_argument(t);
      } catch (const std::logic_error&) {
        throw ConfigError("grid.c", "bad exploration constant '" + t + "'");
      }
    }
  }
  ExperimentConfig c = cfg;
  c.agent.episode_length = base.episode_length;
  c.episode_length_given = true;
  const auto cells = make_grid(split(grid, ','), h_tokens, c_values, base);
  const fs::path dir = default_out(out, cfg.output, cfg.name + "-ablate");
  const auto rs = run_grid(c, cells, dir, jobs);
  const std::string csv = grid_csv(rs);
  write_text(dir / "grid.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return kOk;
}

void print_report(const BoundReport& r) {
  std::printf("%-18s %-8s %s\n", r.name.c_str(), r.asserted ? "asserted" : "measured", r.instance.c_str());
  for (const auto& row : r.rows)
    std::printf("    %-40s lhs %-14.10g %s rhs %-14.10g %s\n", row.where.c_str(), round_sig(row.lhs),
                r.direction == Direction::AtMost ? "<=" : ">=", round_sig(row.rhs),
                !row.precondition ? "(no verdict)" : row.violated ? "VIOLATED" : "holds");
  for (const auto& n : r.notes) std::printf("    note: %s\n", n.c_str());
}

int cmd_verify(bool lemmas, bool theorems, std::size_t instances, std::uint64_t seed, const std::string& out) {
  if (instances == 0) throw UsageError("--instances must be >= 1");
  if (!lemmas && !theorems) lemmas = theorems = true;
  const fs::path dir = default_out(out, "", "verify");
  int code = kOk;
  if (lemmas) {
    json all = json::object();
    for (const auto& name : lemma_names()) {
      const LemmaSweep sw = lemma_sweep(name, instances, seed);
      json fails = json::array();
      for (const auto& f : sw.failures) {
        fails.push_back(to_json(f));
        print_report(f);
      }
      all[name] = {{"instances", sw.instances}, {"rows", sw.checked_rows}, {"failures", fails}};
      std::printf("%-18s %zu instances, %zu rows, %zu violating instances\n", name.c_str(), sw.instances,
                  sw.checked_rows, sw.failures.size());
      if (!sw.failures.empty()) code = kViolation;
    }
    all["seed"] = seed;
    write_json(dir / "lemmas.json", all);
  }
  if (theorems) {
    json arr = json::array();
    for (const auto& r : shipped_theorem_reports()) {
      arr.push_back(to_json(r));
      print_report(r);
    }
    write_json(dir / "theorems.json", arr);
  }
  std::printf("reports in %s\n", dir.c_str());
  return code;
}

int cmd_sequence(const std::string& config, const std::string& out, std::size_t jobs) {
  if (!fs::exists(config)) throw ConfigError(config, "config file does not exist");
  const SequenceConfig sc = parse_sequence(read_json(config), fs::path(config).parent_path());
  const fs::path dir = default_out(out, sc.base.output, sc.base.name + "-sequence");
  const auto rs = run_sequence(sc, dir, jobs);
  const std::string csv = sequence_csv(rs);
  write_text(dir / "sequence.csv", csv);
  std::fputs(csv.c_str(), stdout);
  return kOk;
}

void report_one(const fs::path& seed_dir, const fs::path& ctx, std::size_t windows) {
  const RunLog log = read_run_log(seed_dir / "log.jsonl");
  write_text(seed_dir / "utilization.csv", utilization_csv(utilization(log, windows)));

  std::string sw = "episode,t,step,controller\n";
  for (const auto& r : log.transitions)
    if (r.t % log.h == 0)
      sw += std::to_string(r.episode) + ',' + std::to_string(r.t) + ',' + std::to_string(r.step) + ',' +
            std::to_string(r.controller) + '\n';
  write_text(seed_dir / "switch_dynamics.csv", sw);

  const EnvSpec env = load_env_file(ctx / "env.txt");
  const TabularMdp mdp = compile(env.layout);
  const auto cells = env.layout.state_cells();
  PriorSet priors;
  for (std::size_t i = 1; i < log.num_policies; ++i) {
    LoadedPolicy lp = load_policy(ctx / "priors" / ("prior-" + std::to_string(i) + ".json"));
    priors.push_back(lp.cells ? remap_policy(lp.policy, *lp.cells, cells) : lp.policy);
  }
  std::vector<PriorValueSeries> va;
  if (!priors.empty() && !log.snapshots.empty()) va = value_accuracy_report(log, mdp, priors, 100, 0);
  write_text(seed_dir / "value_accuracy.csv", value_accuracy_csv(va));
  std::printf("wrote reports in %s\n", seed_dir.c_str());
}

int cmd_report(const std::string& run_dir, std::size_t windows) {
  const fs::path d = run_dir;
  if (!fs::is_directory(d)) throw ConfigError("run-dir", "'" + run_dir + "' is not a directory");
  if (fs::exists(d / "log.jsonl")) {
    report_one(d, d.parent_path(), windows);
    return kOk;
  }
  std::vector<fs::path> seeds;
  for (const auto& e : fs::directory_iterator(d))
    if (e.is_directory() && e.path().filename().string().rfind("seed-", 0) == 0) seeds.push_back(e.path());
  if (seeds.empty()) throw Error("no log.jsonl under '" + run_dir + "'");
  std::sort(seeds.begin(), seeds.end());
  for (const auto& s : seeds) report_one(s, d, windows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smec: segment-wise behavior control over prior policies, tabular lab"};
  app.require_subcommand(1);

  std::string layout, out, config, grid, hs, cs, run_dir;
  std::size_t goal = 0, jobs = 1, instances = 200, windows = 10;
  std::uint64_t seed = 0;
  bool lemmas = false, theorems = false;

  auto* tp = app.add_subcommand("train-prior", "train a goal-reaching prior on a maze");
  tp->add_option("layout", layout, "layout file or builtin environment name")->required();
  tp->add_option("--goal", goal, "goal id, row-major among the 'G' cells")->required();
  tp->add_option("--out", out, "policy file to write")->required();
  tp->add_option("--seed", seed);

  auto* run = app.add_subcommand("run", "run one experiment over its seeds");
  run->add_option("config", config)->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--jobs", jobs, "seeds run concurrently")->check(CLI::PositiveNumber);

  auto* ab = app.add_subcommand("ablate", "run a variant x h x c grid");
  ab->add_option("config", config)->required();
  ab->add_option("--grid", grid, "comma-separated variants: smec, scratch, single-head, no-truncation, no-ucb, random-switch")
      ->required();
  ab->add_option("--seg", hs, "comma-separated segment lengths, integers or H/<n>");
  ab->add_option("--c", cs, "comma-separated exploration constants");
  ab->add_option("--out", out);
  ab->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

  auto* vf = app.add_subcommand("verify", "check the lemmas and report the theorem constructions");
  vf->add_flag("--lemmas", lemmas);
  vf->add_flag("--theorems", theorems);
  vf->add_option("--instances", instances, "random instances per lemma");
  vf->add_option("--seed", seed);
  vf->add_option("--out", out);

  auto* sq = app.add_subcommand("sequence", "run a continual task sequence");
  sq->add_option("config", config)->required();
  sq->add_option("--out", out);
  sq->add_option("--jobs", jobs)->check(CLI::PositiveNumber);

  auto* rp = app.add_subcommand("report", "utilization, switch dynamics and value accuracy from stored logs");
  rp->add_option("run-dir", run_dir)->required();
  rp->add_option("--windows", windows)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*tp) return cmd_train_prior(layout, goal, out, seed);
    if (*run) return cmd_run(config, out, jobs);
    if (*ab) return cmd_ablate(config, grid, hs, cs, out, jobs);
    if (*vf) return cmd_verify(lemmas, theorems, instances, seed, out);
    if (*sq) return cmd_sequence(config, out, jobs);
    if (*rp) return cmd_report(run_dir, windows);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
