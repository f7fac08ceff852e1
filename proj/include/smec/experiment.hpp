#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "smec/agent.hpp"
#include "smec/errors.hpp"
#include "smec/io.hpp"
#include "smec/maze.hpp"
#include "smec/metrics.hpp"
#include "smec/suite.hpp"

namespace smec {

inline constexpr const char* kVersion = "smec 0.1.0";

// ---- statistics -----------------------------------------------------------

/// Linear-interpolation quantile (the usual "type 7").
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(const std::vector<double>& v) { return quantile(v, 0.5); }

struct SignTest {
  std::size_t wins = 0;
  std::size_t losses = 0;
  std::size_t ties = 0;
  double p_value = 1.0;  // one-sided: P(X >= wins) under Binomial(wins + losses, 1/2)
};

/// Paired one-sided sign test that `a` exceeds `b`; ties are dropped.
inline SignTest sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DomainError("sign_test: samples are not paired");
  SignTest t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++t.wins;
    else if (a[i] < b[i]) ++t.losses;
    else ++t.ties;
  }
  const std::size_t n = t.wins + t.losses;
  double p = 0.0;
  for (std::size_t k = t.wins; k <= n; ++k)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) - n * std::log(2.0));
  t.p_value = n == 0 ? 1.0 : std::min(1.0, p);
  return t;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---- configuration --------------------------------------------------------

struct PriorSource {
  std::string spec;  // "train-fresh:<corner>" or a policy file path
};

struct ExperimentConfig {
  std::string name;
  std::string env;  // builtin name or layout path
  std::vector<PriorSource> priors;
  std::uint64_t prior_seed = 0;
  AgentConfig agent;
  bool h_given = false;
  bool episode_length_given = false;
  std::vector<std::uint64_t> seeds;
  std::string output;
  json raw;
};

namespace detail {

inline std::uint64_t as_uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw ConfigError(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  return j.get<double>();
}

inline bool as_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path, "expected a string");
  return j.get<std::string>();
}

inline void parse_flags(const json& j, VariantFlags& f, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    const std::string p = path + "." + k;
    if (k == "disentangled") f.disentangled = as_bool(v, p);
    else if (k == "truncated") f.truncated = as_bool(v, p);
    else if (k == "ucb") f.ucb = as_bool(v, p);
    else if (k == "random_switch") f.random_switch = as_bool(v, p);
    else throw ConfigError(p, "unknown field");
  }
}

}  // namespace detail

/// Applies a named variant ("smec", "single-head", "no-truncation", "no-ucb", "random-switch").
inline AgentConfig apply_variant(const AgentConfig& c, const std::string& v, const std::string& path = "variant") {
  if (v == "smec" || v == "scratch") return c;
  if (v == "single-head") return variant_single_head(c);
  if (v == "no-truncation") return variant_no_truncation(c);
  if (v == "no-ucb") return variant_no_ucb(c);
  if (v == "random-switch") return variant_random_switch(c);
  throw ConfigError(path, "unknown variant '" + v + "'");
}

inline void parse_agent(const json& j, ExperimentConfig& cfg, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected an object");
  AgentConfig& a = cfg.agent;
  for (const auto& [k, v] : j.items()) {
    const std::string p = path + "." + k;
    using namespace detail;
    if (k == "h") { a.h = as_uint(v, p); cfg.h_given = true; }
    else if (k == "epsilon") a.epsilon = as_number(v, p);
    else if (k == "c") a.c = as_number(v, p);
    else if (k == "gamma") a.gamma = as_number(v, p);
    else if (k == "learning_rate") a.learning_rate = as_number(v, p);
    else if (k == "batch_size") a.batch_size = as_uint(v, p);
    else if (k == "replay_capacity") a.replay_capacity = as_uint(v, p);
    else if (k == "warm_start_steps") a.warm_start_steps = as_uint(v, p);
    else if (k == "target_sync_period") a.target_sync_period = as_uint(v, p);
    else if (k == "polyak_tau") a.polyak_tau = as_number(v, p);
    else if (k == "temperature") a.temperature = as_number(v, p);
    else if (k == "temperature_final") a.temperature_final = as_number(v, p);
    else if (k == "episode_length") { a.episode_length = as_uint(v, p); cfg.episode_length_given = true; }
    else if (k == "total_env_steps") a.total_env_steps = as_uint(v, p);
    else if (k == "eval_interval") a.eval_interval = as_uint(v, p);
    else if (k == "eval_episodes") a.eval_episodes = as_uint(v, p);
    else if (k == "record_snapshots") a.record_snapshots = as_bool(v, p);
    else if (k == "flags") parse_flags(v, a.flags, p);
    else if (k == "seed") throw ConfigError(p, "per-run seeds come from the top-level \"seeds\" list");
    else throw ConfigError(p, "unknown field");
  }
}

inline bool looks_like_path(const std::string& s) {
  return s.find('/') != std::string::npos || s.find('.') != std::string::npos;
}

/// Parses and validates an experiment document. Relative paths resolve
/// against `base_dir`. Every error names the offending field.
inline ExperimentConfig parse_experiment(const json& j, const fs::path& base_dir = {}) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  ExperimentConfig cfg;
  cfg.raw = j;
  std::string variant = "smec";
  for (const auto& [k, v] : j.items()) {
    if (k == "name") cfg.name = as_string(v, k);
    else if (k == "env") cfg.env = as_string(v, k);
    else if (k == "priors") {
      if (!v.is_array()) throw ConfigError(k, "expected an array");
      for (std::size_t i = 0; i < v.size(); ++i) cfg.priors.push_back({as_string(v[i], "priors[" + std::to_string(i) + "]")});
    } else if (k == "prior_seed") cfg.prior_seed = as_uint(v, k);
    else if (k == "agent") parse_agent(v, cfg, k);
    else if (k == "seeds") {
      if (!v.is_array()) throw ConfigError(k, "expected an array");
      for (std::size_t i = 0; i < v.size(); ++i) cfg.seeds.push_back(as_uint(v[i], "seeds[" + std::to_string(i) + "]"));
    } else if (k == "output") cfg.output = as_string(v, k);
    else if (k == "variant") variant = as_string(v, k);
    else throw ConfigError(k, "unknown field");
  }
  if (cfg.env.empty()) throw ConfigError("env", "required");
  if (cfg.seeds.empty()) throw ConfigError("seeds", "must list at least one seed");
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    if (!seen.insert(cfg.seeds[i]).second) throw ConfigError("seeds[" + std::to_string(i) + "]", "duplicate seed");

  const auto suite = builtin_suite();
  if (!suite.count(cfg.env)) {
    fs::path p = cfg.env;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!looks_like_path(cfg.env) || !fs::exists(p))
      throw ConfigError("env", "'" + cfg.env + "' is neither a builtin environment nor an existing layout file");
    cfg.env = p.string();
  }
  for (std::size_t i = 0; i < cfg.priors.size(); ++i) {
    std::string& s = cfg.priors[i].spec;
    const std::string path = "priors[" + std::to_string(i) + "]";
    if (s.rfind("train-fresh:", 0) == 0) {
      const std::string corner = s.substr(12);
      const auto& names = corner_names();
      if (std::find(names.begin(), names.end(), corner) == names.end())
        throw ConfigError(path, "unknown corner '" + corner + "'");
      continue;
    }
    fs::path p = s;
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    if (!fs::exists(p)) throw ConfigError(path, "prior file '" + p.string() + "' does not exist");
    s = p.string();
  }
  cfg.agent = apply_variant(cfg.agent, variant);
  if (variant == "scratch") cfg.priors.clear();
  if (cfg.name.empty()) cfg.name = fs::path(cfg.env).stem().string();
  validate_config(cfg.agent);
  return cfg;
}

inline ExperimentConfig load_experiment(const fs::path& p) {
  if (!fs::exists(p)) throw ConfigError(p.string(), "config file does not exist");
  return parse_experiment(read_json(p), p.parent_path());
}

/// Output root: explicit setting, else $SMEC_OUT_DIR, else ./smec-out.
inline fs::path output_root(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* e = std::getenv("SMEC_OUT_DIR"); e && *e) return e;
  return "smec-out";
}

// ---- environment and prior resolution --------------------------------------

inline EnvSpec resolve_env(const std::string& env) {
  const auto suite = builtin_suite();
  if (auto it = suite.find(env); it != suite.end()) return it->second;
  return load_env_file(env);
}

/// Trained corner priors are deterministic in the seed; cache them per seed.
inline const PriorSet& cached_corner_priors(std::uint64_t seed) {
  static std::mutex mu;
  static std::map<std::uint64_t, PriorSet> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(seed);
  if (it == cache.end()) it = cache.emplace(seed, train_corner_priors(seed)).first;
  return it->second;
}

inline PriorSet resolve_priors(const std::vector<PriorSource>& srcs, const EnvSpec& env, std::uint64_t prior_seed) {
  const TabularMdp mdp = compile(env.layout);
  const auto cells = env.layout.state_cells();
  const auto corner_cells = builtin_suite().at("empty-corners").layout.state_cells();
  PriorSet out;
  for (const auto& src : srcs) {
    if (src.spec.rfind("train-fresh:", 0) == 0) {
      const std::string corner = src.spec.substr(12);
      const auto& names = corner_names();
      const std::size_t g = static_cast<std::size_t>(std::find(names.begin(), names.end(), corner) - names.begin());
      out.push_back(remap_policy(cached_corner_priors(prior_seed)[g], corner_cells, cells));
      continue;
    }
    LoadedPolicy lp = load_policy(src.spec);
    if (lp.cells) {
      out.push_back(remap_policy(lp.policy, *lp.cells, cells));
    } else {
      if (lp.policy.num_states() != mdp.num_states || lp.policy.num_actions() != mdp.num_actions)
        throw ShapeError("prior '" + src.spec + "' does not match the environment's " +
                         std::to_string(mdp.num_states) + " states; add a \"cells\" field to remap it");
      out.push_back(std::move(lp.policy));
    }
  }
  return out;
}

/// Fills config values that default from the environment (H, h = H/10).
inline AgentConfig agent_for_env(const ExperimentConfig& cfg, const EnvSpec& env) {
  AgentConfig a = cfg.agent;
  if (!cfg.episode_length_given) a.episode_length = env.episode_length;
  if (!cfg.h_given) a.h = std::max<std::size_t>(1, a.episode_length / 10);
  return a;
}

// ---- runs -----------------------------------------------------------------

struct RunSummary {
  std::uint64_t seed = 0;
  double final_success = 0.0;
  double auc = 0.0;
  std::optional<std::size_t> steps_to_90;
  std::optional<std::size_t> steps_to_target;
  std::size_t env_steps = 0;
};

inline RunSummary summarize(const RunLog& log, std::uint64_t seed, double target = 0.9) {
  RunSummary s;
  s.seed = seed;
  s.final_success = log.evals.empty() ? 0.0 : log.evals.back().success_rate;
  s.auc = success_auc(log.evals);
  s.steps_to_90 = steps_to_threshold(log.evals, 0.9);
  s.steps_to_target = steps_to_threshold(log.evals, target);
  s.env_steps = log.env_steps;
  return s;
}

inline std::string seed_dir_name(std::uint64_t seed) { return "seed-" + std::to_string(seed); }

/// Writes one seed's artifacts: log.jsonl, metrics.csv, checkpoint.json.
inline void write_seed_outputs(const fs::path& dir, const RunLog& log) {
  fs::create_directories(dir);
  write_run_log(dir / "log.jsonl", log);
  write_text(dir / "metrics.csv", metrics_csv(log));
  write_json(dir / "checkpoint.json", checkpoint_json(log.final_table, log.env_steps));
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results land in index order.
template <class Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr err;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(jobs, n); ++w)
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= n || err) return;
          i = next++;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct PreparedRun {
  EnvSpec env;
  TabularMdp mdp;
  PriorSet priors;
  AgentConfig agent;
};

inline PreparedRun prepare(const ExperimentConfig& cfg) {
  PreparedRun p;
  p.env = resolve_env(cfg.env);
  p.mdp = compile(p.env.layout);
  p.priors = resolve_priors(cfg.priors, p.env, cfg.prior_seed);
  p.agent = agent_for_env(cfg, p.env);
  validate_config(p.agent);
  check_prior_shapes(p.priors, p.mdp.num_states, p.mdp.num_actions);
  return p;
}

inline json manifest_json(const ExperimentConfig& cfg, const PreparedRun& p) {
  const std::string canon = cfg.raw.dump();
  json prior_names = json::array();
  for (const auto& pr : p.priors) prior_names.push_back(pr.name());
  return {{"version", kVersion},
          {"config_hash", hex64(fnv1a(canon))},
          {"config", cfg.raw},
          {"env", p.env.name},
          {"priors", prior_names},
          {"seeds", cfg.seeds},
          {"h", p.agent.h},
          {"episode_length", p.agent.episode_length}};
}

/// Writes the environment and priors next to the runs so `report` needs nothing else.
inline void write_run_context(const fs::path& dir, const PreparedRun& p) {
  write_text(dir / "env.txt", p.env.layout.to_text());
  write_json(dir / "env.json", sidecar_json(p.env));
  const auto cells = p.env.layout.state_cells();
  for (std::size_t i = 0; i < p.priors.size(); ++i)
    save_policy(dir / "priors" / ("prior-" + std::to_string(i + 1) + ".json"), p.priors[i], &cells);
}

/// Executes every seed of an experiment under `dir`.
inline std::vector<RunSummary> run_experiment(const ExperimentConfig& cfg, const fs::path& dir, std::size_t jobs = 1,
                                              std::vector<RunLog>* logs_out = nullptr) {
  const PreparedRun p = prepare(cfg);
  fs::create_directories(dir);
  write_json(dir / "manifest.json", manifest_json(cfg, p));
  write_run_context(dir, p);
  std::vector<RunSummary> out(cfg.seeds.size());
  std::vector<RunLog> logs(logs_out ? cfg.seeds.size() : 0);
  parallel_for(cfg.seeds.size(), jobs, [&](std::size_t i) {
    AgentConfig a = p.agent;
    a.seed = cfg.seeds[i];
    RunLog log = train(p.mdp, p.priors, a);
    write_seed_outputs(dir / seed_dir_name(a.seed), log);
    out[i] = summarize(log, a.seed);
    if (logs_out) logs[i] = std::move(log);
  });
  if (logs_out) *logs_out = std::move(logs);
  return out;
}

inline std::string summary_csv(const std::vector<RunSummary>& rs) {
  std::string out = "seed,final_success,auc,steps_to_90\n";
  for (const auto& r : rs)
    out += std::to_string(r.seed) + ',' + fmt(r.final_success) + ',' + fmt(r.auc) + ',' +
           (r.steps_to_90 ? std::to_string(*r.steps_to_90) : std::string("")) + '\n';
  return out;
}

// ---- ablation grids -------------------------------------------------------

struct GridCell {
  std::string variant;
  std::size_t h = 0;
  double c = 1.0;
  std::string label() const {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", c);
    return variant + "_h" + std::to_string(h) + "_c" + buf;
  }
};

/// Parses a segment-length token: an integer, or "H/<n>" relative to the episode length.
inline std::size_t parse_h_token(const std::string& tok, std::size_t episode_length) {
  try {
    std::size_t used = 0;
    if (tok.rfind("H/", 0) == 0) {
      const unsigned long d = std::stoul(tok.substr(2), &used);
      if (used + 2 != tok.size() || d == 0) throw std::invalid_argument(tok);
      return std::max<std::size_t>(1, episode_length / d);
    }
    const unsigned long v = std::stoul(tok, &used);
    if (used != tok.size() || v == 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("grid.h", "bad segment length '" + tok + "'");
  }
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

struct CellResult {
  GridCell cell;
  std::vector<RunSummary> runs;
};

inline std::vector<GridCell> make_grid(const std::vector<std::string>& variants, const std::vector<std::string>& hs,
                                       const std::vector<double>& cs, const AgentConfig& base) {
  std::vector<GridCell> g;
  for (const auto& v : variants) {
    (void)apply_variant(base, v, "grid.variants");
    for (const auto& ht : hs)
      for (double c : cs) g.push_back({v, parse_h_token(ht, base.episode_length), c});
  }
  return g;
}

inline std::vector<CellResult> run_grid(const ExperimentConfig& cfg, const std::vector<GridCell>& grid,
                                        const fs::path& dir, std::size_t jobs = 1) {
  std::vector<CellResult> out;
  for (const auto& cell : grid) {
    ExperimentConfig c = cfg;
    c.agent = apply_variant(cfg.agent, cell.variant, "grid.variants");
    c.agent.h = cell.h;
    c.h_given = true;
    c.agent.c = cell.c;
    c.raw["grid_cell"] = {{"variant", cell.variant}, {"h", cell.h}, {"c", cell.c}};
    if (cell.variant == "scratch") c.priors.clear();
    out.push_back({cell, run_experiment(c, dir / cell.label(), jobs)});
  }
  return out;
}

inline std::string grid_csv(const std::vector<CellResult>& rs) {
  std::string out = "cell,variant,h,c,median_final_success,q1_final_success,q3_final_success,median_auc\n";
  for (const auto& r : rs) {
    std::vector<double> fin, auc;
    for (const auto& s : r.runs) {
      fin.push_back(s.final_success);
      auc.push_back(s.auc);
    }
    out += r.cell.label() + ',' + r.cell.variant + ',' + std::to_string(r.cell.h) + ',' + fmt(r.cell.c) + ',' +
           fmt(median(fin)) + ',' + fmt(quantile(fin, 0.25)) + ',' + fmt(quantile(fin, 0.75)) + ',' + fmt(median(auc)) +
           '\n';
  }
  return out;
}

// ---- continual sequences --------------------------------------------------

struct SequenceConfig {
  std::vector<std::string> tasks;
  std::vector<bool> arms;  // accumulate_priors values to run
  ExperimentConfig base;   // priors, agent, seeds shared by all tasks
  double threshold = 0.9;
};

inline SequenceConfig parse_sequence(const json& j, const fs::path& base_dir = {}) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("<root>", "expected a JSON object");
  SequenceConfig sc;
  json inner = json::object();
  bool have_arms = false;
  for (const auto& [k, v] : j.items()) {
    if (k == "tasks") {
      if (!v.is_array()) throw ConfigError(k, "expected an array");
      for (std::size_t i = 0; i < v.size(); ++i) sc.tasks.push_back(as_string(v[i], "tasks[" + std::to_string(i) + "]"));
    } else if (k == "accumulate_priors") {
      have_arms = true;
      if (v.is_string() && v.get<std::string>() == "both") sc.arms = {false, true};
      else sc.arms = {as_bool(v, k)};
    } else if (k == "threshold") {
      sc.threshold = as_number(v, k);
    } else {
      inner[k] = v;
    }
  }
  if (sc.tasks.size() < 2) throw ConfigError("tasks", "a sequence needs at least 2 tasks");
  if (!have_arms) sc.arms = {true};
  inner["env"] = sc.tasks.front();
  sc.base = parse_experiment(inner, base_dir);
  for (std::size_t i = 0; i < sc.tasks.size(); ++i) {
    json pj = inner;
    pj["env"] = sc.tasks[i];
    try {
      sc.tasks[i] = parse_experiment(pj, base_dir).env;
    } catch (const ConfigError& e) {
      throw ConfigError("tasks[" + std::to_string(i) + "]", e.what());
    }
  }
  sc.base.raw = j;
  return sc;
}

struct SequenceTaskResult {
  std::string task;
  bool accumulate = false;
  std::size_t num_priors = 0;
  std::vector<RunSummary> runs;
};

/// Runs the task list per arm. With accumulation, each seed's final greedy
/// task policy joins that seed's prior set for the following tasks.
inline std::vector<SequenceTaskResult> run_sequence(const SequenceConfig& sc, const fs::path& dir,
                                                    std::size_t jobs = 1) {
  std::vector<SequenceTaskResult> out;
  for (bool acc : sc.arms) {
    const fs::path arm_dir = dir / (acc ? "accumulate" : "fixed");
    // learned[seed index] = (policy, cells) pairs gathered so far
    std::vector<std::vector<std::pair<TabularPolicy, CellList>>> learned(sc.base.seeds.size());
    for (std::size_t t = 0; t < sc.tasks.size(); ++t) {
      ExperimentConfig c = sc.base;
      c.env = sc.tasks[t];
      const EnvSpec env = resolve_env(c.env);
      const TabularMdp mdp = compile(env.layout);
      const PriorSet base_priors = resolve_priors(c.priors, env, c.prior_seed);
      const AgentConfig agent = agent_for_env(c, env);
      const auto cells = env.layout.state_cells();
      const fs::path task_dir = arm_dir / ("task-" + std::to_string(t + 1) + "-" + env.name);
      fs::create_directories(task_dir);
      SequenceTaskResult res{env.name, acc, base_priors.size() + (acc ? learned[0].size() : 0), {}};
      res.runs.resize(c.seeds.size());
      std::vector<TabularPolicy> finals(c.seeds.size());
      parallel_for(c.seeds.size(), jobs, [&](std::size_t i) {
        PriorSet priors = base_priors;
        for (const auto& [pol, from] : learned[i]) priors.push_back(remap_policy(pol, from, cells));
        AgentConfig a = agent;
        a.seed = c.seeds[i];
        RunLog log = train(mdp, priors, a);
        write_seed_outputs(task_dir / seed_dir_name(a.seed), log);
        res.runs[i] = summarize(log, a.seed, sc.threshold);
        finals[i] = greedy_from_q(log.final_table.head(0), "learned-" + env.name);
      });
      json man = {{"version", kVersion}, {"config_hash", hex64(fnv1a(sc.base.raw.dump()))}, {"config", sc.base.raw},
                  {"task", env.name}, {"task_index", t}, {"accumulate", acc}, {"num_priors", res.num_priors}};
      write_json(task_dir / "manifest.json", man);
      if (acc)
        for (std::size_t i = 0; i < finals.size(); ++i) learned[i].emplace_back(finals[i], cells);
      out.push_back(std::move(res));
    }
  }
  return out;
}

/// Steps to the threshold are censored at the run length for seeds that never reach it.
inline std::string sequence_csv(const std::vector<SequenceTaskResult>& rs) {
  std::string out = "task_index,task,accumulate,num_priors,median_steps_to_threshold,reached,median_final_success\n";
  std::map<bool, std::size_t> idx;
  for (const auto& r : rs) {
    std::vector<double> steps, fin;
    std::size_t reached = 0;
    for (const auto& s : r.runs) {
      fin.push_back(s.final_success);
      if (s.steps_to_target) ++reached;
      steps.push_back(static_cast<double>(s.steps_to_target ? *s.steps_to_target : s.env_steps));
    }
    out += std::to_string(idx[r.accumulate]++) + ',' + r.task + ',' + (r.accumulate ? "true" : "false") + ',' +
           std::to_string(r.num_priors) + ',' + fmt(median(steps)) + ',' + std::to_string(reached) + '/' +
           std::to_string(r.runs.size()) + ',' + fmt(median(fin)) + '\n';
  }
  return out;
}

}  // namespace smec
