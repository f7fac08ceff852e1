#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smec/agent.hpp"
#include "smec/errors.hpp"
#include "smec/maze.hpp"
#include "smec/mdp.hpp"
#include "smec/policy.hpp"

namespace smec {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
}

inline json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string(), std::string("malformed JSON: ") + e.what());
  }
}

inline void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---- MDP ------------------------------------------------------------------

inline json to_json(const TabularMdp& m) {
  json tr = json::array();
  json rw = json::array();
  for (std::size_t s = 0; s < m.num_states; ++s) {
    json row = json::array();
    json rrow = json::array();
    for (std::size_t a = 0; a < m.num_actions; ++a) {
      const auto nr = m.next_row(s, a);
      row.push_back(std::vector<double>(nr.begin(), nr.end()));
      rrow.push_back(m.r(s, a));
    }
    tr.push_back(std::move(row));
    rw.push_back(std::move(rrow));
  }
  return {{"num_states", m.num_states}, {"num_actions", m.num_actions}, {"transitions", tr}, {"rewards", rw},
          {"initial_dist", m.initial_dist}, {"reward_max", m.reward_max}, {"terminals", m.terminals}};
}

inline TabularMdp mdp_from_json(const json& j) {
  try {
    TabularMdp m(j.at("num_states").get<std::size_t>(), j.at("num_actions").get<std::size_t>());
    const auto& tr = j.at("transitions");
    const auto& rw = j.at("rewards");
    if (tr.size() != m.num_states || rw.size() != m.num_states) throw ShapeError("mdp JSON: state count mismatch");
    for (std::size_t s = 0; s < m.num_states; ++s) {
      if (tr[s].size() != m.num_actions || rw[s].size() != m.num_actions)
        throw ShapeError("mdp JSON: action count mismatch at state " + std::to_string(s));
      for (std::size_t a = 0; a < m.num_actions; ++a) {
        if (tr[s][a].size() != m.num_states)
          throw ShapeError("mdp JSON: transition row length mismatch at (" + std::to_string(s) + ", " +
                           std::to_string(a) + ")");
        for (std::size_t s2 = 0; s2 < m.num_states; ++s2) m.p(s, a, s2) = tr[s][a][s2].get<double>();
        m.r(s, a) = rw[s][a].get<double>();
      }
    }
    m.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    m.reward_max = j.at("reward_max").get<double>();
    m.terminals = j.at("terminals").get<std::vector<std::size_t>>();
    return m;
  } catch (const json::exception& e) {
    throw ShapeError(std::string("mdp JSON: ") + e.what());
  }
}

// ---- policies -------------------------------------------------------------

using CellList = std::vector<std::pair<std::size_t, std::size_t>>;

/// Policy document. `cells` optionally records the maze cell of every state
/// so the policy can be re-indexed onto another layout.
inline json to_json(const TabularPolicy& pi, const CellList* cells = nullptr) {
  json probs = json::array();
  for (std::size_t s = 0; s < pi.num_states(); ++s) {
    const auto r = pi.row(s);
    probs.push_back(std::vector<double>(r.begin(), r.end()));
  }
  json j{{"name", pi.name()}, {"num_states", pi.num_states()}, {"num_actions", pi.num_actions()}, {"probs", probs}};
  if (cells) {
    json c = json::array();
    for (const auto& [r, col] : *cells) c.push_back({r, col});
    j["cells"] = c;
  }
  return j;
}

struct LoadedPolicy {
  TabularPolicy policy;
  std::optional<CellList> cells;
};

inline LoadedPolicy policy_from_json(const json& j) {
  try {
    const auto S = j.at("num_states").get<std::size_t>();
    const auto A = j.at("num_actions").get<std::size_t>();
    LoadedPolicy out{TabularPolicy(S, A, j.value("name", std::string("policy"))), std::nullopt};
    const auto& probs = j.at("probs");
    if (probs.size() != S) throw ShapeError("policy JSON: expected " + std::to_string(S) + " rows");
    for (std::size_t s = 0; s < S; ++s) {
      if (probs[s].size() != A) throw ShapeError("policy JSON: row " + std::to_string(s) + " has wrong length");
      for (std::size_t a = 0; a < A; ++a) out.policy(s, a) = probs[s][a].get<double>();
    }
    if (!out.policy.is_stochastic(1e-9)) throw ShapeError("policy JSON: rows are not probability distributions");
    if (j.contains("cells")) {
      CellList c;
      for (const auto& e : j.at("cells")) c.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
      if (c.size() != S) throw ShapeError("policy JSON: cells length does not match num_states");
      out.cells = std::move(c);
    }
    return out;
  } catch (const json::exception& e) {
    throw ShapeError(std::string("policy JSON: ") + e.what());
  }
}

inline void save_policy(const fs::path& p, const TabularPolicy& pi, const CellList* cells = nullptr) {
  write_json(p, to_json(pi, cells));
}

/// Loads a policy; when `mdp` is given the shape must match it.
inline LoadedPolicy load_policy(const fs::path& p, const TabularMdp* mdp = nullptr) {
  LoadedPolicy lp = policy_from_json(read_json(p));
  if (mdp && (lp.policy.num_states() != mdp->num_states || lp.policy.num_actions() != mdp->num_actions))
    throw ShapeError("policy '" + p.string() + "' has shape " + std::to_string(lp.policy.num_states()) + "x" +
                     std::to_string(lp.policy.num_actions()) + ", MDP is " + std::to_string(mdp->num_states) + "x" +
                     std::to_string(mdp->num_actions));
  return lp;
}

// ---- checkpoints ----------------------------------------------------------

/// {"discounts", "values"[head][state][action], "reward_max", "step"}.
inline json checkpoint_json(const HybridQTable& t, std::size_t step) {
  json heads = json::array();
  for (std::size_t h = 0; h < t.num_heads(); ++h) {
    json rows = json::array();
    for (std::size_t s = 0; s < t.num_states(); ++s) {
      std::vector<double> r(t.num_actions());
      for (std::size_t a = 0; a < r.size(); ++a) r[a] = t(s, a, h);
      rows.push_back(r);
    }
    heads.push_back(std::move(rows));
  }
  return {{"discounts", t.discounts()}, {"values", heads}, {"reward_max", t.reward_max()}, {"step", step}};
}

inline HybridQTable checkpoint_table(const json& j) {
  try {
    const auto d = j.at("discounts").get<std::vector<double>>();
    const auto& v = j.at("values");
    if (v.size() != d.size() || v.empty()) throw ShapeError("checkpoint: head count mismatch");
    const std::size_t S = v[0].size();
    const std::size_t A = S ? v[0][0].size() : 0;
    HybridQTable t(S, A, d, j.value("reward_max", 1.0));
    for (std::size_t h = 0; h < d.size(); ++h) {
      if (v[h].size() != S) throw ShapeError("checkpoint: ragged state axis");
      for (std::size_t s = 0; s < S; ++s) {
        if (v[h][s].size() != A) throw ShapeError("checkpoint: ragged action axis");
        for (std::size_t a = 0; a < A; ++a) t(s, a, h) = v[h][s][a].get<double>();
      }
    }
    return t;
  } catch (const json::exception& e) {
    throw ShapeError(std::string("checkpoint: ") + e.what());
  }
}

// ---- layouts --------------------------------------------------------------

/// Layout text plus the optional sidecar `<stem>.json` with slip_prob,
/// goal_reward, step_reward and episode_length.
inline EnvSpec load_env_file(const fs::path& p) {
  EnvSpec e;
  e.name = p.stem().string();
  e.layout = parse_layout(read_text(p));
  e.layout.slip_prob = 0.1;
  fs::path side = p;
  side.replace_extension(".json");
  if (side != p && fs::exists(side)) {
    const json j = read_json(side);
    e.layout.slip_prob = j.value("slip_prob", e.layout.slip_prob);
    e.layout.goal_reward = j.value("goal_reward", e.layout.goal_reward);
    e.layout.step_reward = j.value("step_reward", e.layout.step_reward);
    e.episode_length = j.value("episode_length", e.episode_length);
    e.seed = j.value("seed", e.seed);
  }
  check_layout_metadata(e.layout);
  check_env_spec(e);
  return e;
}

inline json sidecar_json(const EnvSpec& e) {
  return {{"slip_prob", e.layout.slip_prob}, {"goal_reward", e.layout.goal_reward},
          {"step_reward", e.layout.step_reward}, {"episode_length", e.episode_length}, {"seed", e.seed}};
}

// ---- run logs -------------------------------------------------------------

inline json to_json(const Transition& t) {
  return {{"s", t.state}, {"a", t.action}, {"r", t.reward}, {"s2", t.next_state}, {"done", t.done}};
}

inline Transition transition_from_json(const json& j) {
  return {j.at("s").get<std::size_t>(), j.at("a").get<std::size_t>(), j.at("r").get<double>(),
          j.at("s2").get<std::size_t>(), j.at("done").get<bool>()};
}

/// JSON-lines encoding: a "meta" header line with record counts, then one
/// line per transition, switch, eval and snapshot record.
/// JSON has no infinities; a cold-start bonus is written as the string "inf".
inline json encode_reals(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) {
    if (std::isinf(x)) a.push_back(x > 0 ? "inf" : "-inf");
    else a.push_back(x);
  }
  return a;
}

inline std::vector<double> decode_reals(const json& a) {
  std::vector<double> v;
  for (const auto& x : a) {
    if (x.is_string() && x.get<std::string>() == "inf") v.push_back(std::numeric_limits<double>::infinity());
    else if (x.is_string() && x.get<std::string>() == "-inf") v.push_back(-std::numeric_limits<double>::infinity());
    else v.push_back(x.get<double>());
  }
  return v;
}

inline std::string run_log_jsonl(const RunLog& log) {
  std::string out;
  auto line = [&](const json& j) {
    out += j.dump();
    out += '\n';
  };
  line({{"kind", "meta"},
        {"num_states", log.num_states},
        {"num_actions", log.num_actions},
        {"num_policies", log.num_policies},
        {"h", log.h},
        {"episode_length", log.episode_length},
        {"warm_start_steps", log.warm_start_steps},
        {"discounts", log.discounts},
        {"env_steps", log.env_steps},
        {"updates", log.updates},
        {"episodes", log.episodes},
        {"reward_max", log.final_table.reward_max()},
        {"counts",
         {{"transition", log.transitions.size()},
          {"switch", log.switches.size()},
          {"eval", log.evals.size()},
          {"snapshot", log.snapshots.size()}}}});
  for (const auto& r : log.transitions) {
    json j = to_json(r.transition);
    j["kind"] = "transition";
    j["step"] = r.step;
    j["episode"] = r.episode;
    j["t"] = r.t;
    j["controller"] = r.controller;
    line(j);
  }
  for (const auto& r : log.switches)
    line({{"kind", "switch"}, {"step", r.step}, {"state", r.state}, {"action", r.action}, {"values", r.values},
          {"bonuses", encode_reals(r.bonuses)}, {"chosen", r.chosen}});
  for (const auto& r : log.evals)
    line({{"kind", "eval"}, {"step", r.step}, {"success_rate", r.success_rate}, {"mean_return", r.mean_return}});
  for (const auto& r : log.snapshots) line({{"kind", "snapshot"}, {"step", r.step}, {"values", r.values}});
  return out;
}

inline void write_run_log(const fs::path& p, const RunLog& log) { write_text(p, run_log_jsonl(log)); }

/// Parses a JSON-lines run log. Any malformed, unknown or missing record
/// raises CorruptLogError carrying the byte offset of the offending line
/// (or the file size when records are missing at the end).
inline RunLog parse_run_log(const std::string& text) {
  RunLog log;
  std::size_t pos = 0;
  bool have_meta = false;
  json counts;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) throw CorruptLogError(pos, "unterminated final line");
    const std::string_view lv(text.data() + pos, nl - pos);
    try {
      const json j = json::parse(lv);
      const std::string kind = j.at("kind").get<std::string>();
      if (!have_meta) {
        if (kind != "meta") throw CorruptLogError(pos, "first record must be the meta header");
        log.num_states = j.at("num_states").get<std::size_t>();
        log.num_actions = j.at("num_actions").get<std::size_t>();
        log.num_policies = j.at("num_policies").get<std::size_t>();
        log.h = j.at("h").get<std::size_t>();
        log.episode_length = j.at("episode_length").get<std::size_t>();
        log.warm_start_steps = j.at("warm_start_steps").get<std::size_t>();
        log.discounts = j.at("discounts").get<std::vector<double>>();
        log.env_steps = j.at("env_steps").get<std::size_t>();
        log.updates = j.at("updates").get<std::size_t>();
        log.episodes = j.at("episodes").get<std::size_t>();
        log.final_table = HybridQTable(log.num_states, log.num_actions, log.discounts, j.at("reward_max").get<double>());
        counts = j.at("counts");
        have_meta = true;
      } else if (kind == "transition") {
        log.transitions.push_back({j.at("step").get<std::size_t>(), j.at("episode").get<std::size_t>(),
                                   j.at("t").get<std::size_t>(), transition_from_json(j),
                                   j.at("controller").get<int>()});
      } else if (kind == "switch") {
        SelectionRecord r;
        r.step = j.at("step").get<std::size_t>();
        r.state = j.at("state").get<std::size_t>();
        r.action = j.at("action").get<std::size_t>();
        r.values = j.at("values").get<std::vector<double>>();
        r.bonuses = decode_reals(j.at("bonuses"));
        r.chosen = j.at("chosen").get<std::size_t>();
        log.switches.push_back(std::move(r));
      } else if (kind == "eval") {
        log.evals.push_back({j.at("step").get<std::size_t>(), j.at("success_rate").get<double>(),
                             j.at("mean_return").get<double>()});
      } else if (kind == "snapshot") {
        log.snapshots.push_back({j.at("step").get<std::size_t>(), j.at("values").get<std::vector<double>>()});
      } else {
        throw CorruptLogError(pos, "unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw CorruptLogError(pos, e.what());
    }
    pos = nl + 1;
  }
  if (!have_meta) throw CorruptLogError(0, "empty log");
  const auto expect = [&](const char* k, std::size_t got) {
    if (counts.at(k).get<std::size_t>() != got)
      throw CorruptLogError(text.size(), std::string("log ends early: missing ") + k + " records");
  };
  expect("transition", log.transitions.size());
  expect("switch", log.switches.size());
  expect("eval", log.evals.size());
  expect("snapshot", log.snapshots.size());
  if (!log.snapshots.empty()) log.final_table.values() = log.snapshots.back().values;
  return log;
}

inline RunLog read_run_log(const fs::path& p) {
  if (!fs::exists(p)) throw Error("missing run log '" + p.string() + "'");
  return parse_run_log(read_text(p));
}

// ---- CSV ------------------------------------------------------------------

/// Fixed number formatting for CSV output.
inline std::string fmt(double v) {
  if (v != v) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace smec
