#pragma once

#include <map>
#include <string>
#include <vector>

#include "smec/maze.hpp"
#include "smec/prior_training.hpp"

namespace smec {

namespace layouts {

// Prior-training maze: open 11x15 room, start in the centre, one goal per corner.
inline constexpr const char* kEmptyCorners = R"(#################
#G.............G#
#...............#
#...............#
#...............#
#...............#
#.......S.......#
#...............#
#...............#
#...............#
#...............#
#G.............G#
#################
)";

// Shortest route: east along the lower room, then north through the gap.
inline constexpr const char* kComposedRoute = R"(#################
#..............G#
#...............#
#...............#
#...............#
#############...#
#S..............#
#...............#
#...............#
#...............#
#...............#
#...............#
#################
)";

// Wall at column 10 open only along the bottom two rows; goal beyond it at the top.
inline constexpr const char* kLedge = R"(#################
#.........#....G#
#.........#.....#
#.........#.....#
#.........#.....#
#.........#.....#
#.........#.....#
#.........#.....#
#.........#.....#
#.........#.....#
#S..............#
#...............#
#################
)";

// Two interior walls with gaps at opposite ends.
inline constexpr const char* kDoubleLedge = R"(#################
#...#...........#
#...#...........#
#...#....#......#
#...#....#......#
#...#....#......#
#...#....#......#
#...#....#......#
#...#....#......#
#...#....#......#
#S.......#.....G#
#........#......#
#################
)";

// Goal in a west-facing pocket; no prior ever heads west off the top or bottom row.
inline constexpr const char* kWestPocket = R"(#################
#...............#
#...............#
#...............#
#####...........#
#G..............#
#...............#
#####...........#
#...............#
#...............#
#...........S...#
#...............#
#################
)";

inline constexpr const char* kCorridor = R"(###############
#S...........G#
###############
)";

}  // namespace layouts

/// Downstream wall mazes used for the ablation comparisons.
inline const std::vector<std::string>& downstream_mazes() {
  static const std::vector<std::string> names{"ledge", "double-ledge", "west-pocket"};
  return names;
}

/// Names of the four corner goals of the prior-training maze, in goal-id order.
inline const std::vector<std::string>& corner_names() {
  static const std::vector<std::string> names{"top-left", "top-right", "bottom-left", "bottom-right"};
  return names;
}

inline EnvSpec make_env(std::string name, const char* text, double slip, std::size_t horizon, std::string description) {
  EnvSpec e;
  e.name = std::move(name);
  e.layout = parse_layout(text);
  e.layout.slip_prob = slip;
  e.episode_length = horizon;
  e.description = std::move(description);
  return e;
}

/// Shipped tasks. The empty-corners maze trains the priors; the others are downstream tasks.
inline std::map<std::string, EnvSpec> builtin_suite() {
  std::map<std::string, EnvSpec> s;
  auto add = [&](EnvSpec e) { s.emplace(e.name, std::move(e)); };
  add(make_env("empty-corners", layouts::kEmptyCorners, 0.0, 100, "prior training: open room, four corner goals"));
  add(make_env("composed-route", layouts::kComposedRoute, 0.1, 100,
               "east along the lower room, then north through the gap: bottom-right then top-right prior"));
  add(make_env("ledge", layouts::kLedge, 0.1, 100, "east under the wall, then north and east to the far corner"));
  add(make_env("double-ledge", layouts::kDoubleLedge, 0.1, 100,
               "east through the low gap, north, then east over the second wall and down"));
  add(make_env("west-pocket", layouts::kWestPocket, 0.1, 100, "goal in a west pocket that no prior route visits"));
  add(make_env("corridor", layouts::kCorridor, 0.1, 100, "single-row chain, goal at the east end"));
  return s;
}

inline PriorTrainingSettings default_prior_settings(const EnvSpec& env, std::string name) {
  PriorTrainingSettings p;
  p.episode_length = env.episode_length;
  p.name = std::move(name);
  return p;
}

/// Trains the four corner priors on the empty-corners maze (state space of that maze).
inline PriorSet train_corner_priors(std::uint64_t seed = 0) {
  const EnvSpec env = builtin_suite().at("empty-corners");
  PriorSet out;
  for (std::size_t g = 0; g < corner_names().size(); ++g) {
    const TabularMdp m = compile(with_single_goal(env.layout, g));
    out.push_back(train_prior(m, default_prior_settings(env, corner_names()[g]), derive_seed(seed, g)));
  }
  return out;
}

/// Corner priors re-indexed onto the states of `target`.
inline PriorSet corner_priors_for(const MazeLayout& target, const PriorSet& corner_priors) {
  const auto from = builtin_suite().at("empty-corners").layout.state_cells();
  const auto to = target.state_cells();
  PriorSet out;
  for (const auto& p : corner_priors) out.push_back(remap_policy(p, from, to));
  return out;
}

}  // namespace smec
