#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "smec/errors.hpp"
#include "smec/mdp.hpp"
#include "smec/policy.hpp"

namespace smec {

enum class Cell : char { wall = '#', free = '.', start = 'S', goal = 'G' };

/// Action order is fixed: north, east, south, west.
inline constexpr std::size_t kMazeActions = 4;
inline constexpr std::array<int, 4> kRowStep{-1, 0, 1, 0};
inline constexpr std::array<int, 4> kColStep{0, 1, 0, -1};
inline constexpr std::array<const char*, 4> kActionNames{"N", "E", "S", "W"};

struct MazeLayout {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Cell> cells;  // row-major
  double slip_prob = 0.0;
  double goal_reward = 1.0;
  double step_reward = 0.0;

  Cell at(std::size_t row, std::size_t col) const { return cells[row * width + col]; }
  Cell& at(std::size_t row, std::size_t col) { return cells[row * width + col]; }

  std::vector<std::pair<std::size_t, std::size_t>> goals() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        if (at(r, c) == Cell::goal) out.emplace_back(r, c);
    return out;
  }

  std::pair<std::size_t, std::size_t> start() const {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        if (at(r, c) == Cell::start) return {r, c};
    throw LayoutError("layout has no start cell");
  }

  /// (row, col) of every non-wall cell, in state-index order.
  std::vector<std::pair<std::size_t, std::size_t>> state_cells() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        if (at(r, c) != Cell::wall) out.emplace_back(r, c);
    return out;
  }

  std::string to_text() const {
    std::string s;
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) s.push_back(static_cast<char>(at(r, c)));
      s.push_back('\n');
    }
    return s;
  }
};

/// Parses an ASCII grid over {#, ., S, G}. Metadata keeps its defaults.
inline MazeLayout parse_layout(std::string_view text) {
  std::vector<std::string> rows;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line(text.substr(pos, nl - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    rows.push_back(std::move(line));
    pos = nl + 1;
  }
  while (!rows.empty() && rows.back().empty()) rows.pop_back();
  if (rows.empty()) throw LayoutError("empty layout");

  MazeLayout m;
  m.height = rows.size();
  m.width = rows[0].size();
  if (m.width < 3 || m.height < 3) throw LayoutError("layout must be at least 3x3");
  for (std::size_t r = 0; r < rows.size(); ++r)
    if (rows[r].size() != m.width)
      throw LayoutError("ragged rows: expected width " + std::to_string(m.width) + ", got " +
                            std::to_string(rows[r].size()),
                        static_cast<int>(r));

  m.cells.reserve(m.width * m.height);
  std::size_t starts = 0, goals = 0;
  for (std::size_t r = 0; r < m.height; ++r) {
    for (std::size_t c = 0; c < m.width; ++c) {
      const char ch = rows[r][c];
      if (ch != '#' && ch != '.' && ch != 'S' && ch != 'G')
        throw LayoutError(std::string("invalid character '") + ch + "'", static_cast<int>(r), static_cast<int>(c));
      const bool border = r == 0 || c == 0 || r + 1 == m.height || c + 1 == m.width;
      if (border && ch != '#') throw LayoutError("unwalled border", static_cast<int>(r), static_cast<int>(c));
      if (ch == 'S') ++starts;
      if (ch == 'G') ++goals;
      m.cells.push_back(static_cast<Cell>(ch));
    }
  }
  if (starts == 0) throw LayoutError("missing start cell 'S'");
  if (starts > 1) throw LayoutError("more than one start cell 'S'");
  if (goals == 0) throw LayoutError("missing goal cell 'G'");
  return m;
}

/// Keeps only goal `goal_id` (row-major order among goals); the others become free cells.
inline MazeLayout with_single_goal(MazeLayout layout, std::size_t goal_id) {
  const auto gs = layout.goals();
  if (goal_id >= gs.size())
    throw LayoutError("goal id " + std::to_string(goal_id) + " out of range (" + std::to_string(gs.size()) +
                      " goals)");
  for (std::size_t i = 0; i < gs.size(); ++i)
    if (i != goal_id) layout.at(gs[i].first, gs[i].second) = Cell::free;
  return layout;
}

inline void check_layout_metadata(const MazeLayout& m) {
  if (!(m.slip_prob >= 0.0 && m.slip_prob < 1.0)) throw LayoutError("slip_prob must lie in [0, 1)");
  if (!(m.step_reward >= 0.0)) throw LayoutError("step_reward must be >= 0");
  if (!(m.goal_reward >= 0.0)) throw LayoutError("goal_reward must be >= 0");
}

/// Compiles a layout to a TabularMdp: one state per non-wall cell, four moves,
/// wall bumps keep the position, goal cells are absorbing terminals, and with
/// probability slip_prob the executed move is drawn uniformly from all four.
inline TabularMdp compile(const MazeLayout& layout) {
  check_layout_metadata(layout);
  const auto cells = layout.state_cells();
  std::vector<std::int64_t> index(layout.width * layout.height, -1);
  for (std::size_t i = 0; i < cells.size(); ++i) index[cells[i].first * layout.width + cells[i].second] = static_cast<std::int64_t>(i);

  TabularMdp m(cells.size(), kMazeActions);
  m.reward_max = std::max(layout.goal_reward, layout.step_reward);
  if (m.reward_max <= 0.0) m.reward_max = 1.0;

  std::vector<bool> is_goal(cells.size(), false);
  for (std::size_t i = 0; i < cells.size(); ++i) is_goal[i] = layout.at(cells[i].first, cells[i].second) == Cell::goal;

  auto move = [&](std::size_t s, std::size_t dir) {
    const auto [r, c] = cells[s];
    const auto nr = static_cast<std::size_t>(static_cast<int>(r) + kRowStep[dir]);
    const auto nc = static_cast<std::size_t>(static_cast<int>(c) + kColStep[dir]);
    const auto j = index[nr * layout.width + nc];
    return j < 0 ? s : static_cast<std::size_t>(j);
  };

  const double slip_each = layout.slip_prob / static_cast<double>(kMazeActions);
  for (std::size_t s = 0; s < cells.size(); ++s) {
    if (is_goal[s]) continue;
    for (std::size_t a = 0; a < kMazeActions; ++a) {
      for (std::size_t d = 0; d < kMazeActions; ++d) {
        const double w = (d == a ? 1.0 - layout.slip_prob : 0.0) + slip_each;
        if (w > 0.0) m.p(s, a, move(s, d)) += w;
      }
      double r = 0.0;
      for (std::size_t s2 = 0; s2 < cells.size(); ++s2) {
        const double p = m.p(s, a, s2);
        if (p > 0.0) r += p * (is_goal[s2] ? layout.goal_reward : layout.step_reward);
      }
      m.r(s, a) = std::min(r, m.reward_max);
    }
  }
  for (std::size_t s = 0; s < cells.size(); ++s)
    if (is_goal[s]) m.make_terminal(s);

  const auto [sr, sc] = layout.start();
  m.initial_dist[static_cast<std::size_t>(index[sr * layout.width + sc])] = 1.0;
  return m;
}

/// A named task: layout plus the episode length H used for truncation and for h = H/10.
struct EnvSpec {
  std::string name;
  MazeLayout layout;
  std::size_t episode_length = 100;
  std::uint64_t seed = 0;
  std::string description;
};

inline void check_env_spec(const EnvSpec& e) {
  if (e.episode_length < 10) throw LayoutError("episode_length must be >= 10 for '" + e.name + "'");
}

/// Re-indexes a policy defined on `from` cells onto the states of `to` by
/// (row, col); cells absent from `from` get uniform rows.
inline TabularPolicy remap_policy(const TabularPolicy& pi, const std::vector<std::pair<std::size_t, std::size_t>>& from,
                                  const std::vector<std::pair<std::size_t, std::size_t>>& to) {
  if (pi.num_states() != from.size()) throw ShapeError("remap_policy: policy does not match source cells");
  TabularPolicy out(to.size(), pi.num_actions(), pi.name());
  for (std::size_t j = 0; j < to.size(); ++j) {
    const auto it = std::find(from.begin(), from.end(), to[j]);
    if (it == from.end()) continue;
    const auto src = pi.row(static_cast<std::size_t>(it - from.begin()));
    std::copy(src.begin(), src.end(), out.row(j).begin());
  }
  return out;
}

}  // namespace smec
