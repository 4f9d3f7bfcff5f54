#include "expgen/oracle.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "expgen/error.hpp"

namespace expgen {

namespace {

// Clockwise: up, right, down, left.
constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

}  // namespace

const char* to_string(Hand hand) { return hand == Hand::Left ? "left" : "right"; }

OracleResult wall_follower_rollout(const LevelSpec& level, Hand hand, int max_steps) {
  if (level.kind == LevelKind::KeyDoor) {
    throw Error(ErrorKind::UnsupportedLevel, "wall following needs a simply connected maze without doors");
  }
  const auto reachable = reachable_cell_set(level);
  auto open = [&](Cell c) { return !level.is_wall(c) && c != level.goal; };

  OracleResult out;
  std::vector<std::uint8_t> seen(level.walls.size(), 0);
  std::size_t distinct = 0;
  auto visit = [&](Cell c) {
    out.trajectory.push_back(c);
    auto& flag = seen[static_cast<std::size_t>(level.index(c))];
    if (!flag) {
      flag = 1;
      ++distinct;
    }
  };
  Cell pos = level.start;
  visit(pos);
  const int side = hand == Hand::Right ? 1 : 3;
  int heading = 0;
  while (distinct < reachable.size() && out.steps < max_steps) {
    // Hand side first, then straight, then the other side, then back.
    int moved = -1;
    for (int turn : {side, 0, 4 - side, 2}) {
      const int d = (heading + turn) % 4;
      if (open(Cell{pos.x + kDx[d], pos.y + kDy[d]})) {
        moved = d;
        break;
      }
    }
    if (moved < 0) break;  // enclosed start
    heading = moved;
    pos = Cell{pos.x + kDx[moved], pos.y + kDy[moved]};
    ++out.steps;
    visit(pos);
  }
  std::set<Cell> cells(out.trajectory.begin(), out.trajectory.end());
  out.visited.assign(cells.begin(), cells.end());
  out.score = static_cast<double>(out.visited.size());
  std::vector<Cell> sorted_reachable = reachable;
  std::sort(sorted_reachable.begin(), sorted_reachable.end());
  out.covered_all = out.visited == sorted_reachable;
  return out;
}

double oracle_score(const LevelSpec& level) {
  if (level.kind != LevelKind::KeyDoor) return static_cast<double>(reachable_cells(level));
  // Staged flood fill: expand through doors whose keys were collected, until
  // no new key is found.
  std::set<int> keys;
  std::vector<std::uint8_t> seen;
  while (true) {
    seen.assign(level.walls.size(), 0);
    std::deque<Cell> frontier;
    if (!level.is_wall(level.start)) {
      frontier.push_back(level.start);
      seen[static_cast<std::size_t>(level.index(level.start))] = 1;
    }
    std::set<int> found = keys;
    while (!frontier.empty()) {
      const Cell c = frontier.front();
      frontier.pop_front();
      if (auto k = level.key_at(c)) found.insert(*k);
      for (int d = 0; d < 4; ++d) {
        const Cell n{c.x + kDx[d], c.y + kDy[d]};
        if (level.is_wall(n) || n == level.goal) continue;
        if (auto door = level.door_at(n); door && !keys.contains(*door)) continue;
        auto& flag = seen[static_cast<std::size_t>(level.index(n))];
        if (flag) continue;
        flag = 1;
        frontier.push_back(n);
      }
    }
    if (found == keys) break;
    keys = std::move(found);
  }
  return static_cast<double>(std::count(seen.begin(), seen.end(), std::uint8_t{1}));
}

}  // namespace expgen
