#include "expgen/env.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <sstream>

#include "expgen/error.hpp"
#include "expgen/random.hpp"

namespace expgen {

const char* to_string(LevelKind kind) {
  switch (kind) {
    case LevelKind::Maze: return "maze";
    case LevelKind::KeyDoor: return "keydoor";
    case LevelKind::HiddenMaze: return "hidden-maze";
  }
  return "unknown";
}

LevelKind parse_level_kind(std::string_view name) {
  if (name == "maze") return LevelKind::Maze;
  if (name == "keydoor") return LevelKind::KeyDoor;
  if (name == "hidden-maze") return LevelKind::HiddenMaze;
  throw Error(ErrorKind::Config, "unknown level kind '" + std::string(name) + "'");
}

const char* to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::Running: return "running";
    case DoneReason::Goal: return "goal";
    case DoneReason::Timeout: return "timeout";
  }
  return "unknown";
}

ObservationMode default_mode(LevelKind kind) {
  return kind == LevelKind::HiddenMaze ? ObservationMode::Hidden : ObservationMode::Full;
}

namespace {

constexpr Cell kDeltas[kActionCount] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}, {0, 0}};

Cell offset(Cell c, Cell d) { return {c.x + d.x, c.y + d.y}; }

template <typename Passable>
std::vector<Cell> flood_fill(const LevelSpec& level, Cell origin, Passable passable) {
  std::vector<std::uint8_t> seen(level.walls.size(), 0);
  std::vector<Cell> order;
  if (level.is_wall(origin)) return order;
  std::deque<Cell> frontier{origin};
  seen[static_cast<std::size_t>(level.index(origin))] = 1;
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    order.push_back(c);
    for (int a = 0; a < 4; ++a) {
      const Cell n = offset(c, kDeltas[a]);
      if (level.is_wall(n) || !passable(n)) continue;
      auto& flag = seen[static_cast<std::size_t>(level.index(n))];
      if (flag) continue;
      flag = 1;
      frontier.push_back(n);
    }
  }
  return order;
}

std::vector<Cell> path_between(const LevelSpec& level, Cell from, Cell to) {
  std::vector<int> parent(level.walls.size(), -1);
  std::deque<Cell> frontier{from};
  parent[static_cast<std::size_t>(level.index(from))] = level.index(from);
  while (!frontier.empty()) {
    const Cell c = frontier.front();
    frontier.pop_front();
    if (c == to) break;
    for (int a = 0; a < 4; ++a) {
      const Cell n = offset(c, kDeltas[a]);
      if (level.is_wall(n)) continue;
      auto& p = parent[static_cast<std::size_t>(level.index(n))];
      if (p >= 0) continue;
      p = level.index(c);
      frontier.push_back(n);
    }
  }
  std::vector<Cell> path;
  if (parent[static_cast<std::size_t>(level.index(to))] < 0) return path;
  for (Cell c = to;;) {
    path.push_back(c);
    if (c == from) break;
    const int p = parent[static_cast<std::size_t>(level.index(c))];
    c = {p % level.width, p / level.width};
  }
  std::reverse(path.begin(), path.end());
  return path;
}

void carve_maze(LevelSpec& level, Rng& rng) {
  const int nx = (level.width - 1) / 2;
  const int ny = (level.height - 1) / 2;
  level.walls.assign(static_cast<std::size_t>(level.width * level.height), 1);
  std::vector<std::uint8_t> visited(static_cast<std::size_t>(nx * ny), 0);
  auto node_cell = [](int i, int j) { return Cell{2 * i + 1, 2 * j + 1}; };
  auto open = [&](Cell c) { level.walls[static_cast<std::size_t>(level.index(c))] = 0; };

  const int first = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(nx * ny)));
  std::vector<std::pair<int, int>> stack{{first % nx, first / nx}};
  visited[static_cast<std::size_t>(first)] = 1;
  open(node_cell(first % nx, first / nx));
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    std::vector<int> dirs;
    for (int a = 0; a < 4; ++a) {
      const int ni = i + kDeltas[a].x;
      const int nj = j + kDeltas[a].y;
      if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
      if (!visited[static_cast<std::size_t>(nj * nx + ni)]) dirs.push_back(a);
    }
    if (dirs.empty()) {
      stack.pop_back();
      continue;
    }
    const int a = dirs[uniform_index(rng, dirs.size())];
    const int ni = i + kDeltas[a].x;
    const int nj = j + kDeltas[a].y;
    const Cell here = node_cell(i, j);
    open(offset(here, kDeltas[a]));
    open(node_cell(ni, nj));
    visited[static_cast<std::size_t>(nj * nx + ni)] = 1;
    stack.emplace_back(ni, nj);
  }

  const auto n_nodes = static_cast<std::uint64_t>(nx * ny);
  const auto s = static_cast<int>(uniform_index(rng, n_nodes));
  auto g = static_cast<int>(uniform_index(rng, n_nodes - 1));
  if (g >= s) ++g;
  level.start = node_cell(s % nx, s / nx);
  level.goal = node_cell(g % nx, g / nx);
}

// Doors sit on the start-goal path, ordered by distance from start; key j lies
// in the region opened by doors 0..j-1 but still sealed by door j.
void place_keys_and_doors(LevelSpec& level, Rng& rng) {
  const auto path = path_between(level, level.start, level.goal);
  std::vector<Cell> interior(path.begin() + 1, path.end() - 1);
  if (interior.empty()) return;
  const int wanted =
      std::min<int>(1 + static_cast<int>(uniform_index(rng, 3)), static_cast<int>(interior.size()));

  std::vector<std::size_t> picks(interior.size());
  std::iota(picks.begin(), picks.end(), 0);
  for (std::size_t i = 0; i < static_cast<std::size_t>(wanted); ++i) {
    std::swap(picks[i], picks[i + uniform_index(rng, picks.size() - i)]);
  }
  picks.resize(static_cast<std::size_t>(wanted));
  std::sort(picks.begin(), picks.end());

  // Fallback candidates: every interior cell in path order.
  for (std::size_t i = 0; i < interior.size(); ++i) picks.push_back(i);

  std::vector<std::uint8_t> previous(level.walls.size(), 0);
  std::size_t last = 0;
  for (std::size_t n = 0; n < picks.size(); ++n) {
    const std::size_t p = picks[n];
    if (n >= static_cast<std::size_t>(wanted) && !level.doors.empty()) break;
    if (!level.doors.empty() && p <= last) continue;
    const Cell door = interior[p];
    const auto region = flood_fill(level, level.start, [&](Cell c) { return c != door; });
    std::vector<Cell> eligible;
    for (Cell c : region) {
      if (previous[static_cast<std::size_t>(level.index(c))]) continue;
      if (c == level.start || c == level.goal) continue;
      if (level.door_at(c) || level.key_at(c)) continue;
      eligible.push_back(c);
    }
    if (eligible.empty()) continue;
    const int id = static_cast<int>(level.doors.size());
    level.keys.push_back({eligible[uniform_index(rng, eligible.size())], id});
    level.doors.push_back({door, id});
    last = p;
    for (Cell c : region) previous[static_cast<std::size_t>(level.index(c))] = 1;
  }
}

}  // namespace

std::optional<int> LevelSpec::door_at(Cell c) const {
  for (const auto& d : doors) {
    if (d.cell == c) return d.key_id;
  }
  return std::nullopt;
}

std::optional<int> LevelSpec::key_at(Cell c) const {
  for (const auto& k : keys) {
    if (k.cell == c) return k.key_id;
  }
  return std::nullopt;
}

std::vector<Cell> LevelSpec::corridor_cells() const {
  std::vector<Cell> cells;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!is_wall({x, y})) cells.push_back({x, y});
    }
  }
  return cells;
}

LevelSpec LevelSpec::from_ascii(std::string_view art, LevelKind kind) {
  std::vector<std::string> rows;
  std::istringstream in{std::string(art)};
  for (std::string line; std::getline(in, line);) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    rows.push_back(line.substr(first, last - first + 1));
  }
  if (rows.empty()) throw Error(ErrorKind::InvalidDimension, "empty level art");
  LevelSpec level;
  level.kind = kind;
  level.height = static_cast<int>(rows.size());
  level.width = static_cast<int>(rows.front().size());
  level.walls.assign(static_cast<std::size_t>(level.width * level.height), 1);
  bool has_start = false;
  bool has_goal = false;
  for (int y = 0; y < level.height; ++y) {
    if (static_cast<int>(rows[static_cast<std::size_t>(y)].size()) != level.width) {
      throw Error(ErrorKind::InvalidDimension, "ragged level art");
    }
    for (int x = 0; x < level.width; ++x) {
      const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
      const Cell c{x, y};
      if (ch != '#') level.walls[static_cast<std::size_t>(level.index(c))] = 0;
      if (ch == 'S') {
        level.start = c;
        has_start = true;
      } else if (ch == 'G') {
        level.goal = c;
        has_goal = true;
      } else if (ch >= 'a' && ch <= 'z') {
        level.keys.push_back({c, ch - 'a'});
      } else if (ch >= 'A' && ch <= 'Z' && ch != 'S' && ch != 'G') {
        level.doors.push_back({c, ch - 'A'});
      } else if (ch != '#' && ch != '.') {
        throw Error(ErrorKind::InvalidDimension, std::string("unknown level glyph '") + ch + "'");
      }
    }
  }
  if (!has_start || !has_goal) {
    throw Error(ErrorKind::InvalidDimension, "level art needs exactly one S and one G");
  }
  auto by_id = [](const KeyDoorPair& a, const KeyDoorPair& b) { return a.key_id < b.key_id; };
  std::sort(level.keys.begin(), level.keys.end(), by_id);
  std::sort(level.doors.begin(), level.doors.end(), by_id);
  return level;
}

std::string LevelSpec::to_ascii() const {
  std::string out;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Cell c{x, y};
      char ch = is_wall(c) ? '#' : '.';
      if (auto k = key_at(c)) ch = static_cast<char>('a' + *k);
      if (auto d = door_at(c)) ch = static_cast<char>('A' + *d);
      if (c == goal) ch = 'G';
      if (c == start) ch = 'S';
      out += ch;
    }
    out += '\n';
  }
  return out;
}

LevelSpec generate_level(std::uint64_t seed, LevelKind kind, int width, int height) {
  if (width < 5 || height < 5 || width % 2 == 0 || height % 2 == 0) {
    throw Error(ErrorKind::InvalidDimension, "level dimensions must be odd and >= 5, got " +
                                                 std::to_string(width) + "x" + std::to_string(height));
  }
  LevelSpec level;
  level.seed = seed;
  level.kind = kind;
  level.width = width;
  level.height = height;
  // Carving ignores the kind so Maze, HiddenMaze and KeyDoor share layouts.
  Rng layout_rng(derive_seed(seed, static_cast<std::uint64_t>(width) << 32 | static_cast<std::uint32_t>(height)));
  carve_maze(level, layout_rng);
  if (kind == LevelKind::KeyDoor) {
    Rng key_rng(derive_seed(seed, 0x6b6579646f6f72ULL));
    place_keys_and_doors(level, key_rng);
  }
  return level;
}

Observation observe(const EnvState& state, ObservationMode mode) {
  const LevelSpec& level = *state.level;
  Observation obs;
  obs.mode = mode;
  obs.height = level.height;
  obs.width = level.width;
  const std::size_t plane = static_cast<std::size_t>(level.width * level.height);
  obs.data.assign(plane * kObservationChannels, 0.0f);
  auto set = [&](int channel, Cell c) {
    obs.data[static_cast<std::size_t>(channel) * plane + static_cast<std::size_t>(level.index(c))] = 1.0f;
  };
  set(Observation::Agent, state.position);
  if (mode == ObservationMode::Hidden) return obs;
  for (std::size_t i = 0; i < plane; ++i) obs.data[i] = level.walls[i] ? 1.0f : 0.0f;
  set(Observation::Goal, level.goal);
  for (const auto& k : level.keys) {
    if (!state.held_keys.contains(k.key_id)) set(Observation::Keys, k.cell);
  }
  for (const auto& d : level.doors) {
    if (!state.held_keys.contains(d.key_id)) set(Observation::Doors, d.cell);
  }
  return obs;
}

Reset new_episode(std::shared_ptr<const LevelSpec> level, ObservationMode mode, int horizon) {
  EnvState state;
  state.position = level->start;
  state.level = std::move(level);
  state.horizon = horizon;
  Observation obs = observe(state, mode);
  return {std::move(state), std::move(obs)};
}

Transition step(const EnvState& state, Action action, ObservationMode mode) {
  if (state.terminated) throw Error(ErrorKind::EpisodeFinished, "step called on a finished episode");
  const int a = static_cast<int>(action);
  if (a < 0 || a >= kActionCount) throw Error(ErrorKind::Shape, "action id out of range");
  const LevelSpec& level = *state.level;
  EnvState next = state;
  const Cell target = offset(state.position, kDeltas[a]);
  bool blocked = level.is_wall(target);
  if (!blocked) {
    if (auto door = level.door_at(target); door && !state.held_keys.contains(*door)) blocked = true;
  }
  if (!blocked) next.position = target;
  if (auto key = level.key_at(next.position)) next.held_keys.insert(*key);
  ++next.steps_elapsed;

  StepOutcome outcome;
  if (next.position == level.goal) {
    outcome.extrinsic_reward = kGoalReward;
    outcome.done = true;
    outcome.done_reason = DoneReason::Goal;
  } else if (next.steps_elapsed >= next.horizon) {
    outcome.done = true;
    outcome.done_reason = DoneReason::Timeout;
  }
  next.terminated = outcome.done;
  outcome.observation = observe(next, mode);
  return {std::move(next), std::move(outcome)};
}

std::vector<Cell> reachable_cell_set(const LevelSpec& level) {
  return flood_fill(level, level.start, [&](Cell c) { return c != level.goal; });
}

int reachable_cells(const LevelSpec& level) {
  return static_cast<int>(reachable_cell_set(level).size());
}

}  // namespace expgen
