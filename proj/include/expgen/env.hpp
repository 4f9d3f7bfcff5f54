#pragma once

// Procedurally generated gridworld POMDPs: perfect mazes, nested key/door
// mazes, and a hidden-observation overlay of the maze.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace expgen {

enum class LevelKind { Maze, KeyDoor, HiddenMaze };
enum class ObservationMode { Full, Hidden };
enum class Action : int { Up = 0, Down = 1, Left = 2, Right = 3, NoOp = 4 };
enum class DoneReason { Running, Goal, Timeout };

inline constexpr int kActionCount = 5;
inline constexpr int kDefaultHorizon = 512;
inline constexpr double kGoalReward = 10.0;
inline constexpr int kObservationChannels = 5;

const char* to_string(LevelKind kind);
LevelKind parse_level_kind(std::string_view name);
const char* to_string(DoneReason reason);

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct KeyDoorPair {
  Cell cell;
  int key_id = 0;
  friend bool operator==(const KeyDoorPair&, const KeyDoorPair&) = default;
};

struct LevelSpec {
  std::uint64_t seed = 0;
  LevelKind kind = LevelKind::Maze;
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> walls;  // row-major, 1 = wall
  Cell start;
  Cell goal;
  std::vector<KeyDoorPair> doors;
  std::vector<KeyDoorPair> keys;

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  int index(Cell c) const { return c.y * width + c.x; }
  bool is_wall(Cell c) const { return !in_bounds(c) || walls[static_cast<std::size_t>(index(c))] != 0; }
  std::optional<int> door_at(Cell c) const;
  std::optional<int> key_at(Cell c) const;
  std::vector<Cell> corridor_cells() const;

  /// Builds a level from ASCII art: '#' wall, '.' corridor, 'S' start,
  /// 'G' goal, 'a'..'c' keys and 'A'..'C' the matching doors.
  static LevelSpec from_ascii(std::string_view art, LevelKind kind = LevelKind::Maze);
  std::string to_ascii() const;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Seed-deterministic level generation via randomized depth-first carving.
LevelSpec generate_level(std::uint64_t seed, LevelKind kind, int width, int height);

struct Observation {
  ObservationMode mode = ObservationMode::Full;
  int height = 0;
  int width = 0;
  // Channel-major planes: walls, goal, agent, keys, doors.
  std::vector<float> data;

  enum Channel { Walls = 0, Goal = 1, Agent = 2, Keys = 3, Doors = 4 };

  int channels() const { return kObservationChannels; }
  std::size_t size() const { return data.size(); }
  float at(int channel, int y, int x) const {
    return data[static_cast<std::size_t>((channel * height + y) * width + x)];
  }
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct EnvState {
  std::shared_ptr<const LevelSpec> level;
  Cell position;
  std::set<int> held_keys;
  int steps_elapsed = 0;
  bool terminated = false;
  int horizon = kDefaultHorizon;

  friend bool operator==(const EnvState& a, const EnvState& b) {
    return *a.level == *b.level && a.position == b.position && a.held_keys == b.held_keys &&
           a.steps_elapsed == b.steps_elapsed && a.terminated == b.terminated &&
           a.horizon == b.horizon;
  }
};

struct StepOutcome {
  Observation observation;
  double extrinsic_reward = 0.0;
  bool done = false;
  DoneReason done_reason = DoneReason::Running;
};

Observation observe(const EnvState& state, ObservationMode mode);

struct Reset {
  EnvState state;
  Observation observation;
};

Reset new_episode(std::shared_ptr<const LevelSpec> level, ObservationMode mode,
                  int horizon = kDefaultHorizon);

struct Transition {
  EnvState state;
  StepOutcome outcome;
};

Transition step(const EnvState& state, Action action, ObservationMode mode);

/// Cells the agent can occupy from start when the goal is treated as blocked.
std::vector<Cell> reachable_cell_set(const LevelSpec& level);
int reachable_cells(const LevelSpec& level);

/// Mode the level kind implies (HiddenMaze observes only the agent).
ObservationMode default_mode(LevelKind kind);

}  // namespace expgen
