#pragma once

// Hand-designed exploration baselines: a wall-following rollout and the
// maximal coverage count per level.

#include <vector>

#include "expgen/env.hpp"

namespace expgen {

enum class Hand { Left, Right };

const char* to_string(Hand hand);

struct OracleResult {
  std::vector<Cell> trajectory;  // starts with the start cell
  std::vector<Cell> visited;     // distinct cells, sorted
  double score = 0.0;            // distinct-cell count
  bool covered_all = false;      // visited == reachable set
  int steps = 0;
};

inline constexpr int kOracleStepFactor = 4;

/// Follows the wall on `hand`, treating the goal as a wall, until every
/// reachable cell is visited or `max_steps` moves were made. Maze and
/// HiddenMaze levels only.
OracleResult wall_follower_rollout(const LevelSpec& level, Hand hand, int max_steps = kOracleStepFactor * kDefaultHorizon);

/// Maximal number of distinct non-goal cells an episode can visit. KeyDoor
/// regions count once their key can be collected.
double oracle_score(const LevelSpec& level);

}  // namespace expgen
