#pragma once

// Brute-force reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "expgen/entropy.hpp"
#include "expgen/env.hpp"
#include "expgen/random.hpp"

namespace testing_oracles {

struct KnnCase {
  std::vector<expgen::StateVector> states;
  expgen::StateVector current;
  expgen::KnnConfig cfg;

  expgen::EpisodeBuffer buffer() const {
    expgen::EpisodeBuffer b;
    for (const auto& s : states) b.push(s);
    return b;
  }
};

inline double naive_distance(const expgen::StateVector& a, const expgen::StateVector& b, expgen::Norm norm) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += norm == expgen::Norm::L0 ? (d != 0.0 ? 1.0 : 0.0) : d * d;
  }
  return norm == expgen::Norm::L0 ? acc : std::sqrt(acc);
}

// Every stored state listed with repetition, no deduplication.
inline double brute_force_reward(const std::vector<expgen::StateVector>& states, const expgen::StateVector& current,
                                 const expgen::KnnConfig& cfg) {
  if (states.empty()) return std::log(cfg.epsilon);
  std::vector<double> d;
  for (const auto& s : states) d.push_back(naive_distance(s, current, cfg.norm));
  std::sort(d.begin(), d.end());
  const std::size_t idx = std::min(d.size(), static_cast<std::size_t>(cfg.k)) - 1;
  return std::log(std::max(d[idx], cfg.epsilon));
}

inline double brute_force_entropy(const std::vector<expgen::StateVector>& states, const expgen::KnnConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < states.size(); ++j) {
      if (j != i) d.push_back(naive_distance(states[i], states[j], cfg.norm));
    }
    std::sort(d.begin(), d.end());
    total += std::log(std::max(d[static_cast<std::size_t>(cfg.k) - 1], cfg.epsilon));
  }
  return total / static_cast<double>(states.size());
}

// Small integer-valued states so duplicates and distance ties are common.
inline KnnCase random_knn_case(expgen::Rng& rng, bool binary = false, int max_states = 64, int max_dim = 32) {
  KnnCase c;
  const int dim = 1 + static_cast<int>(expgen::uniform_index(rng, static_cast<std::uint64_t>(max_dim)));
  const int n = static_cast<int>(expgen::uniform_index(rng, static_cast<std::uint64_t>(max_states) + 1));
  const int levels = binary ? 2 : 1 + static_cast<int>(expgen::uniform_index(rng, 4));
  auto draw = [&] {
    expgen::StateVector s(dim);
    for (int i = 0; i < dim; ++i) s[i] = static_cast<double>(expgen::uniform_index(rng, static_cast<std::uint64_t>(levels)));
    return s;
  };
  for (int i = 0; i < n; ++i) {
    // Reuse an earlier state now and then to create exact duplicates.
    if (i > 0 && expgen::uniform01(rng) < 0.2) {
      c.states.push_back(c.states[expgen::uniform_index(rng, c.states.size())]);
    } else {
      c.states.push_back(draw());
    }
  }
  c.current = (!c.states.empty() && expgen::uniform01(rng) < 0.3) ? c.states[expgen::uniform_index(rng, c.states.size())]
                                                                  : draw();
  c.cfg.k = 1 + static_cast<int>(expgen::uniform_index(rng, 6));
  c.cfg.norm = expgen::uniform01(rng) < 0.5 ? expgen::Norm::L2 : expgen::Norm::L0;
  return c;
}

// Recursive flood fill from start, goal blocked, doors treated as open.
inline void flood_visit(const expgen::LevelSpec& level, int x, int y, std::vector<char>& seen, int& count) {
  if (x < 0 || y < 0 || x >= level.width || y >= level.height) return;
  const std::size_t i = static_cast<std::size_t>(y * level.width + x);
  if (seen[i] || level.walls[i] || (x == level.goal.x && y == level.goal.y)) return;
  seen[i] = 1;
  ++count;
  flood_visit(level, x + 1, y, seen, count);
  flood_visit(level, x - 1, y, seen, count);
  flood_visit(level, x, y + 1, seen, count);
  flood_visit(level, x, y - 1, seen, count);
}

inline int flood_count(const expgen::LevelSpec& level) {
  std::vector<char> seen(level.walls.size(), 0);
  int count = 0;
  flood_visit(level, level.start.x, level.start.y, seen, count);
  return count;
}

}  // namespace testing_oracles
