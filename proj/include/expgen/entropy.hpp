#pragma once

// Particle-based k-NN entropy estimation and the per-step intrinsic reward
// log(max(d_k, epsilon)) computed against the states of the current episode.

#include <Eigen/Core>
#include <span>
#include <string_view>
#include <vector>

#include "expgen/env.hpp"

namespace expgen {

enum class Norm { L2, L0 };

const char* to_string(Norm norm);
Norm parse_norm(std::string_view name);

struct KnnConfig {
  int k = 2;
  Norm norm = Norm::L2;
  double epsilon = 1e-8;
  int pool_kernel = 1;

  void validate() const;
};

using StateVector = Eigen::VectorXd;

/// Non-overlapping average pooling with stride == kernel over each channel of
/// a channel-major grid; remainder rows/columns are dropped.
StateVector downsample(std::span<const float> grid, int channels, int height, int width, int kernel);
StateVector downsample(const Observation& observation, int kernel);

double state_distance(const StateVector& a, const StateVector& b, Norm norm);

/// Per-episode state memory. Identical states are stored once with a
/// multiplicity, which leaves every k-th-neighbour distance unchanged.
class EpisodeBuffer {
 public:
  void push(const StateVector& state);
  void clear();

  std::size_t size() const { return length_; }
  bool empty() const { return length_ == 0; }
  Eigen::Index dimension() const { return unique_.empty() ? -1 : unique_.front().size(); }
  const std::vector<StateVector>& unique_states() const { return unique_; }
  const std::vector<int>& counts() const { return counts_; }

 private:
  std::vector<StateVector> unique_;
  std::vector<int> counts_;
  std::size_t length_ = 0;
};

/// log(max(d_k, epsilon)) of `current` against the buffer. Fewer than k
/// stored states fall back to the farthest one; an empty buffer gives
/// log(epsilon). Does not modify the buffer.
double knn_intrinsic_reward(const EpisodeBuffer& buffer, const StateVector& current, const KnnConfig& cfg);

/// Mean over states of log(max(d_k, epsilon)), neighbours taken among all
/// other states of the trajectory.
double episode_entropy_estimate(std::span<const StateVector> states, const KnnConfig& cfg);

}  // namespace expgen
