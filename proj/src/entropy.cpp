#include "expgen/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "expgen/error.hpp"

namespace expgen {

const char* to_string(Norm norm) { return norm == Norm::L2 ? "l2" : "l0"; }

Norm parse_norm(std::string_view name) {
  if (name == "l2" || name == "L2") return Norm::L2;
  if (name == "l0" || name == "L0") return Norm::L0;
  throw Error(ErrorKind::Config, "unknown norm '" + std::string(name) + "'");
}

void KnnConfig::validate() const {
  if (k < 1) throw Error(ErrorKind::Config, "knn k must be >= 1");
  if (!(epsilon > 0.0)) throw Error(ErrorKind::Config, "knn epsilon must be > 0");
  if (pool_kernel < 1) throw Error(ErrorKind::InvalidKernel, "pool kernel must be >= 1");
}

StateVector downsample(std::span<const float> grid, int channels, int height, int width, int kernel) {
  if (kernel < 1 || kernel > height || kernel > width) {
    throw Error(ErrorKind::InvalidKernel, "pool kernel " + std::to_string(kernel) + " does not fit a " +
                                              std::to_string(height) + "x" + std::to_string(width) + " grid");
  }
  if (grid.size() != static_cast<std::size_t>(channels * height * width)) {
    throw Error(ErrorKind::Shape, "grid size does not match channels x height x width");
  }
  const int out_h = height / kernel;
  const int out_w = width / kernel;
  StateVector out(static_cast<Eigen::Index>(channels) * out_h * out_w);
  const double area = static_cast<double>(kernel * kernel);
  Eigen::Index o = 0;
  for (int c = 0; c < channels; ++c) {
    const float* plane = grid.data() + static_cast<std::size_t>(c) * height * width;
    for (int by = 0; by < out_h; ++by) {
      for (int bx = 0; bx < out_w; ++bx) {
        double sum = 0.0;
        for (int dy = 0; dy < kernel; ++dy) {
          const float* row = plane + static_cast<std::size_t>(by * kernel + dy) * width + bx * kernel;
          for (int dx = 0; dx < kernel; ++dx) sum += row[dx];
        }
        out[o++] = sum / area;
      }
    }
  }
  return out;
}

StateVector downsample(const Observation& observation, int kernel) {
  return downsample(observation.data, observation.channels(), observation.height, observation.width, kernel);
}

double state_distance(const StateVector& a, const StateVector& b, Norm norm) {
  if (a.size() != b.size()) throw Error(ErrorKind::Shape, "state dimension mismatch");
  if (norm == Norm::L0) return static_cast<double>((a.array() != b.array()).count());
  return (a - b).norm();
}

void EpisodeBuffer::push(const StateVector& state) {
  if (!unique_.empty() && state.size() != unique_.front().size()) {
    throw Error(ErrorKind::Shape, "state dimension mismatch with episode buffer");
  }
  ++length_;
  for (std::size_t i = 0; i < unique_.size(); ++i) {
    if (unique_[i] == state) {
      ++counts_[i];
      return;
    }
  }
  unique_.push_back(state);
  counts_.push_back(1);
}

void EpisodeBuffer::clear() {
  unique_.clear();
  counts_.clear();
  length_ = 0;
}

double knn_intrinsic_reward(const EpisodeBuffer& buffer, const StateVector& current, const KnnConfig& cfg) {
  if (buffer.empty()) return std::log(cfg.epsilon);
  if (buffer.dimension() != current.size()) {
    throw Error(ErrorKind::Shape, "current state has dimension " + std::to_string(current.size()) +
                                      ", buffer holds " + std::to_string(buffer.dimension()));
  }
  const auto& states = buffer.unique_states();
  const auto& counts = buffer.counts();
  std::vector<std::pair<double, int>> dist(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    dist[i] = {state_distance(states[i], current, cfg.norm), counts[i]};
  }
  std::sort(dist.begin(), dist.end());
  double dk = dist.back().first;
  int seen = 0;
  for (const auto& [d, n] : dist) {
    seen += n;
    if (seen >= cfg.k) {
      dk = d;
      break;
    }
  }
  return std::log(std::max(dk, cfg.epsilon));
}

double episode_entropy_estimate(std::span<const StateVector> states, const KnnConfig& cfg) {
  if (states.size() < static_cast<std::size_t>(cfg.k) + 1) {
    throw Error(ErrorKind::InsufficientSamples, "need at least k + 1 = " + std::to_string(cfg.k + 1) +
                                                    " states, got " + std::to_string(states.size()));
  }
  const auto n = states.size();
  std::vector<double> row(n - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row[r++] = state_distance(states[i], states[j], cfg.norm);
    }
    std::nth_element(row.begin(), row.begin() + (cfg.k - 1), row.end());
    total += std::log(std::max(row[static_cast<std::size_t>(cfg.k - 1)], cfg.epsilon));
  }
  return total / static_cast<double>(n);
}

}  // namespace expgen
