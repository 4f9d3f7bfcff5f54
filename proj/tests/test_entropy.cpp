#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "expgen/entropy.hpp"
#include "expgen/error.hpp"
#include "expgen/random.hpp"
#include "oracles.hpp"

using namespace expgen;

namespace {

StateVector scalar(double v) { return StateVector::Constant(1, v); }

EpisodeBuffer buffer_of(std::initializer_list<double> values) {
  EpisodeBuffer b;
  for (double v : values) b.push(scalar(v));
  return b;
}

KnnConfig l2(int k) {
  KnnConfig cfg;
  cfg.k = k;
  return cfg;
}

}  // namespace

TEST(KnnIntrinsicReward, UnitDistance) {
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buffer_of({0.0}), scalar(1.0), l2(1)), 0.0);
}

TEST(KnnIntrinsicReward, SecondNeighbour) {
  // Distances from 4 are {4, 1}; sorted, the second is 4.
  const double r = knn_intrinsic_reward(buffer_of({0.0, 3.0}), scalar(4.0), l2(2));
  EXPECT_DOUBLE_EQ(r, std::log(4.0));
  EXPECT_NEAR(r, 1.3863, 1e-4);
}

TEST(KnnIntrinsicReward, DuplicateHitsEpsilonFloor) {
  KnnConfig cfg = l2(1);
  cfg.epsilon = 1e-8;
  const double r = knn_intrinsic_reward(buffer_of({2.0, 5.0}), scalar(2.0), cfg);
  EXPECT_DOUBLE_EQ(r, std::log(1e-8));
  EXPECT_NEAR(r, -18.42, 0.01);
}

TEST(KnnIntrinsicReward, ColdStartRules) {
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(EpisodeBuffer{}, scalar(3.0), l2(2)), std::log(1e-8));
  // One stored state, k = 2: farthest available neighbour.
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buffer_of({1.0}), scalar(3.0), l2(2)), std::log(2.0));
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buffer_of({1.0, 2.0}), scalar(3.0), l2(5)), std::log(2.0));
}

TEST(KnnIntrinsicReward, MultiplicityCountsTowardsK) {
  // Two copies of 1.0 stored: the 2nd neighbour of 1.0 is itself.
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buffer_of({1.0, 1.0, 5.0}), scalar(1.0), l2(2)), std::log(1e-8));
  EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buffer_of({1.0, 5.0}), scalar(1.0), l2(2)), std::log(4.0));
}

TEST(KnnIntrinsicReward, ShapeMismatch) {
  EpisodeBuffer b;
  b.push(StateVector::Zero(3));
  try {
    knn_intrinsic_reward(b, StateVector::Zero(4), l2(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Shape);
  }
  EXPECT_THROW(b.push(StateVector::Zero(2)), Error);
}

TEST(EpisodeBuffer, ClearResetsLength) {
  auto b = buffer_of({1.0, 1.0, 2.0});
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.unique_states().size(), 2u);
  b.clear();
  EXPECT_TRUE(b.empty());
  EXPECT_EQ(b.dimension(), -1);
}

TEST(Downsample, PaperResolution) {
  std::vector<float> grid(64 * 64, 0.5f);
  const auto out = downsample(grid, 1, 64, 64, 3);
  EXPECT_EQ(out.size(), 21 * 21);
  EXPECT_TRUE((out.array() == 0.5).all());
}

TEST(Downsample, ConstantGrid) {
  std::vector<float> grid(2 * 7 * 5, 3.25f);
  const auto out = downsample(grid, 2, 7, 5, 2);
  EXPECT_EQ(out.size(), 2 * 3 * 2);
  for (double v : out) EXPECT_DOUBLE_EQ(v, 3.25);
}

TEST(Downsample, BlockMeans) {
  std::vector<float> grid(36);
  for (int i = 0; i < 36; ++i) grid[static_cast<std::size_t>(i)] = static_cast<float>(i * i % 17);
  const auto out = downsample(grid, 1, 6, 6, 3);
  ASSERT_EQ(out.size(), 4);
  // Independent per-block mean.
  for (int by = 0; by < 2; ++by) {
    for (int bx = 0; bx < 2; ++bx) {
      double sum = 0;
      for (int y = 3 * by; y < 3 * by + 3; ++y) {
        for (int x = 3 * bx; x < 3 * bx + 3; ++x) sum += grid[static_cast<std::size_t>(6 * y + x)];
      }
      EXPECT_NEAR(out[2 * by + bx], sum / 9.0, 1e-12);
    }
  }
}

TEST(Downsample, KernelLargerThanGrid) {
  std::vector<float> grid(16, 1.0f);
  try {
    downsample(grid, 1, 4, 4, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidKernel);
  }
  EXPECT_THROW(downsample(grid, 1, 4, 4, 0), Error);
}

TEST(Downsample, ObservationKernelOneIsIdentity) {
  auto level = std::make_shared<const LevelSpec>(generate_level(4, LevelKind::KeyDoor, 9, 9));
  const auto obs = new_episode(level, ObservationMode::Full).observation;
  const auto s = downsample(obs, 1);
  ASSERT_EQ(static_cast<std::size_t>(s.size()), obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) EXPECT_EQ(s[static_cast<Eigen::Index>(i)], obs.data[i]);
}

TEST(EpisodeEntropyEstimate, EvenlySpacedUnit) {
  std::vector<StateVector> s{scalar(0), scalar(1), scalar(2)};
  EXPECT_NEAR(episode_entropy_estimate(s, l2(1)), 0.0, 1e-15);
}

TEST(EpisodeEntropyEstimate, EvenlySpacedTwo) {
  std::vector<StateVector> s{scalar(0), scalar(2), scalar(4)};
  EXPECT_NEAR(episode_entropy_estimate(s, l2(1)), std::log(2.0), 1e-15);
  EXPECT_NEAR(episode_entropy_estimate(s, l2(1)), 0.6931, 1e-4);
}

TEST(EpisodeEntropyEstimate, InsufficientSamples) {
  std::vector<StateVector> one{scalar(0)};
  try {
    episode_entropy_estimate(one, l2(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientSamples);
  }
  std::vector<StateVector> two{scalar(0), scalar(1)};
  EXPECT_THROW(episode_entropy_estimate(two, l2(2)), Error);
}

TEST(EntropyProperties, MatchesBruteForceOracle) {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = testing_oracles::random_knn_case(rng);
    const double got = knn_intrinsic_reward(c.buffer(), c.current, c.cfg);
    EXPECT_NEAR(got, testing_oracles::brute_force_reward(c.states, c.current, c.cfg), 1e-12);
    if (c.states.size() >= static_cast<std::size_t>(c.cfg.k) + 1) {
      EXPECT_NEAR(episode_entropy_estimate(c.states, c.cfg), testing_oracles::brute_force_entropy(c.states, c.cfg),
                  1e-12);
    }
  }
}

TEST(EntropyProperties, PermutationInvariance) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testing_oracles::random_knn_case(rng);
    if (c.states.size() < static_cast<std::size_t>(c.cfg.k) + 1) continue;
    const double before = episode_entropy_estimate(c.states, c.cfg);
    for (std::size_t i = c.states.size() - 1; i > 0; --i) std::swap(c.states[i], c.states[uniform_index(rng, i + 1)]);
    EXPECT_NEAR(episode_entropy_estimate(c.states, c.cfg), before, 1e-12);
  }
}

TEST(EntropyProperties, SpacingMonotonicity) {
  for (double spacing : {1.0, 1.5, 3.0}) {
    std::vector<StateVector> wide, narrow;
    for (int i = 0; i < 12; ++i) {
      narrow.push_back(scalar(spacing * i));
      wide.push_back(scalar(spacing * 1.7 * i));
    }
    for (int k : {1, 2, 3}) EXPECT_GT(episode_entropy_estimate(wide, l2(k)), episode_entropy_estimate(narrow, l2(k)));
  }
}

TEST(EntropyProperties, L0CountsDifferingCells) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    StateVector a(40), b(40);
    int differing = 0;
    for (int i = 0; i < 40; ++i) {
      a[i] = static_cast<double>(uniform_index(rng, 2));
      b[i] = static_cast<double>(uniform_index(rng, 2));
      differing += a[i] != b[i];
    }
    EXPECT_EQ(state_distance(a, b, Norm::L0), differing);
  }
}

TEST(EntropyProperties, L0RewardInvariantToEqualityPreservingRescale) {
  Rng rng(12);
  KnnConfig cfg;
  cfg.norm = Norm::L0;
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testing_oracles::random_knn_case(rng, /*binary=*/true);
    c.cfg.norm = Norm::L0;
    Eigen::VectorXd scale(c.current.size());
    for (Eigen::Index i = 0; i < scale.size(); ++i) scale[i] = 0.5 + 3.0 * uniform01(rng);
    std::vector<StateVector> scaled;
    for (const auto& s : c.states) scaled.push_back(s.cwiseProduct(scale));
    EpisodeBuffer buf;
    for (const auto& s : scaled) buf.push(s);
    EXPECT_EQ(knn_intrinsic_reward(buf, c.current.cwiseProduct(scale), c.cfg),
              knn_intrinsic_reward(c.buffer(), c.current, c.cfg));
  }
}

TEST(EntropyProperties, L2TranslationInvariance) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    auto c = testing_oracles::random_knn_case(rng);
    c.cfg.norm = Norm::L2;
    StateVector shift(c.current.size());
    for (Eigen::Index i = 0; i < shift.size(); ++i) shift[i] = static_cast<double>(uniform_index(rng, 9)) - 4.0;
    EpisodeBuffer buf;
    for (const auto& s : c.states) buf.push(s + shift);
    // Integer-valued states and shifts keep the arithmetic exact.
    EXPECT_DOUBLE_EQ(knn_intrinsic_reward(buf, c.current + shift, c.cfg),
                     knn_intrinsic_reward(c.buffer(), c.current, c.cfg));
  }
}
