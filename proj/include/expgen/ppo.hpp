#pragma once

// PPO with GAE over a vector of gridworld environments. Rewards can come from
// the environment, from the episodic k-NN entropy estimate, or a mix of both.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "expgen/entropy.hpp"
#include "expgen/env.hpp"
#include "expgen/policy.hpp"

namespace expgen {

struct PpoConfig {
  double gamma = 0.999;
  double lambda = 0.95;
  int rollout_len = 512;
  int epochs = 3;
  int minibatches = 8;
  double clip = 0.2;
  double entropy_bonus = 0.01;
  double lr = kDefaultLearningRate;
  int n_envs = 32;
  bool reward_norm = true;
  std::int64_t total_steps = 1'000'000;
  // Truncated-BPTT window for recurrent policies; must divide rollout_len.
  int segment_len = 32;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;

  void validate(bool recurrent) const;
};

enum class RewardMode { Extrinsic, Intrinsic, Mixed };

const char* to_string(RewardMode mode);
RewardMode parse_reward_mode(std::string_view name);

struct RewardSource {
  RewardMode mode = RewardMode::Extrinsic;
  std::optional<double> beta;  // Mixed only
  KnnConfig knn;

  static RewardSource extrinsic() { return {}; }
  static RewardSource intrinsic(KnnConfig knn = {}) { return {RewardMode::Intrinsic, std::nullopt, knn}; }
  static RewardSource mixed(double beta, KnnConfig knn = {}) { return {RewardMode::Mixed, beta, knn}; }

  bool needs_intrinsic() const { return mode != RewardMode::Extrinsic; }
  double combine(double extrinsic, double intrinsic) const;
  void validate() const;
};

/// Network input for an observation. Radius 0 flattens every plane; r > 0
/// keeps the walls, goal, keys and doors planes inside the (2r+1)^2 window
/// centred on the agent, which makes the input egocentric.
Eigen::VectorXf observation_vector(const Observation& obs, int view_radius = 0);
int observation_size(int width, int height, int view_radius = 0);

struct EpisodeStats {
  std::uint64_t level_seed = 0;
  double extrinsic_return = 0.0;
  double intrinsic_return = 0.0;
  int length = 0;
  bool success = false;
  int distinct_cells = 0;  // distinct non-goal cells occupied, start included
};

/// Per-episode bookkeeping shared by training and evaluation.
class EpisodeTracker {
 public:
  EpisodeTracker() = default;
  EpisodeTracker(const EnvState& start, const Observation& obs, const KnnConfig& knn, bool track_intrinsic);

  /// Records the step that produced `next`; returns the intrinsic reward of
  /// `next` (0 when intrinsic tracking is off).
  double record(const EnvState& next, const StepOutcome& outcome);
  EpisodeStats stats() const { return stats_; }
  std::size_t buffer_length() const { return buffer_.size(); }

 private:
  KnnConfig knn_;
  bool track_intrinsic_ = false;
  EpisodeBuffer buffer_;
  std::vector<std::uint8_t> seen_;
  int width_ = 0;
  EpisodeStats stats_;
};

struct VecEnvOptions {
  ObservationMode mode = ObservationMode::Full;
  int horizon = kDefaultHorizon;
};

/// n_envs environments, each resampling a training level uniformly at random
/// whenever its episode ends.
class VecEnv {
 public:
  VecEnv(std::vector<std::shared_ptr<const LevelSpec>> levels, int n_envs, const Architecture& arch,
         std::uint64_t seed, VecEnvOptions options = {});

  int size() const { return static_cast<int>(workers_.size()); }
  int input_dim() const { return input_dim_; }
  const VecEnvOptions& options() const { return options_; }

  struct Worker {
    EnvState state;
    Observation observation;
    EpisodeTracker tracker;
    Eigen::VectorXf memory;
    bool episode_start = true;
    Rng level_rng;
  };
  std::vector<Worker>& workers() { return workers_; }

  void reset_worker(Worker& w, const KnnConfig& knn, bool track_intrinsic);
  void ensure_started(const KnnConfig& knn, bool track_intrinsic);

 private:
  std::vector<std::shared_ptr<const LevelSpec>> levels_;
  std::vector<Worker> workers_;
  VecEnvOptions options_;
  int input_dim_ = 0;
  int recurrent_width_ = 0;
  int view_radius_ = 0;
  bool started_ = false;
};

/// T steps of B environments; sample (t, b) lives at index t * B + b.
struct RolloutBatch {
  int steps = 0;
  int n_envs = 0;
  Eigen::MatrixXf observations;  // input_dim x N
  Eigen::MatrixXf memories;      // recurrent_width x N, memory before each step
  std::vector<int> actions;
  Eigen::VectorXf log_probs;
  Eigen::VectorXd rewards;  // from the reward source, before normalization
  Eigen::VectorXd extrinsic;
  Eigen::VectorXd intrinsic;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> dones;           // episode ended after this step
  std::vector<std::uint8_t> episode_starts;  // first step of an episode
  std::vector<std::size_t> buffer_lengths;   // EpisodeBuffer size when the reward was computed
  Eigen::VectorXd bootstrap_values;          // value of the state after the last step, per env
  std::vector<EpisodeStats> finished;

  std::size_t samples() const { return static_cast<std::size_t>(steps) * static_cast<std::size_t>(n_envs); }
};

RolloutBatch collect_rollout(const PolicyParams<float>& params, VecEnv& envs, const PpoConfig& cfg,
                             const RewardSource& src, Rng& rng);

struct Advantages {
  Eigen::VectorXd raw;         // before normalization
  Eigen::VectorXd advantages;  // normalized to zero mean, unit variance
  Eigen::VectorXd returns;     // raw + values
};

Advantages compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                       const std::vector<std::uint8_t>& dones, const Eigen::VectorXd& bootstrap_values, int n_envs,
                       double gamma, double lambda);
Advantages compute_gae(const RolloutBatch& batch, double gamma, double lambda);

/// Divides rewards by a running standard deviation of per-env discounted
/// return sums, then clips to +-10.
class RewardNormalizer {
 public:
  RewardNormalizer(int n_envs, double gamma) : returns_(Eigen::VectorXd::Zero(n_envs)), gamma_(gamma) {}
  Eigen::VectorXd apply(const Eigen::VectorXd& rewards, const std::vector<std::uint8_t>& dones);
  double std() const;

 private:
  Eigen::VectorXd returns_;
  double gamma_;
  double mean_ = 0.0;
  double m2_ = 0.0;
  double count_ = 0.0;
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-surrogate PPO loss over a set of rollout columns. Gradients are
/// averaged over the columns.
LossSpec<float> ppo_loss(const std::vector<int>& actions, const Eigen::VectorXf& old_log_probs,
                         const Eigen::VectorXf& advantages, const Eigen::VectorXf& returns, const PpoConfig& cfg,
                         UpdateStats* stats);

UpdateStats ppo_update(PolicyParams<float>& params, AdamState<float>& adam, const RolloutBatch& batch,
                       const Advantages& adv, const PpoConfig& cfg, Rng& rng);

struct CurveRow {
  std::int64_t step = 0;
  double train_return_mean = 0.0;
  std::optional<double> test_return_mean;
  double intrinsic_return_mean = 0.0;
  UpdateStats update;
};

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& rows);

struct EvalOptions {
  ObservationMode mode = ObservationMode::Full;
  int horizon = kDefaultHorizon;
  int episodes_per_level = 1;
  KnnConfig knn;
  bool greedy = false;
};

/// Runs every level `episodes_per_level` times, all episodes stepped as one
/// batch. Results are ordered by level, then episode.
std::vector<EpisodeStats> evaluate_policy(const PolicyParams<float>& params,
                                          const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                          const EvalOptions& options, std::uint64_t seed);

/// Same protocol for a uniformly random policy.
std::vector<EpisodeStats> evaluate_random(const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                          const EvalOptions& options, std::uint64_t seed);

struct TrainOptions {
  ObservationMode mode = ObservationMode::Full;
  int horizon = kDefaultHorizon;
  std::vector<std::shared_ptr<const LevelSpec>> test_levels;
  std::int64_t eval_interval = 0;  // steps between test evaluations, 0 = never
  std::function<void(const CurveRow&)> on_progress;
};

struct TrainResult {
  PolicyParams<float> params;
  AdamState<float> optimizer;
  std::vector<CurveRow> curve;
};

TrainResult train(const std::vector<std::shared_ptr<const LevelSpec>>& level_set, const PpoConfig& cfg,
                  const RewardSource& src, const Architecture& arch, std::uint64_t seed,
                  const TrainOptions& options = {});

}  // namespace expgen
