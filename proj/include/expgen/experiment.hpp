#pragma once

// Config-driven experiment runner: trains exploration policies and reward
// ensembles, evaluates ExpGen and its ablations, and writes every result to
// one artifact directory (config snapshot, manifest, checkpoints, curves,
// score table and JSON summary).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "expgen/agent.hpp"
#include "expgen/metrics.hpp"
#include "expgen/ppo.hpp"

namespace expgen {

enum class ExperimentKind {
  TrainMaxEnt,
  TrainEnsemble,
  EvalExpGen,
  AblationMixedReward,
  AblationRandomFallback,
  HiddenMaze,
  KnnSweep,
  MemoryAblation,
};

const char* to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr std::uint64_t kTestSeedOffset = 1'000'000;

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  ExperimentKind kind = ExperimentKind::TrainMaxEnt;

  LevelKind env_kind = LevelKind::Maze;
  int size = 9;
  int n_train_levels = 8;
  std::uint64_t level_seed_base = 0;
  int n_test_levels = 32;
  int episodes_per_level = 1;
  int horizon = kDefaultHorizon;

  PpoConfig ppo;
  // Overrides applied when training exploration (maxEnt) policies.
  std::optional<std::int64_t> maxent_total_steps;
  std::optional<double> maxent_entropy_bonus = 0.1;
  // A floor of 1 keeps revisit rewards at 0 instead of log(1e-8).
  KnnConfig knn{2, Norm::L2, 1.0, 1};

  std::vector<int> hidden{64, 64};
  int recurrent_width = 64;  // memory of maxEnt and hidden-maze policies
  // Policy input windows (0 = whole grid). view_radius covers the extrinsic
  // ensemble and hidden-maze policies; explore_view_radius covers maxEnt,
  // mixed-reward policies and the extrinsic policy compared against maxEnt.
  int view_radius = 0;
  int explore_view_radius = 2;

  int ensemble_size = kDefaultEnsembleSize;
  int consensus_k = kDefaultConsensus;
  double alpha = kDefaultAlpha;
  Fallback fallback = Fallback::MaxEnt;

  std::vector<double> beta_grid{0.1, 0.3, 0.5, 0.7, 0.9};
  double ablation_gamma = 0.5;
  std::vector<int> knn_grid{1, 2, 3, 4, 5};
  bool compare_extrinsic = true;

  // Earlier artifact directories to reuse instead of retraining.
  std::optional<std::filesystem::path> ensemble_dir;
  std::optional<std::filesystem::path> maxent_dir;

  std::uint64_t master_seed = 1;
  int n_seeds = 3;
  int eval_points = 5;  // test evaluations along each training curve
  int n_bootstrap = 2000;
  std::filesystem::path output_dir = "runs";
  bool timestamped = true;

  /// Rejects out-of-range values and overlapping train/test seed ranges.
  void validate() const;

  PpoConfig maxent_ppo() const;
  std::uint64_t train_seed(int i) const { return level_seed_base + static_cast<std::uint64_t>(i); }
  std::uint64_t test_seed(int i) const { return level_seed_base + kTestSeedOffset + static_cast<std::uint64_t>(i); }
};

/// Flat YAML: one `key: value` per field, lists for the grids. Unknown keys
/// and a missing or different schema_version are configuration errors.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& yaml_text);
/// Applies `key=value`; the value is parsed as a YAML scalar or list.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);
std::string config_yaml(const ExperimentConfig& cfg);
std::vector<std::string> config_keys();

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentResult {
  std::filesystem::path dir;
  ScoreTable scores;
  std::string summary_json;
  std::vector<Check> checks;
};

using LogFn = std::function<void(const std::string&)>;

/// Runs the experiment deterministically from the master seed. Outputs go to
/// output_dir/<kind>-<UTC timestamp> (or output_dir itself when not
/// timestamped).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogFn& log = {});

std::vector<std::shared_ptr<const LevelSpec>> train_levels(const ExperimentConfig& cfg);
std::vector<std::shared_ptr<const LevelSpec>> test_levels(const ExperimentConfig& cfg);

/// Per-policy statistics of a score table, split by train/test.
struct PolicySummary {
  std::string policy_id;
  double train_mean = 0.0;
  double test_mean = 0.0;
  double train_std = 0.0;  // across runs
  double test_std = 0.0;
  std::optional<double> gap;
  std::size_t runs = 0;
  std::size_t test_rows = 0;
  double test_row_std = 0.0;  // across (run, level) rows
};

std::vector<PolicySummary> summarize_policies(const ScoreTable& table);

/// Merges every scores.csv under `artifact_dir`, then writes report.json,
/// report.csv and summary.txt there. Corrupt tables and empty directories
/// are errors naming the offending file.
std::string export_report(const std::filesystem::path& artifact_dir, int n_bootstrap = 2000, std::uint64_t seed = 0);

}  // namespace expgen
