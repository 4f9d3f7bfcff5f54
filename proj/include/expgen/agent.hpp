#pragma once

// Test-time controller: plays the reward ensemble's action when enough
// members agree, otherwise hands control to the exploration policy for a
// geometrically distributed number of steps.

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "expgen/ppo.hpp"

namespace expgen {

enum class Fallback { MaxEnt, Random };
enum class Branch { Consensus, Explore };

const char* to_string(Fallback fallback);
Fallback parse_fallback(std::string_view name);
const char* to_string(Branch branch);

inline constexpr int kDefaultEnsembleSize = 10;
inline constexpr int kDefaultConsensus = 6;
inline constexpr double kDefaultAlpha = 0.5;

struct EnsembleBundle {
  std::vector<PolicyParams<float>> reward_policies;
  std::optional<PolicyParams<float>> maxent_policy;  // required for Fallback::MaxEnt
  int consensus_k = kDefaultConsensus;
  double alpha = kDefaultAlpha;
  Fallback fallback = Fallback::MaxEnt;

  /// k may exceed m, in which case consensus never occurs.
  void validate() const;
};

struct SwitchState {
  int counter = 0;
};

/// Most frequent action if it occurs at least k times; ties go to the lowest id.
std::optional<int> consensus_action(std::span<const int> actions, int k);

/// Geometric sample on {0, 1, 2, ...} with P(n) = alpha (1 - alpha)^n.
int sample_switch_duration(double alpha, Rng& rng);

struct SwitchDecision {
  Branch branch = Branch::Explore;
  std::optional<int> consensus;
};

/// One step of the switching rule given the members' sampled actions:
/// decrement the counter, exploit if consensus exists and the counter is
/// negative, otherwise explore and resample the counter.
SwitchDecision switch_step(std::span<const int> member_actions, int k, double alpha, SwitchState& state, Rng& rng);

/// Per-episode controller state: the switch counter and the exploration
/// policy's memory, which consumes every observation of the episode.
struct ExpGenState {
  SwitchState switch_state;
  MemoryState<float> memory;
};

ExpGenState initial_state(const EnsembleBundle& bundle);

struct ActResult {
  int action = 0;
  Branch branch = Branch::Explore;
};

ActResult expgen_act(const EnsembleBundle& bundle, const Observation& obs, ExpGenState& state, Rng& rng);

struct TraceRow {
  int step = 0;
  Branch branch = Branch::Explore;
  int action = 0;
  double reward = 0.0;
};

struct ExpGenEpisode {
  EpisodeStats stats;
  int explore_steps = 0;
  int consensus_steps = 0;
  std::vector<TraceRow> trace;
};

/// Runs one episode per (level, repetition), stepping all of them as a batch.
/// Each episode draws from its own seed-derived generator, so results do not
/// depend on batching. Ordered by level, then repetition.
std::vector<ExpGenEpisode> evaluate_expgen(const EnsembleBundle& bundle,
                                           const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                           const EvalOptions& options, std::uint64_t seed, bool record_trace = false);

ExpGenEpisode run_episode(const EnsembleBundle& bundle, std::shared_ptr<const LevelSpec> level,
                          const EvalOptions& options, std::uint64_t seed);

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

/// JSON manifest: member checkpoint paths (relative to the manifest's
/// directory), the exploration checkpoint, k, alpha and fallback.
struct BundleManifest {
  std::vector<std::filesystem::path> reward_checkpoints;
  std::optional<std::filesystem::path> maxent_checkpoint;
  int consensus_k = kDefaultConsensus;
  double alpha = kDefaultAlpha;
  Fallback fallback = Fallback::MaxEnt;
};

void write_bundle_manifest(const std::filesystem::path& path, const BundleManifest& manifest);
BundleManifest read_bundle_manifest(const std::filesystem::path& path);
EnsembleBundle load_bundle(const std::filesystem::path& manifest_path);

}  // namespace expgen
