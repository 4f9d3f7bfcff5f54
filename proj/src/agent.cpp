#include "expgen/agent.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "expgen/error.hpp"
#include "json.hpp"

namespace expgen {

const char* to_string(Fallback fallback) { return fallback == Fallback::MaxEnt ? "maxent" : "random"; }

Fallback parse_fallback(std::string_view name) {
  if (name == "maxent") return Fallback::MaxEnt;
  if (name == "random") return Fallback::Random;
  throw Error(ErrorKind::Config, "unknown fallback '" + std::string(name) + "'");
}

const char* to_string(Branch branch) { return branch == Branch::Consensus ? "consensus" : "explore"; }

void EnsembleBundle::validate() const {
  if (reward_policies.empty()) throw Error(ErrorKind::Config, "ensemble has no reward policies");
  if (consensus_k < 1) throw Error(ErrorKind::Config, "consensus k must be >= 1");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Config, "alpha must lie in (0, 1]");
  const auto& arch = reward_policies.front().arch;
  for (const auto& p : reward_policies) {
    if (p.arch.recurrent()) throw Error(ErrorKind::Config, "ensemble members must be feedforward");
    if (p.arch.input_dim != arch.input_dim || p.arch.view_radius != arch.view_radius) {
      throw Error(ErrorKind::Shape, "ensemble members disagree on input encoding");
    }
  }
  if (fallback == Fallback::MaxEnt) {
    if (!maxent_policy) throw Error(ErrorKind::Config, "maxent fallback needs an exploration policy");
    if (maxent_policy->arch.input_dim < 1) throw Error(ErrorKind::Shape, "exploration policy has no inputs");
  }
}

std::optional<int> consensus_action(std::span<const int> actions, int k) {
  std::array<int, kActionCount> counts{};
  for (int a : actions) {
    if (a < 0 || a >= kActionCount) throw Error(ErrorKind::Shape, "action id out of range");
    ++counts[static_cast<std::size_t>(a)];
  }
  int best = 0;
  for (int a = 1; a < kActionCount; ++a) {
    if (counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(best)]) best = a;
  }
  if (counts[static_cast<std::size_t>(best)] >= k) return best;
  return std::nullopt;
}

int sample_switch_duration(double alpha, Rng& rng) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(ErrorKind::Config, "alpha must lie in (0, 1]");
  const double u = 1.0 - uniform01(rng);  // (0, 1]
  if (alpha == 1.0) return 0;
  return static_cast<int>(std::floor(std::log(u) / std::log1p(-alpha)));
}

SwitchDecision switch_step(std::span<const int> member_actions, int k, double alpha, SwitchState& state, Rng& rng) {
  SwitchDecision d;
  d.consensus = consensus_action(member_actions, k);
  --state.counter;
  if (d.consensus && state.counter < 0) {
    d.branch = Branch::Consensus;
  } else {
    d.branch = Branch::Explore;
    state.counter = sample_switch_duration(alpha, rng);
  }
  return d;
}

ExpGenState initial_state(const EnsembleBundle& bundle) {
  ExpGenState s;
  if (bundle.maxent_policy) s.memory = MemoryState<float>::initial(bundle.maxent_policy->arch);
  return s;
}

ActResult expgen_act(const EnsembleBundle& bundle, const Observation& obs, ExpGenState& state, Rng& rng) {
  const Eigen::VectorXf x = observation_vector(obs, bundle.reward_policies.front().arch.view_radius);
  std::vector<int> actions;
  actions.reserve(bundle.reward_policies.size());
  const auto no_memory = MemoryState<float>{};
  for (const auto& member : bundle.reward_policies) {
    actions.push_back(policy_forward(member, x, no_memory).distribution.sample(rng));
  }
  std::optional<ActionDistribution> explore;
  if (bundle.maxent_policy) {
    const int radius = bundle.maxent_policy->arch.view_radius;
    auto out = policy_forward(*bundle.maxent_policy, observation_vector(obs, radius), state.memory);
    state.memory = std::move(out.memory);
    explore = std::move(out.distribution);
  }
  const auto d = switch_step(actions, bundle.consensus_k, bundle.alpha, state.switch_state, rng);
  if (d.branch == Branch::Consensus) return {*d.consensus, Branch::Consensus};
  if (bundle.fallback == Fallback::MaxEnt) return {explore->sample(rng), Branch::Explore};
  return {static_cast<int>(uniform_index(rng, kActionCount)), Branch::Explore};
}

std::vector<ExpGenEpisode> evaluate_expgen(const EnsembleBundle& bundle,
                                           const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                           const EvalOptions& options, std::uint64_t seed, bool record_trace) {
  bundle.validate();
  const int reps = options.episodes_per_level;
  if (reps < 1) throw Error(ErrorKind::Config, "episodes_per_level must be >= 1");
  struct Live {
    EnvState state;
    Observation obs;
    EpisodeTracker tracker;
    ExpGenState ctl;
    Rng rng;
    bool done = false;
  };
  const std::size_t n = levels.size() * static_cast<std::size_t>(reps);
  std::vector<Live> live(n);
  std::vector<ExpGenEpisode> episodes(n);
  const auto& member_arch = bundle.reward_policies.front().arch;
  for (std::size_t e = 0; e < n; ++e) {
    auto r = new_episode(levels[e / static_cast<std::size_t>(reps)], options.mode, options.horizon);
    const auto fits = [&](const Architecture& a) {
      return observation_size(r.observation.width, r.observation.height, a.view_radius) == a.input_dim;
    };
    if (!fits(member_arch) || (bundle.maxent_policy && !fits(bundle.maxent_policy->arch))) {
      throw Error(ErrorKind::Shape, "evaluation level does not match the policy input size");
    }
    live[e].tracker = EpisodeTracker(r.state, r.observation, options.knn, true);
    live[e].state = std::move(r.state);
    live[e].obs = std::move(r.observation);
    live[e].ctl = initial_state(bundle);
    live[e].rng.seed(derive_seed(seed, e));
  }

  const std::size_t m = bundle.reward_policies.size();
  std::vector<std::size_t> active;
  SequenceBatch<float> sb;
  std::vector<Eigen::MatrixXf> member_logp(m);
  std::vector<int> actions(m);
  for (int t = 0;; ++t) {
    active.clear();
    for (std::size_t e = 0; e < n; ++e) {
      if (!live[e].done) active.push_back(e);
    }
    if (active.empty()) break;
    const auto width = static_cast<Eigen::Index>(active.size());
    sb.steps = 1;
    sb.width = static_cast<int>(width);
    sb.resets.setZero(width);
    const auto fill = [&](const Architecture& a) {
      sb.observations.resize(a.input_dim, width);
      for (Eigen::Index j = 0; j < width; ++j) {
        sb.observations.col(j) = observation_vector(live[active[static_cast<std::size_t>(j)]].obs, a.view_radius);
      }
    };
    fill(member_arch);
    sb.initial_memory.resize(0, width);
    for (std::size_t i = 0; i < m; ++i) member_logp[i] = log_softmax_columns(policy_forward_batch(bundle.reward_policies[i], sb).logits);
    Eigen::MatrixXf explore_logp;
    BatchOutput<float> explore_out;
    if (bundle.maxent_policy) {
      if (bundle.maxent_policy->arch.view_radius != member_arch.view_radius) fill(bundle.maxent_policy->arch);
      sb.initial_memory.resize(bundle.maxent_policy->arch.recurrent_width, width);
      for (Eigen::Index j = 0; j < width; ++j) sb.initial_memory.col(j) = live[active[static_cast<std::size_t>(j)]].ctl.memory.hidden;
      explore_out = policy_forward_batch(*bundle.maxent_policy, sb);
      explore_logp = log_softmax_columns(explore_out.logits);
    }
    auto sample = [](const Eigen::MatrixXf& logp, Eigen::Index col, Rng& rng) {
      Eigen::VectorXd p = logp.col(col).cast<double>().array().exp();
      return sample_categorical<double>(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), rng);
    };
    for (Eigen::Index j = 0; j < width; ++j) {
      const std::size_t e = active[static_cast<std::size_t>(j)];
      auto& l = live[e];
      for (std::size_t i = 0; i < m; ++i) actions[i] = sample(member_logp[i], j, l.rng);
      if (bundle.maxent_policy && bundle.maxent_policy->arch.recurrent()) l.ctl.memory.hidden = explore_out.final_memory.col(j);
      const auto d = switch_step(actions, bundle.consensus_k, bundle.alpha, l.ctl.switch_state, l.rng);
      int action;
      if (d.branch == Branch::Consensus) {
        action = *d.consensus;
        ++episodes[e].consensus_steps;
      } else {
        action = bundle.fallback == Fallback::MaxEnt ? sample(explore_logp, j, l.rng)
                                                     : static_cast<int>(uniform_index(l.rng, kActionCount));
        ++episodes[e].explore_steps;
      }
      auto tr = step(l.state, static_cast<Action>(action), options.mode);
      l.tracker.record(tr.state, tr.outcome);
      if (record_trace) episodes[e].trace.push_back({t, d.branch, action, tr.outcome.extrinsic_reward});
      l.done = tr.outcome.done;
      l.state = std::move(tr.state);
      l.obs = std::move(tr.outcome.observation);
    }
  }
  for (std::size_t e = 0; e < n; ++e) episodes[e].stats = live[e].tracker.stats();
  return episodes;
}

ExpGenEpisode run_episode(const EnsembleBundle& bundle, std::shared_ptr<const LevelSpec> level,
                          const EvalOptions& options, std::uint64_t seed) {
  EvalOptions single = options;
  single.episodes_per_level = 1;
  return evaluate_expgen(bundle, {std::move(level)}, single, seed, true).front();
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "step,branch,action,reward\n";
  for (const auto& r : trace) os << r.step << ',' << to_string(r.branch) << ',' << r.action << ',' << r.reward << '\n';
}

void write_bundle_manifest(const std::filesystem::path& path, const BundleManifest& manifest) {
  nlohmann::ordered_json j;
  j["format"] = "expgen-bundle";
  j["version"] = 1;
  j["reward_checkpoints"] = nlohmann::json::array();
  for (const auto& p : manifest.reward_checkpoints) j["reward_checkpoints"].push_back(p.generic_string());
  j["maxent_checkpoint"] = manifest.maxent_checkpoint ? nlohmann::json(manifest.maxent_checkpoint->generic_string())
                                                      : nlohmann::json(nullptr);
  j["consensus_k"] = manifest.consensus_k;
  j["alpha"] = manifest.alpha;
  j["fallback"] = to_string(manifest.fallback);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << j.dump(2) << '\n';
}

BundleManifest read_bundle_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open bundle manifest " + path.string());
  BundleManifest m;
  try {
    const auto j = nlohmann::json::parse(is);
    if (j.at("format") != "expgen-bundle" || j.at("version") != 1) {
      throw Error(ErrorKind::Io, path.string() + " is not a version-1 bundle manifest");
    }
    for (const auto& p : j.at("reward_checkpoints")) m.reward_checkpoints.emplace_back(p.get<std::string>());
    if (!j.at("maxent_checkpoint").is_null()) m.maxent_checkpoint = j.at("maxent_checkpoint").get<std::string>();
    m.consensus_k = j.at("consensus_k").get<int>();
    m.alpha = j.at("alpha").get<double>();
    m.fallback = parse_fallback(j.at("fallback").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "malformed bundle manifest " + path.string() + ": " + e.what());
  }
  return m;
}

EnsembleBundle load_bundle(const std::filesystem::path& manifest_path) {
  const auto m = read_bundle_manifest(manifest_path);
  const auto dir = manifest_path.parent_path();
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : dir / p; };
  EnsembleBundle b;
  for (const auto& p : m.reward_checkpoints) {
    const auto path = resolve(p);
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::Config, "missing checkpoint " + path.string());
    b.reward_policies.push_back(load_checkpoint<float>(path).params);
  }
  if (m.maxent_checkpoint) {
    const auto path = resolve(*m.maxent_checkpoint);
    if (!std::filesystem::exists(path)) throw Error(ErrorKind::Config, "missing checkpoint " + path.string());
    b.maxent_policy = load_checkpoint<float>(path).params;
  }
  b.consensus_k = m.consensus_k;
  b.alpha = m.alpha;
  b.fallback = m.fallback;
  b.validate();
  return b;
}

}  // namespace expgen
