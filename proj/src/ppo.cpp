#include "expgen/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>
#include <cstdlib>

#include "expgen/error.hpp"

namespace expgen {

void PpoConfig::validate(bool recurrent) const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must lie in [0, 1]");
  if (!(clip > 0.0)) fail("clip must be > 0");
  if (rollout_len < 1 || n_envs < 1 || epochs < 1 || minibatches < 1) {
    fail("rollout_len, n_envs, epochs and minibatches must be >= 1");
  }
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (total_steps < 1) fail("total_steps must be >= 1");
  const long samples = static_cast<long>(rollout_len) * n_envs;
  if (samples % minibatches != 0) fail("minibatches must divide rollout_len x n_envs");
  if (recurrent) {
    if (segment_len < 1 || rollout_len % segment_len != 0) fail("segment_len must divide rollout_len");
    if ((samples / segment_len) % minibatches != 0) {
      fail("minibatches must divide the number of recurrent segments (rollout_len / segment_len x n_envs)");
    }
  }
}

const char* to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::Extrinsic:
      return "extrinsic";
    case RewardMode::Intrinsic:
      return "intrinsic";
    case RewardMode::Mixed:
      return "mixed";
  }
  return "?";
}

RewardMode parse_reward_mode(std::string_view name) {
  if (name == "extrinsic") return RewardMode::Extrinsic;
  if (name == "intrinsic") return RewardMode::Intrinsic;
  if (name == "mixed") return RewardMode::Mixed;
  throw Error(ErrorKind::Config, "unknown reward mode '" + std::string(name) + "'");
}

double RewardSource::combine(double extrinsic, double intrinsic) const {
  switch (mode) {
    case RewardMode::Extrinsic:
      return extrinsic;
    case RewardMode::Intrinsic:
      return intrinsic;
    case RewardMode::Mixed:
      return *beta * intrinsic + (1.0 - *beta) * extrinsic;
  }
  return extrinsic;
}

void RewardSource::validate() const {
  if (mode == RewardMode::Mixed) {
    if (!beta || !(*beta >= 0.0 && *beta <= 1.0)) throw Error(ErrorKind::Config, "mixed reward needs beta in [0, 1]");
  } else if (beta) {
    throw Error(ErrorKind::Config, "beta is only meaningful for the mixed reward");
  }
  if (needs_intrinsic()) knn.validate();
}

Eigen::VectorXf observation_vector(const Observation& obs, int view_radius) {
  if (view_radius == 0) return Eigen::Map<const Eigen::VectorXf>(obs.data.data(), static_cast<Eigen::Index>(obs.data.size()));
  int ax = 0, ay = 0;
  for (int y = 0; y < obs.height; ++y) {
    for (int x = 0; x < obs.width; ++x) {
      if (obs.at(Observation::Agent, y, x) > 0.0f) {
        ax = x;
        ay = y;
      }
    }
  }
  // The agent sits at the window centre, so its plane is dropped. Cells past
  // the border read as walls unless walls are hidden.
  const float outside = obs.mode == ObservationMode::Full ? 1.0f : 0.0f;
  Eigen::VectorXf v(observation_size(obs.width, obs.height, view_radius));
  int o = 0;
  for (int c : {Observation::Walls, Observation::Goal, Observation::Keys, Observation::Doors}) {
    for (int dy = -view_radius; dy <= view_radius; ++dy) {
      for (int dx = -view_radius; dx <= view_radius; ++dx) {
        const int x = ax + dx, y = ay + dy;
        const bool inside = x >= 0 && y >= 0 && x < obs.width && y < obs.height;
        v[o++] = inside ? obs.at(c, y, x) : (c == Observation::Walls ? outside : 0.0f);
      }
    }
  }
  return v;
}

int observation_size(int width, int height, int view_radius) {
  if (view_radius == 0) return kObservationChannels * width * height;
  const int side = 2 * view_radius + 1;
  return (kObservationChannels - 1) * side * side;
}

EpisodeTracker::EpisodeTracker(const EnvState& start, const Observation& obs, const KnnConfig& knn,
                               bool track_intrinsic)
    : knn_(knn), track_intrinsic_(track_intrinsic), width_(start.level->width) {
  stats_.level_seed = start.level->seed;
  seen_.assign(start.level->walls.size(), 0);
  seen_[static_cast<std::size_t>(start.level->index(start.position))] = 1;
  stats_.distinct_cells = 1;
  if (track_intrinsic_) buffer_.push(downsample(obs, knn_.pool_kernel));
}

double EpisodeTracker::record(const EnvState& next, const StepOutcome& outcome) {
  ++stats_.length;
  stats_.extrinsic_return += outcome.extrinsic_reward;
  if (outcome.done_reason == DoneReason::Goal) stats_.success = true;
  const auto idx = static_cast<std::size_t>(next.position.y * width_ + next.position.x);
  if (next.position != next.level->goal && !seen_[idx]) {
    seen_[idx] = 1;
    ++stats_.distinct_cells;
  }
  if (!track_intrinsic_) return 0.0;
  StateVector s = downsample(outcome.observation, knn_.pool_kernel);
  const double r = knn_intrinsic_reward(buffer_, s, knn_);
  buffer_.push(s);
  stats_.intrinsic_return += r;
  return r;
}

VecEnv::VecEnv(std::vector<std::shared_ptr<const LevelSpec>> levels, int n_envs, const Architecture& arch,
               std::uint64_t seed, VecEnvOptions options)
    : levels_(std::move(levels)),
      options_(options),
      input_dim_(arch.input_dim),
      recurrent_width_(arch.recurrent_width),
      view_radius_(arch.view_radius) {
  if (levels_.empty()) throw Error(ErrorKind::EmptyInput, "training level set is empty");
  for (const auto& l : levels_) {
    if (observation_size(l->width, l->height, arch.view_radius) != arch.input_dim) {
      throw Error(ErrorKind::Shape, "level " + std::to_string(l->seed) + " does not match the policy input size");
    }
  }
  workers_.resize(static_cast<std::size_t>(n_envs));
  for (int i = 0; i < n_envs; ++i) workers_[static_cast<std::size_t>(i)].level_rng.seed(derive_seed(seed, static_cast<std::uint64_t>(i)));
}

void VecEnv::reset_worker(Worker& w, const KnnConfig& knn, bool track_intrinsic) {
  const auto& level = levels_[uniform_index(w.level_rng, levels_.size())];
  auto r = new_episode(level, options_.mode, options_.horizon);
  w.tracker = EpisodeTracker(r.state, r.observation, knn, track_intrinsic);
  w.state = std::move(r.state);
  w.observation = std::move(r.observation);
  w.memory.setZero(recurrent_width_);
  w.episode_start = true;
}

void VecEnv::ensure_started(const KnnConfig& knn, bool track_intrinsic) {
  if (started_) return;
  for (auto& w : workers_) reset_worker(w, knn, track_intrinsic);
  started_ = true;
}

namespace {

void fill_step_batch(SequenceBatch<float>& sb, std::vector<VecEnv::Worker*>& active, int view_radius) {
  const auto width = static_cast<Eigen::Index>(active.size());
  sb.steps = 1;
  sb.width = static_cast<int>(width);
  const auto& first = active.front()->observation;
  sb.observations.resize(observation_size(first.width, first.height, view_radius), width);
  sb.resets.setZero(width);
  sb.initial_memory.resize(active.front()->memory.size(), width);
  for (Eigen::Index b = 0; b < width; ++b) {
    sb.observations.col(b) = observation_vector(active[static_cast<std::size_t>(b)]->observation, view_radius);
    sb.initial_memory.col(b) = active[static_cast<std::size_t>(b)]->memory;
  }
}

int sample_action(const Eigen::Ref<const Eigen::VectorXf>& log_probs, Rng& rng) {
  Eigen::VectorXd p = log_probs.cast<double>().array().exp();
  return sample_categorical<double>(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), rng);
}

}  // namespace

RolloutBatch collect_rollout(const PolicyParams<float>& params, VecEnv& envs, const PpoConfig& cfg,
                             const RewardSource& src, Rng& rng) {
  envs.ensure_started(src.knn, src.needs_intrinsic());
  const int B = envs.size();
  const int T = cfg.rollout_len;
  const auto N = static_cast<Eigen::Index>(T) * B;
  const bool recurrent = params.arch.recurrent();

  RolloutBatch batch;
  batch.steps = T;
  batch.n_envs = B;
  batch.observations.resize(envs.input_dim(), N);
  batch.memories.resize(params.arch.recurrent_width, N);
  batch.actions.resize(static_cast<std::size_t>(N));
  batch.log_probs.resize(N);
  batch.rewards.resize(N);
  batch.extrinsic.resize(N);
  batch.intrinsic.resize(N);
  batch.values.resize(N);
  batch.dones.resize(static_cast<std::size_t>(N));
  batch.episode_starts.resize(static_cast<std::size_t>(N));
  batch.buffer_lengths.resize(static_cast<std::size_t>(N));

  std::vector<VecEnv::Worker*> all;
  for (auto& w : envs.workers()) all.push_back(&w);
  SequenceBatch<float> sb;
  const auto mode = envs.options().mode;

  for (int t = 0; t < T; ++t) {
    fill_step_batch(sb, all, params.arch.view_radius);
    const auto out = policy_forward_batch(params, sb);
    const Eigen::MatrixXf logp = log_softmax_columns(out.logits);
    for (int b = 0; b < B; ++b) {
      auto& w = *all[static_cast<std::size_t>(b)];
      const auto i = static_cast<Eigen::Index>(t) * B + b;
      const auto si = static_cast<std::size_t>(i);
      batch.observations.col(i) = sb.observations.col(b);
      if (recurrent) batch.memories.col(i) = w.memory;
      const int a = sample_action(logp.col(b), rng);
      batch.actions[si] = a;
      batch.log_probs[i] = logp(a, b);
      batch.values[i] = out.values(b);
      batch.episode_starts[si] = w.episode_start;
      w.episode_start = false;
      batch.buffer_lengths[si] = w.tracker.buffer_length();

      auto tr = step(w.state, static_cast<Action>(a), mode);
      const double r_int = w.tracker.record(tr.state, tr.outcome);
      batch.extrinsic[i] = tr.outcome.extrinsic_reward;
      batch.intrinsic[i] = r_int;
      batch.rewards[i] = src.combine(tr.outcome.extrinsic_reward, r_int);
      batch.dones[si] = tr.outcome.done;
      if (recurrent) w.memory = out.final_memory.col(b);
      if (tr.outcome.done) {
        batch.finished.push_back(w.tracker.stats());
        envs.reset_worker(w, src.knn, src.needs_intrinsic());
      } else {
        w.state = std::move(tr.state);
        w.observation = std::move(tr.outcome.observation);
      }
    }
  }
  fill_step_batch(sb, all, params.arch.view_radius);
  batch.bootstrap_values = policy_forward_batch(params, sb).values.transpose().cast<double>();
  return batch;
}

Advantages compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                       const std::vector<std::uint8_t>& dones, const Eigen::VectorXd& bootstrap_values, int n_envs,
                       double gamma, double lambda) {
  const Eigen::Index N = rewards.size();
  if (n_envs < 1 || N % n_envs != 0 || values.size() != N || static_cast<Eigen::Index>(dones.size()) != N ||
      bootstrap_values.size() != n_envs) {
    throw Error(ErrorKind::Shape, "inconsistent rollout arrays for advantage estimation");
  }
  const Eigen::Index T = N / n_envs;
  Advantages adv;
  adv.raw.resize(N);
  for (int b = 0; b < n_envs; ++b) {
    double last = 0.0;
    for (Eigen::Index t = T - 1; t >= 0; --t) {
      const Eigen::Index i = t * n_envs + b;
      const double next_value = t == T - 1 ? bootstrap_values[b] : values[i + n_envs];
      const double live = dones[static_cast<std::size_t>(i)] ? 0.0 : 1.0;
      const double delta = rewards[i] + gamma * next_value * live - values[i];
      last = delta + gamma * lambda * live * last;
      adv.raw[i] = last;
    }
  }
  adv.returns = adv.raw + values;
  const double mean = adv.raw.mean();
  const double stddev = std::sqrt((adv.raw.array() - mean).square().mean());
  adv.advantages = (adv.raw.array() - mean) / (stddev + 1e-8);
  return adv;
}

Advantages compute_gae(const RolloutBatch& batch, double gamma, double lambda) {
  return compute_gae(batch.rewards, batch.values, batch.dones, batch.bootstrap_values, batch.n_envs, gamma, lambda);
}

Eigen::VectorXd RewardNormalizer::apply(const Eigen::VectorXd& rewards, const std::vector<std::uint8_t>& dones) {
  const auto n = static_cast<Eigen::Index>(returns_.size());
  const Eigen::Index N = rewards.size();
  for (Eigen::Index i = 0; i < N; ++i) {
    const Eigen::Index b = i % n;
    returns_[b] = returns_[b] * gamma_ + rewards[i];
    // Welford update with each discounted return sum.
    count_ += 1.0;
    const double d = returns_[b] - mean_;
    mean_ += d / count_;
    m2_ += d * (returns_[b] - mean_);
    if (dones[static_cast<std::size_t>(i)]) returns_[b] = 0.0;
  }
  return (rewards / std::sqrt(std() * std() + 1e-8)).cwiseMax(-10.0).cwiseMin(10.0);
}

double RewardNormalizer::std() const { return count_ > 1.0 ? std::sqrt(m2_ / count_) : 1.0; }

LossSpec<float> ppo_loss(const std::vector<int>& actions, const Eigen::VectorXf& old_log_probs,
                         const Eigen::VectorXf& advantages, const Eigen::VectorXf& returns, const PpoConfig& cfg,
                         UpdateStats* stats) {
  LossSpec<float> spec;
  const double clip = cfg.clip;
  const double ent_coef = cfg.entropy_bonus;
  const double vf_coef = cfg.value_coef;
  spec.heads = [=](const Eigen::MatrixXf& logits, const Eigen::RowVectorXf& values, Eigen::MatrixXf& dlogits,
                   Eigen::RowVectorXf& dvalues) {
    const Eigen::Index n = logits.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const Eigen::MatrixXf logp = log_softmax_columns(logits);
    double policy = 0.0, value = 0.0, entropy = 0.0, kl = 0.0, clipped = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int a = actions[static_cast<std::size_t>(i)];
      const Eigen::ArrayXd lp = logp.col(i).cast<double>();
      const Eigen::ArrayXd p = lp.exp();
      const double h = -(p * lp).sum();
      const double log_ratio = lp[a] - old_log_probs[i];
      const double ratio = std::exp(log_ratio);
      const double A = advantages[i];
      const double surr1 = ratio * A;
      const double surr2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * A;
      policy -= std::min(surr1, surr2);
      // d(loss)/d(log pi(a)); zero when the clipped term is the active minimum.
      const double dlp = surr1 <= surr2 ? -A * ratio * inv_n : 0.0;
      Eigen::ArrayXd g = -dlp * p + ent_coef * inv_n * p * (lp + h);
      g[a] += dlp;
      dlogits.col(i) = g.cast<float>().matrix();
      const double err = static_cast<double>(values(i)) - returns[i];
      value += 0.5 * err * err;
      dvalues(i) = static_cast<float>(vf_coef * err * inv_n);
      entropy += h;
      kl += (ratio - 1.0) - log_ratio;
      clipped += std::abs(ratio - 1.0) > clip ? 1.0 : 0.0;
    }
    if (stats) {
      stats->policy_loss = policy * inv_n;
      stats->value_loss = value * inv_n;
      stats->entropy = entropy * inv_n;
      stats->approx_kl = kl * inv_n;
      stats->clip_fraction = clipped * inv_n;
    }
    return static_cast<float>(policy * inv_n + vf_coef * value * inv_n - ent_coef * entropy * inv_n);
  };
  return spec;
}

namespace {

std::string minibatch_report(const Eigen::VectorXf& adv, const Eigen::VectorXf& ret, const Eigen::VectorXf& old_lp) {
  std::ostringstream os;
  os << "minibatch of " << adv.size() << " samples: advantage mean " << adv.mean() << " min " << adv.minCoeff()
     << " max " << adv.maxCoeff() << "; return mean " << ret.mean() << " min " << ret.minCoeff() << " max "
     << ret.maxCoeff() << "; old log-prob min " << old_lp.minCoeff();
  return os.str();
}

}  // namespace

UpdateStats ppo_update(PolicyParams<float>& params, AdamState<float>& adam, const RolloutBatch& batch,
                       const Advantages& adv, const PpoConfig& cfg, Rng& rng) {
  const bool recurrent = params.arch.recurrent();
  const int B = batch.n_envs;
  const int T = batch.steps;
  const int L = recurrent ? cfg.segment_len : 1;
  const int units = B * (T / L);
  const int per_mb = units / cfg.minibatches;
  if (per_mb < 1 || (recurrent && T % L != 0)) throw Error(ErrorKind::Config, "rollout does not split into minibatches");

  std::vector<int> order(static_cast<std::size_t>(units));
  UpdateStats total;
  int count = 0;
  SequenceBatch<float> sb;
  const Eigen::Index cols = static_cast<Eigen::Index>(L) * per_mb;
  std::vector<int> actions(static_cast<std::size_t>(cols));
  Eigen::VectorXf old_lp(cols), a_mb(cols), r_mb(cols);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, i + 1)]);
    for (int mb = 0; mb < cfg.minibatches; ++mb) {
      sb.steps = L;
      sb.width = per_mb;
      sb.observations.resize(batch.observations.rows(), cols);
      sb.resets.setZero(cols);
      sb.initial_memory.resize(params.arch.recurrent_width, per_mb);
      for (int w = 0; w < per_mb; ++w) {
        const int u = order[static_cast<std::size_t>(mb * per_mb + w)];
        const int b = u % B;
        const int t0 = (u / B) * L;
        if (recurrent) sb.initial_memory.col(w) = batch.memories.col(static_cast<Eigen::Index>(t0) * B + b);
        for (int s = 0; s < L; ++s) {
          const Eigen::Index src = static_cast<Eigen::Index>(t0 + s) * B + b;
          const Eigen::Index dst = static_cast<Eigen::Index>(s) * per_mb + w;
          sb.observations.col(dst) = batch.observations.col(src);
          sb.resets(dst) = batch.episode_starts[static_cast<std::size_t>(src)] ? 1.0f : 0.0f;
          actions[static_cast<std::size_t>(dst)] = batch.actions[static_cast<std::size_t>(src)];
          old_lp[dst] = batch.log_probs[src];
          a_mb[dst] = static_cast<float>(adv.advantages[src]);
          r_mb[dst] = static_cast<float>(adv.returns[src]);
        }
      }
      UpdateStats mb_stats;
      GradientResult<float> g;
      try {
        g = policy_gradient(params, &sb, ppo_loss(actions, old_lp, a_mb, r_mb, cfg, &mb_stats));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Numeric) throw;
        throw Error(ErrorKind::Numeric, std::string(e.what()) + " in PPO update (epoch " + std::to_string(epoch) +
                                            ", minibatch " + std::to_string(mb) + "): " +
                                            minibatch_report(a_mb, r_mb, old_lp));
      }
      const float norm = g.grad.norm();
      if (cfg.max_grad_norm > 0 && norm > cfg.max_grad_norm) g.grad *= static_cast<float>(cfg.max_grad_norm) / norm;
      optimizer_step(params, g.grad, cfg.lr, adam);
      total.policy_loss += mb_stats.policy_loss;
      total.value_loss += mb_stats.value_loss;
      total.entropy += mb_stats.entropy;
      total.approx_kl += mb_stats.approx_kl;
      total.clip_fraction += mb_stats.clip_fraction;
      ++count;
    }
  }
  const double inv = 1.0 / count;
  total.policy_loss *= inv;
  total.value_loss *= inv;
  total.entropy *= inv;
  total.approx_kl *= inv;
  total.clip_fraction *= inv;
  return total;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurveRow>& rows) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "step,train_return_mean,test_return_mean,intrinsic_return_mean,policy_loss,value_loss,entropy,approx_kl,"
        "clip_fraction\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    os << r.step << ',' << num(r.train_return_mean) << ',' << (r.test_return_mean ? num(*r.test_return_mean) : "")
       << ',' << num(r.intrinsic_return_mean) << ',' << num(r.update.policy_loss) << ',' << num(r.update.value_loss)
       << ',' << num(r.update.entropy) << ',' << num(r.update.approx_kl) << ',' << num(r.update.clip_fraction)
       << '\n';
  }
}

namespace {

std::vector<EpisodeStats> run_evaluation(const PolicyParams<float>* params,
                                         const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                         const EvalOptions& options, std::uint64_t seed) {
  struct Episode {
    VecEnv::Worker w;
    bool done = false;
    Rng rng;
  };
  const int reps = options.episodes_per_level;
  if (reps < 1) throw Error(ErrorKind::Config, "episodes_per_level must be >= 1");
  std::vector<Episode> eps(levels.size() * static_cast<std::size_t>(reps));
  const int memory_width = params ? params->arch.recurrent_width : 0;
  for (std::size_t e = 0; e < eps.size(); ++e) {
    auto& ep = eps[e];
    auto r = new_episode(levels[e / static_cast<std::size_t>(reps)], options.mode, options.horizon);
    if (params && observation_size(r.observation.width, r.observation.height, params->arch.view_radius) != params->arch.input_dim) {
      throw Error(ErrorKind::Shape, "evaluation level does not match the policy input size");
    }
    ep.w.tracker = EpisodeTracker(r.state, r.observation, options.knn, true);
    ep.w.state = std::move(r.state);
    ep.w.observation = std::move(r.observation);
    ep.w.memory.setZero(memory_width);
    ep.rng.seed(derive_seed(seed, e));
  }
  std::vector<VecEnv::Worker*> active;
  std::vector<Episode*> active_eps;
  SequenceBatch<float> sb;
  while (true) {
    active.clear();
    active_eps.clear();
    for (auto& ep : eps) {
      if (!ep.done) {
        active.push_back(&ep.w);
        active_eps.push_back(&ep);
      }
    }
    if (active.empty()) break;
    BatchOutput<float> out;
    Eigen::MatrixXf logp;
    if (params) {
      fill_step_batch(sb, active, params->arch.view_radius);
      out = policy_forward_batch(*params, sb);
      logp = log_softmax_columns(out.logits);
    }
    for (std::size_t j = 0; j < active.size(); ++j) {
      auto& ep = *active_eps[j];
      int a;
      if (!params) {
        a = static_cast<int>(uniform_index(ep.rng, kActionCount));
      } else if (options.greedy) {
        logp.col(static_cast<Eigen::Index>(j)).maxCoeff(&a);
      } else {
        a = sample_action(logp.col(static_cast<Eigen::Index>(j)), ep.rng);
      }
      auto tr = step(ep.w.state, static_cast<Action>(a), options.mode);
      ep.w.tracker.record(tr.state, tr.outcome);
      if (params && params->arch.recurrent()) ep.w.memory = out.final_memory.col(static_cast<Eigen::Index>(j));
      ep.done = tr.outcome.done;
      ep.w.state = std::move(tr.state);
      ep.w.observation = std::move(tr.outcome.observation);
    }
  }
  std::vector<EpisodeStats> stats;
  for (const auto& ep : eps) stats.push_back(ep.w.tracker.stats());
  return stats;
}

}  // namespace

std::vector<EpisodeStats> evaluate_policy(const PolicyParams<float>& params,
                                          const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                          const EvalOptions& options, std::uint64_t seed) {
  return run_evaluation(&params, levels, options, seed);
}

std::vector<EpisodeStats> evaluate_random(const std::vector<std::shared_ptr<const LevelSpec>>& levels,
                                          const EvalOptions& options, std::uint64_t seed) {
  return run_evaluation(nullptr, levels, options, seed);
}

TrainResult train(const std::vector<std::shared_ptr<const LevelSpec>>& level_set, const PpoConfig& cfg,
                  const RewardSource& src, const Architecture& arch, std::uint64_t seed, const TrainOptions& options) {
  arch.validate();
  cfg.validate(arch.recurrent());
  src.validate();
  TrainResult result{PolicyParams<float>::initialize(arch, derive_seed(seed, 1)), {}, {}};
  result.optimizer = AdamState<float>::for_params(result.params);
  VecEnv envs(level_set, cfg.n_envs, arch, derive_seed(seed, 2), {options.mode, options.horizon});
  Rng rng(derive_seed(seed, 3));
  RewardNormalizer normalizer(cfg.n_envs, cfg.gamma);
  std::deque<EpisodeStats> recent;
  constexpr std::size_t kWindow = 100;

  EvalOptions eval;
  eval.mode = options.mode;
  eval.horizon = options.horizon;
  eval.knn = src.knn;

  std::int64_t steps = 0;
  std::int64_t next_eval = options.eval_interval;
  while (steps < cfg.total_steps) {
    auto batch = collect_rollout(result.params, envs, cfg, src, rng);
    steps += static_cast<std::int64_t>(batch.samples());
    const Eigen::VectorXd rewards = cfg.reward_norm ? normalizer.apply(batch.rewards, batch.dones) : batch.rewards;
    const auto adv = compute_gae(rewards, batch.values, batch.dones, batch.bootstrap_values, batch.n_envs, cfg.gamma,
                                 cfg.lambda);
    CurveRow row;
    row.step = steps;
    row.update = ppo_update(result.params, result.optimizer, batch, adv, cfg, rng);
    for (auto& s : batch.finished) {
      recent.push_back(s);
      if (recent.size() > kWindow) recent.pop_front();
    }
    for (const auto& s : recent) {
      row.train_return_mean += s.extrinsic_return;
      row.intrinsic_return_mean += s.intrinsic_return;
    }
    if (!recent.empty()) {
      row.train_return_mean /= static_cast<double>(recent.size());
      row.intrinsic_return_mean /= static_cast<double>(recent.size());
    }
    const bool last = steps >= cfg.total_steps;
    if (!options.test_levels.empty() && options.eval_interval > 0 && (steps >= next_eval || last)) {
      const auto test = evaluate_policy(result.params, options.test_levels, eval,
                                        derive_seed(seed, 4 + static_cast<std::uint64_t>(steps)));
      double sum = 0.0;
      for (const auto& s : test) sum += s.extrinsic_return;
      row.test_return_mean = sum / static_cast<double>(test.size());
      while (next_eval <= steps) next_eval += options.eval_interval;
    }
    if (options.on_progress) options.on_progress(row);
    result.curve.push_back(row);
  }
  return result;
}

}  // namespace expgen
