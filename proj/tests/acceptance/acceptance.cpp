// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any selected criterion fails.
//
//   acceptance [--work DIR] [N ...]   (no numbers: run all nine)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "expgen/agent.hpp"
#include "expgen/entropy.hpp"
#include "expgen/error.hpp"
#include "expgen/experiment.hpp"
#include "expgen/metrics.hpp"
#include "expgen/oracle.hpp"
#include "expgen/policy.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace expgen;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

fs::path g_work = "acceptance-work";

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

ExperimentConfig acceptance_config(const std::string& name, const fs::path& out) {
  auto cfg = load_config(fs::path(EXPGEN_ACCEPTANCE_DIR) / (name + ".yaml"));
  cfg.output_dir = out;
  cfg.timestamped = false;
  fs::remove_all(out);
  return cfg;
}

LogFn progress(const std::string& tag) {
  return [tag](const std::string& s) { std::fprintf(stderr, "  [%s] %s\n", tag.c_str(), s.c_str()); };
}

Outcome from_check(const ExperimentResult& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return {c.passed, c.detail + "; artifacts " + r.dir.string()};
  }
  return {false, "experiment produced no '" + name + "' check"};
}

// 1. k-NN reward and entropy estimate against sorted-distance brute force.
Outcome estimator_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  const double tol = 1e-12;
  double worst = 0.0;
  int cases = 0, entropy_cases = 0, mismatches = 0;
  std::map<Norm, int> per_norm;
  for (int i = 0; i < 1000; ++i) {
    auto c = testing_oracles::random_knn_case(rng, i % 4 == 3);
    c.cfg.norm = i % 2 == 0 ? Norm::L2 : Norm::L0;
    ++per_norm[c.cfg.norm];
    const double got = knn_intrinsic_reward(c.buffer(), c.current, c.cfg);
    const double want = testing_oracles::brute_force_reward(c.states, c.current, c.cfg);
    worst = std::max(worst, std::abs(got - want));
    if (!(std::abs(got - want) <= tol)) ++mismatches;
    if (c.states.size() >= static_cast<std::size_t>(c.cfg.k) + 1) {
      const double e = episode_entropy_estimate(c.states, c.cfg);
      const double we = testing_oracles::brute_force_entropy(c.states, c.cfg);
      worst = std::max(worst, std::abs(e - we));
      if (!(std::abs(e - we) <= tol)) ++mismatches;
      ++entropy_cases;
    }
    ++cases;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 10.0 && per_norm[Norm::L2] > 0 && per_norm[Norm::L0] > 0,
          fmt("%d reward cases (%d L2, %d L0), %d entropy cases, max abs error %.3g (tol 1e-12), %d mismatches, %.2f s (limit 10 s)",
              cases, per_norm[Norm::L2], per_norm[Norm::L0], entropy_cases, worst, mismatches, secs)};
}

// 2. Reverse-mode gradients against central differences.
Outcome gradient_check() {
  const auto t0 = std::chrono::steady_clock::now();
  Architecture ff;
  ff.input_dim = 6;
  ff.hidden = {16};
  Architecture rec;
  rec.input_dim = 6;
  rec.hidden = {8};
  rec.recurrent_width = 6;
  double worst_ff = 0.0, worst_rec = 0.0;
  for (int b = 0; b < 20; ++b) {
    worst_ff = std::max(worst_ff, testing_oracles::finite_difference_check(ff, 100 + b, 1, 5).max_relative_error);
    worst_rec = std::max(worst_rec, testing_oracles::finite_difference_check(rec, 200 + b, 6, 3).max_relative_error);
  }
  const double secs = seconds_since(t0);
  const auto pf = ff.parameter_count(), pr = rec.parameter_count();
  return {pf >= 200 && pr >= 200 && worst_ff < 1e-4 && worst_rec < 1e-4 && secs < 30.0,
          fmt("feedforward %ld params max rel err %.3g; recurrent %ld params max rel err %.3g; 20 batches each "
              "(limit 1e-4), %.2f s (limit 30 s)",
              static_cast<long>(pf), worst_ff, static_cast<long>(pr), worst_rec, secs)};
}

// 3. Wall following covers every reachable cell; scores match flood fill.
Outcome oracle_completeness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(7);
  int levels = 0, covered = 0, score_match = 0, legal = 0, max_steps = 0;
  for (int size : {9, 15}) {
    for (int i = 0; i < 100; ++i) {
      const auto level = generate_level(rng(), LevelKind::Maze, size, size);
      const auto r = wall_follower_rollout(level, Hand::Left);
      const int reachable = testing_oracles::flood_count(level);
      ++levels;
      max_steps = std::max(max_steps, r.steps);
      std::set<std::pair<int, int>> seen;
      bool ok = r.trajectory.front() == level.start;
      for (std::size_t t = 0; t < r.trajectory.size(); ++t) {
        const auto c = r.trajectory[t];
        ok = ok && !level.is_wall(c) && c != level.goal;
        if (t > 0) ok = ok && std::abs(c.x - r.trajectory[t - 1].x) + std::abs(c.y - r.trajectory[t - 1].y) == 1;
        seen.insert({c.x, c.y});
      }
      if (ok) ++legal;
      if (r.covered_all && static_cast<int>(seen.size()) == reachable && r.steps <= 4 * kDefaultHorizon) ++covered;
      if (oracle_score(level) == static_cast<double>(reachable)) ++score_match;
    }
  }
  const double secs = seconds_since(t0);
  return {covered == levels && score_match == levels && legal == levels && secs < 10.0,
          fmt("%d/%d levels fully covered within %d steps (longest %d), %d/%d oracle scores equal flood fill, "
              "%d/%d legal trajectories, %.2f s (limit 10 s)",
              covered, levels, 4 * kDefaultHorizon, max_steps, score_match, levels, legal, levels, secs)};
}

// 4. Switching rule and controller statistics.
Outcome switching_semantics() {
  const auto t0 = std::chrono::steady_clock::now();
  const double alpha = 0.5;
  Rng rng(11);
  const std::vector<int> agree(10, 2);
  const std::vector<int> spread{0, 0, 1, 1, 2, 2, 3, 3, 4, 4};
  // One disagreeing step opens a burst; afterwards the ensemble always agrees
  // and the burst lasts until the counter runs out.
  SwitchState s;
  long steps = 0;
  std::vector<int> bursts;
  int current = 0;
  while (steps < 100000) {
    const bool open = current == 0;
    const auto d = switch_step(open ? spread : agree, 6, alpha, s, rng);
    ++steps;
    if (d.branch == Branch::Explore) {
      ++current;
    } else {
      bursts.push_back(current);
      current = 0;
    }
  }
  double mean = 0.0;
  for (int b : bursts) mean += b;
  mean /= static_cast<double>(bursts.size());
  const double sigma = std::sqrt((1.0 - alpha) / (alpha * alpha) / static_cast<double>(bursts.size()));
  const bool burst_ok = std::abs(mean - 1.0 / alpha) <= 3.0 * sigma;

  std::vector<std::shared_ptr<const LevelSpec>> levels;
  for (int i = 0; i < 32; ++i) levels.push_back(std::make_shared<const LevelSpec>(generate_level(500 + i, LevelKind::Maze, 9, 9)));
  Architecture member_arch;
  member_arch.input_dim = observation_size(9, 9);
  member_arch.hidden = {32};
  Architecture explore_arch = member_arch;
  explore_arch.recurrent_width = 16;

  EnsembleBundle b;
  for (int i = 0; i < 10; ++i) b.reward_policies.push_back(PolicyParams<float>::initialize(member_arch, 40 + i));
  b.maxent_policy = PolicyParams<float>::initialize(explore_arch, 99);
  b.consensus_k = 11;
  auto count = [](const std::vector<ExpGenEpisode>& eps) {
    long explore = 0, total = 0;
    for (const auto& e : eps) {
      explore += e.explore_steps;
      total += e.stats.length;
    }
    return std::pair{explore, total};
  };
  const auto [ex_all, n_all] = count(evaluate_expgen(b, levels, EvalOptions{}, 3));

  // Identical deterministic members: every sampled action coincides.
  auto member = PolicyParams<float>::zeros(member_arch);
  member.weights[ParamLayout(member_arch).policy.bias + static_cast<int>(Action::Right)] = 200.0f;
  b.reward_policies.assign(10, member);
  b.consensus_k = 6;
  const auto [ex_none, n_none] = count(evaluate_expgen(b, levels, EvalOptions{}, 4));

  const double secs = seconds_since(t0);
  return {burst_ok && ex_all == n_all && ex_none == 0 && secs < 30.0,
          fmt("mean burst %.4f over %zu bursts in 1e5 steps (2.0 +- 3 sigma = %.4f); k = m + 1: %ld/%ld explore "
              "steps; identical members: %ld/%ld explore steps; %.2f s (limit 30 s)",
              mean, bursts.size(), 3.0 * sigma, ex_all, n_all, ex_none, n_none, secs)};
}

Outcome maxent_generalization() {
  const auto r = run_experiment(acceptance_config("maxent-generalization", g_work / "c5"), progress("c5"));
  return from_check(r, "maxent_generalization");
}

Outcome expgen_ordering() {
  const auto r = run_experiment(acceptance_config("expgen-ablation", g_work / "c6"), progress("c6"));
  return from_check(r, "expgen_ordering");
}

Outcome hidden_maze() {
  const auto r = run_experiment(acceptance_config("hidden-maze", g_work / "c7"), progress("c7"));
  return from_check(r, "hidden_maze_overfit");
}

// 8. Metric examples, recomputed by hand.
Outcome metric_examples() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> failed;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  const auto consts = NormalizationConstants::defaults();
  expect(std::abs(normalized_return(5.6, consts, "maze") - 0.12) < 1e-12, "normalize 5.6 -> 0.12");
  expect(normalized_return(5.0, consts, "maze") == 0.0, "normalize R_min -> 0");
  expect(normalized_return(10.0, consts, "maze") == 1.0, "normalize R_max -> 1");
  const double gap = generalization_gap(33.9, 31.3);
  expect(std::abs(gap - 2.6 / 33.9) < 1e-12 && std::round(gap * 1000.0) == 77.0, "gap 33.9/31.3 -> 7.7%");
  expect(generalization_gap(4.0, 4.0) == 0.0, "gap train = test -> 0");
  expect(generalization_gap(4.0, 5.0) < 0.0, "gap test > train negative");
  bool zero_train_rejected = false;
  try {
    generalization_gap(0.0, 1.0);
  } catch (const Error&) {
    zero_train_rejected = true;
  }
  expect(zero_train_rejected, "gap with zero train mean is an error");
  std::vector<double> eighths;
  for (int i = 1; i <= 8; ++i) eighths.push_back(i / 8.0);
  expect(interquartile_mean(eighths) == (3.0 + 4.0 + 5.0 + 6.0) / 32.0, "IQM [1..8]/8 -> 0.5625");
  expect(interquartile_mean(eighths) == 0.5625, "IQM equals 0.5625");
  for (int n_boot : {2000, 50000}) {
    const auto rep = aggregate_metrics({{"maze", {1.0, 1.0, 1.0, 1.0}}}, n_boot, 1);
    expect(rep.mean.point == 1.0 && rep.median.point == 1.0 && rep.iqm.point == 1.0 && rep.optimality_gap.point == 0.0 &&
               rep.n_bootstrap == n_boot,
           "all-ones aggregates with " + std::to_string(n_boot) + " resamples");
  }
  const std::map<std::string, std::vector<double>> x{{"maze", {0.6, 0.7, 0.8}}}, y{{"maze", {0.1, 0.2, 0.5}}};
  expect(probability_of_improvement(x, y) == 1.0, "dominating X -> 1.0");
  expect(probability_of_improvement(x, x) == 0.5, "identical X -> 0.5");
  const double secs = seconds_since(t0);
  std::string detail = fmt("gap %.6f, IQM %.6f, normalized %.6f; %.3f s (limit 1 s)", gap, interquartile_mean(eighths),
                           normalized_return(5.6, consts, "maze"), secs);
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty() && secs < 1.0, detail};
}

// 9. Every experiment kind, run twice from the same seed, on a small budget.
Outcome determinism() {
  int kinds = 0, identical = 0;
  std::string differing;
  for (auto kind : {ExperimentKind::TrainMaxEnt, ExperimentKind::TrainEnsemble, ExperimentKind::EvalExpGen,
                    ExperimentKind::AblationMixedReward, ExperimentKind::AblationRandomFallback,
                    ExperimentKind::HiddenMaze, ExperimentKind::KnnSweep, ExperimentKind::MemoryAblation}) {
    std::string tables[2];
    for (int rep = 0; rep < 2; ++rep) {
      const auto dir = g_work / "c9" / (std::string(to_string(kind)) + "-" + std::to_string(rep));
      fs::remove_all(dir);
      auto cfg = acceptance_config("determinism", dir);
      cfg.kind = kind;
      if (kind == ExperimentKind::HiddenMaze) cfg.env_kind = LevelKind::HiddenMaze;
      run_experiment(cfg);
      tables[rep] = slurp(dir / "scores.csv");
    }
    ++kinds;
    if (!tables[0].empty() && tables[0] == tables[1]) {
      ++identical;
    } else {
      differing += std::string(" ") + to_string(kind);
    }
  }
  return {identical == kinds, fmt("%d/%d experiment kinds gave byte-identical scores.csv on rerun%s%s", identical, kinds,
                                  differing.empty() ? "" : "; differing:", differing.c_str())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--work") == 0 && i + 1 < argc) {
      g_work = argv[++i];
    } else {
      selected.insert(std::atoi(argv[i]));
    }
  }
  const std::vector<Criterion> all{
      {1, "estimator oracle equivalence", estimator_oracles},
      {2, "gradient correctness", gradient_check},
      {3, "oracle completeness", oracle_completeness},
      {4, "switching semantics", switching_semantics},
      {5, "maxEnt generalization", maxent_generalization},
      {6, "ExpGen beats its ablations", expgen_ordering},
      {7, "hidden-maze overfitting", hidden_maze},
      {8, "metric examples", metric_examples},
      {9, "determinism", determinism},
  };
  fs::create_directories(g_work);
  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::printf("[%s] %d %s: %s (%.1f s)\n", o.passed ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
