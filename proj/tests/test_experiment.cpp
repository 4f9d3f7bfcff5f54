#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "expgen/error.hpp"
#include "expgen/experiment.hpp"

using namespace expgen;
namespace fs = std::filesystem;

namespace {

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::Io;  // sentinel: no error raised
}

template <typename F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("expgen-test-" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// A run small enough for a unit test: two 7x7 training mazes, tiny networks.
ExperimentConfig tiny(ExperimentKind kind, const fs::path& out) {
  ExperimentConfig c;
  c.kind = kind;
  c.size = 7;
  c.n_train_levels = 2;
  c.n_test_levels = 3;
  c.horizon = 64;
  c.hidden = {8};
  c.recurrent_width = 4;
  c.ppo.n_envs = 2;
  c.ppo.rollout_len = 32;
  c.ppo.minibatches = 2;
  c.ppo.segment_len = 16;
  c.ppo.total_steps = 128;
  c.ensemble_size = 2;
  c.consensus_k = 2;
  c.n_seeds = 2;
  c.eval_points = 0;
  c.n_bootstrap = 50;
  c.output_dir = out;
  c.timestamped = false;
  return c;
}

}  // namespace

TEST(Config, KindNamesRoundTrip) {
  for (auto k : {ExperimentKind::TrainMaxEnt, ExperimentKind::TrainEnsemble, ExperimentKind::EvalExpGen,
                 ExperimentKind::AblationMixedReward, ExperimentKind::AblationRandomFallback, ExperimentKind::HiddenMaze,
                 ExperimentKind::KnnSweep, ExperimentKind::MemoryAblation}) {
    EXPECT_EQ(parse_experiment_kind(to_string(k)), k);
  }
  EXPECT_EQ(kind_of([] { parse_experiment_kind("train"); }), ErrorKind::Config);
}

TEST(Config, DefaultsAreValid) {
  const ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.size, 9);
  EXPECT_EQ(c.n_train_levels, 8);
  EXPECT_EQ(c.n_test_levels, 32);
  EXPECT_EQ(c.ensemble_size, 10);
  EXPECT_EQ(c.consensus_k, 6);
  EXPECT_DOUBLE_EQ(c.alpha, 0.5);
}

TEST(Config, SchemaVersionOnlyGivesDefaults) {
  const auto c = parse_config("schema_version: 1\n");
  EXPECT_EQ(config_yaml(c), config_yaml(ExperimentConfig{}));
}

TEST(Config, ParsesScalarsListsAndEnums) {
  const auto c = parse_config(
      "schema_version: 1\n"
      "kind: knn-sweep\n"
      "env_kind: keydoor\n"
      "size: 11\n"
      "lr: 0.0003\n"
      "knn_norm: l0\n"
      "knn_grid: [1, 3]\n"
      "hidden: [32]\n"
      "maxent_total_steps: 50000\n"
      "fallback: random\n");
  EXPECT_EQ(c.kind, ExperimentKind::KnnSweep);
  EXPECT_EQ(c.env_kind, LevelKind::KeyDoor);
  EXPECT_EQ(c.size, 11);
  EXPECT_DOUBLE_EQ(c.ppo.lr, 0.0003);
  EXPECT_EQ(c.knn.norm, Norm::L0);
  EXPECT_EQ(c.knn_grid, (std::vector<int>{1, 3}));
  EXPECT_EQ(c.hidden, (std::vector<int>{32}));
  ASSERT_TRUE(c.maxent_total_steps);
  EXPECT_EQ(*c.maxent_total_steps, 50000);
  EXPECT_EQ(c.maxent_ppo().total_steps, 50000);
  EXPECT_EQ(c.ppo.total_steps, ExperimentConfig{}.ppo.total_steps);
  EXPECT_EQ(c.fallback, Fallback::Random);
}

TEST(Config, UnknownKeyIsAnError) {
  const auto msg = message_of([] { parse_config("schema_version: 1\nlearning_rate: 0.1\n"); });
  EXPECT_NE(msg.find("learning_rate"), std::string::npos);
  EXPECT_EQ(kind_of([] { parse_config("schema_version: 1\nlearning_rate: 0.1\n"); }), ErrorKind::Config);
}

TEST(Config, SchemaVersionIsRequiredAndChecked) {
  EXPECT_EQ(kind_of([] { parse_config("size: 9\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("schema_version: 2\n"); }), ErrorKind::Config);
}

TEST(Config, MalformedInputIsAConfigError) {
  EXPECT_EQ(kind_of([] { parse_config("schema_version: 1\nppo:\n  lr: 0.1\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("- 1\n- 2\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("schema_version: 1\nsize: nine\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("schema_version: [1\n"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/expgen.yaml"); }), ErrorKind::Config);
}

TEST(Config, OverridesReachEveryKey) {
  ExperimentConfig c;
  apply_override(c, "total_steps=5000");
  apply_override(c, "beta_grid=[0.2, 0.4]");
  apply_override(c, "knn_k=3");
  apply_override(c, "maxent_entropy_bonus=0.05");
  apply_override(c, "output_dir=/tmp/x");
  EXPECT_EQ(c.ppo.total_steps, 5000);
  EXPECT_EQ(c.beta_grid, (std::vector<double>{0.2, 0.4}));
  EXPECT_EQ(c.knn.k, 3);
  EXPECT_DOUBLE_EQ(c.maxent_ppo().entropy_bonus, 0.05);
  EXPECT_DOUBLE_EQ(c.ppo.entropy_bonus, 0.01);
  EXPECT_EQ(c.output_dir, fs::path("/tmp/x"));
  EXPECT_EQ(kind_of([&] { apply_override(c, "bogus=1"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_override(c, "size"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_override(c, "=3"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([&] { apply_override(c, "n_envs=many"); }), ErrorKind::Config);
}

TEST(Config, SnapshotRoundTripsExactly) {
  ExperimentConfig c;
  c.ppo.lr = 0.1 + 0.2;  // not representable as a short decimal
  c.alpha = 1.0 / 3.0;
  c.beta_grid = {0.1, 2.0 / 3.0};
  c.maxent_dir = "runs/a b";
  c.level_seed_base = 12345678901234ull;
  const auto yaml = config_yaml(c);
  const auto back = parse_config(yaml);
  EXPECT_EQ(back.ppo.lr, c.ppo.lr);
  EXPECT_EQ(back.alpha, c.alpha);
  EXPECT_EQ(back.beta_grid, c.beta_grid);
  EXPECT_EQ(back.maxent_dir, c.maxent_dir);
  EXPECT_EQ(back.level_seed_base, c.level_seed_base);
  EXPECT_EQ(config_yaml(back), yaml);
}

TEST(Config, KeyListMatchesSnapshot) {
  const auto keys = config_keys();
  const auto node = config_yaml(ExperimentConfig{});
  EXPECT_EQ(std::set<std::string>(keys.begin(), keys.end()).size(), keys.size());
  for (const auto& k : keys) EXPECT_NE(node.find(k + ":"), std::string::npos) << k;
}

TEST(Config, ValidationRejectsBadValues) {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    return kind_of([&] { c.validate(); });
  };
  EXPECT_EQ(bad([](auto& c) { c.size = 8; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.n_test_levels = 0; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.n_train_levels = 1'000'001; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.alpha = 0.0; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.beta_grid = {1.5}; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.ppo.rollout_len = 100; }), ErrorKind::Config);  // segment_len 32 must divide it
  EXPECT_EQ(bad([](auto& c) { c.kind = ExperimentKind::HiddenMaze; }), ErrorKind::Config);
  EXPECT_EQ(bad([](auto& c) { c.explore_view_radius = -1; }), ErrorKind::Config);
}

TEST(Levels, TrainAndTestSeedsAreDisjoint) {
  ExperimentConfig c;
  c.level_seed_base = 40;
  c.n_train_levels = 200;
  c.n_test_levels = 50;
  const auto train = train_levels(c);
  const auto test = test_levels(c);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < c.n_train_levels; ++i) {
    EXPECT_EQ(train[static_cast<std::size_t>(i)]->seed, 40u + static_cast<std::uint64_t>(i));
    seen.insert(train[static_cast<std::size_t>(i)]->seed);
  }
  for (int i = 0; i < c.n_test_levels; ++i) {
    EXPECT_EQ(test[static_cast<std::size_t>(i)]->seed, 1'000'040u + static_cast<std::uint64_t>(i));
    EXPECT_FALSE(seen.contains(test[static_cast<std::size_t>(i)]->seed));
  }
}

TEST(Summaries, PerRunMeansAndGap) {
  ScoreTable t;
  // Two runs; train means 8 and 6, test means 4 and 2.
  t.add({"maze", 0, "p", 1, 10.0, Split::Train});
  t.add({"maze", 1, "p", 1, 6.0, Split::Train});
  t.add({"maze", 0, "p", 2, 6.0, Split::Train});
  t.add({"maze", 1000000, "p", 1, 4.0, Split::Test});
  t.add({"maze", 1000000, "p", 2, 0.0, Split::Test});
  t.add({"maze", 1000001, "p", 2, 4.0, Split::Test});
  const auto s = summarize_policies(t);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_DOUBLE_EQ(s[0].train_mean, 7.0);
  EXPECT_DOUBLE_EQ(s[0].test_mean, 3.0);
  EXPECT_DOUBLE_EQ(s[0].train_std, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(s[0].test_std, std::sqrt(2.0));
  EXPECT_EQ(s[0].runs, 2u);
  EXPECT_EQ(s[0].test_rows, 3u);
  EXPECT_DOUBLE_EQ(s[0].test_row_std, std::sqrt(16.0 / 3.0));  // rows 4, 0, 4: squares 96/9 over 2
  ASSERT_TRUE(s[0].gap);
  EXPECT_DOUBLE_EQ(*s[0].gap, 4.0 / 7.0);
}

TEST(Runner, ArtifactsAreCompleteAndConsistent) {
  const auto out = scratch_dir("artifacts");
  const auto res = run_experiment(tiny(ExperimentKind::TrainMaxEnt, out));
  for (const char* f : {"config.yaml", "manifest.json", "scores.csv", "summary.json", "run-0/maxent.ckpt",
                        "run-0/maxent-curve.csv", "run-1/ppo.ckpt"}) {
    EXPECT_TRUE(fs::exists(out / f)) << f;
  }
  // The snapshot reproduces the config and shows disjoint level ranges.
  const auto snap = load_config(out / "config.yaml");
  EXPECT_EQ(config_yaml(snap), config_yaml(tiny(ExperimentKind::TrainMaxEnt, out)));
  EXPECT_LT(snap.train_seed(snap.n_train_levels - 1), snap.test_seed(0));

  const auto manifest = nlohmann::json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(manifest["train_level_seeds"][1].get<std::uint64_t>(), 2u);
  EXPECT_EQ(manifest["test_level_seeds"][0].get<std::uint64_t>(), 1'000'000u);
  for (const auto& f : manifest["files"]) EXPECT_TRUE(fs::exists(out / f.get<std::string>())) << f;

  // Every level appears once per policy, run and split.
  std::map<std::string, int> counts;
  for (const auto& r : res.scores.rows()) ++counts[r.policy_id + "/" + to_string(r.split)];
  for (const char* id : {"maxent", "maxent:intrinsic", "ppo", "ppo:intrinsic", "random", "random:intrinsic"}) {
    EXPECT_EQ(counts[std::string(id) + "/train"], 4) << id;
    EXPECT_EQ(counts[std::string(id) + "/test"], 6) << id;
  }

  // Summary numbers are recomputable from the CSV alone.
  const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
  const auto recomputed = summarize_policies(ScoreTable::read_csv(out / "scores.csv"));
  ASSERT_EQ(summary["policies"].size(), recomputed.size());
  for (std::size_t i = 0; i < recomputed.size(); ++i) {
    const auto& p = summary["policies"][i];
    EXPECT_EQ(p["policy_id"].get<std::string>(), recomputed[i].policy_id);
    EXPECT_DOUBLE_EQ(p["train_mean"].get<double>(), recomputed[i].train_mean);
    EXPECT_DOUBLE_EQ(p["test_mean"].get<double>(), recomputed[i].test_mean);
  }
  ASSERT_EQ(res.checks.size(), 1u);
  EXPECT_EQ(res.checks[0].name, "maxent_generalization");
}

TEST(Runner, SameSeedGivesIdenticalScores) {
  const auto a = scratch_dir("det-a");
  const auto b = scratch_dir("det-b");
  auto cfg = tiny(ExperimentKind::AblationRandomFallback, a);
  run_experiment(cfg);
  cfg.output_dir = b;
  run_experiment(cfg);
  const auto first = slurp(a / "scores.csv");
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, slurp(b / "scores.csv"));

  const auto c = scratch_dir("det-c");
  cfg.output_dir = c;
  cfg.master_seed = 99;
  run_experiment(cfg);
  EXPECT_NE(first, slurp(c / "scores.csv"));
}

TEST(Runner, TimestampedDirectoriesDoNotCollide) {
  const auto out = scratch_dir("stamped");
  auto cfg = tiny(ExperimentKind::TrainEnsemble, out);
  cfg.timestamped = true;
  cfg.n_seeds = 1;
  const auto r1 = run_experiment(cfg);
  const auto r2 = run_experiment(cfg);
  EXPECT_NE(r1.dir, r2.dir);
  EXPECT_EQ(r1.dir.parent_path(), out);
  EXPECT_EQ(r1.dir.filename().string().rfind("train-ensemble-", 0), 0u);
}

TEST(Runner, ReusesTrainedPoliciesAndRejectsMissingOnes) {
  const auto ens = scratch_dir("reuse-ens");
  const auto me = scratch_dir("reuse-me");
  run_experiment(tiny(ExperimentKind::TrainEnsemble, ens));
  auto m = tiny(ExperimentKind::TrainMaxEnt, me);
  m.compare_extrinsic = false;
  run_experiment(m);

  const auto out = scratch_dir("reuse-eval");
  auto cfg = tiny(ExperimentKind::EvalExpGen, out);
  cfg.ensemble_dir = ens;
  cfg.maxent_dir = me;
  const auto res = run_experiment(cfg);
  EXPECT_FALSE(fs::exists(out / "run-0" / "member-0.ckpt"));
  EXPECT_FALSE(fs::exists(out / "run-0" / "maxent.ckpt"));
  std::set<std::string> ids;
  for (const auto& r : res.scores.rows()) ids.insert(r.policy_id);
  EXPECT_EQ(ids, (std::set<std::string>{"expgen-maxent", "ppo"}));

  auto missing = cfg;
  missing.output_dir = scratch_dir("reuse-missing");
  missing.maxent_dir = scratch_dir("empty-maxent");
  EXPECT_EQ(kind_of([&] { run_experiment(missing); }), ErrorKind::Config);
  missing.maxent_dir = "/nonexistent/maxent";
  EXPECT_EQ(kind_of([&] { run_experiment(missing); }), ErrorKind::Config);
}

TEST(Report, MergesRunsIntoMeanAndStd) {
  const auto root = scratch_dir("report");
  auto cfg = tiny(ExperimentKind::TrainEnsemble, root / "a");
  cfg.n_seeds = 1;
  run_experiment(cfg);
  cfg.output_dir = root / "b";
  cfg.master_seed = 2;
  run_experiment(cfg);

  const auto text = export_report(root, 50);
  EXPECT_NE(text.find("member-0"), std::string::npos);
  for (const char* f : {"report.json", "report.csv", "summary.txt"}) EXPECT_TRUE(fs::exists(root / f)) << f;
  const auto report = nlohmann::json::parse(slurp(root / "report.json"));
  EXPECT_EQ(report["tables"].size(), 2u);

  ScoreTable merged = ScoreTable::read_csv(root / "a" / "scores.csv");
  merged.merge(ScoreTable::read_csv(root / "b" / "scores.csv"));
  const auto expected = summarize_policies(merged);
  for (const auto& p : report["policies"]) {
    const auto it = std::find_if(expected.begin(), expected.end(),
                                 [&](const auto& e) { return e.policy_id == p["policy_id"].get<std::string>(); });
    ASSERT_NE(it, expected.end());
    EXPECT_EQ(p["runs"].get<std::size_t>(), 2u);
    EXPECT_DOUBLE_EQ(p["test_mean"].get<double>(), it->test_mean);
    EXPECT_DOUBLE_EQ(p["test_std"].get<double>(), it->test_std);
  }
}

TEST(Report, CorruptTableIsNamed) {
  const auto root = scratch_dir("report-corrupt");
  auto cfg = tiny(ExperimentKind::TrainEnsemble, root / "good");
  cfg.n_seeds = 1;
  run_experiment(cfg);
  fs::create_directories(root / "bad");
  std::ofstream(root / "bad" / "scores.csv") << "env_kind,level_seed,policy_id,run_seed,return,split\nmaze,1,p,1,oops,test\n";
  const auto msg = message_of([&] { export_report(root); });
  EXPECT_NE(msg.find((root / "bad" / "scores.csv").string()), std::string::npos) << msg;
  EXPECT_EQ(kind_of([&] { export_report(root); }), ErrorKind::Io);
}

TEST(Report, EmptyDirectoryIsAnError) {
  const auto root = scratch_dir("report-empty");
  EXPECT_EQ(kind_of([&] { export_report(root); }), ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([&] { export_report(root / "missing"); }), ErrorKind::Config);
}
