// Command-line front end for the experiment runner.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error,
// 3 numeric failure, 4 a directional check of the experiment failed.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "expgen/error.hpp"
#include "expgen/experiment.hpp"
#include "expgen/oracle.hpp"

using namespace expgen;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfigError = 2, kNumericError = 3, kCheckFailed = 4 };

struct RunArgs {
  std::string config;
  std::vector<std::string> overrides;
  bool check = false;
  bool quiet = false;
};

void add_run_options(CLI::App* app, RunArgs& args) {
  app->add_option("-c,--config", args.config, "YAML config file (defaults apply when omitted)")->check(CLI::ExistingFile);
  app->add_option("-s,--set", args.overrides, "Override a config key, e.g. --set total_steps=200000")->take_all();
  app->add_flag("--check", args.check, "Exit with code 4 when the experiment's directional check fails");
  app->add_flag("-q,--quiet", args.quiet, "Only print the summary");
}

int run(ExperimentKind kind, const RunArgs& args) {
  ExperimentConfig cfg = args.config.empty() ? ExperimentConfig{} : load_config(args.config);
  cfg.kind = kind;
  for (const auto& o : args.overrides) apply_override(cfg, o);
  cfg.kind = kind;
  LogFn log;
  if (!args.quiet) log = [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); };
  const auto result = run_experiment(cfg, log);
  std::printf("%s\n", result.summary_json.c_str());
  std::printf("artifacts: %s\n", result.dir.string().c_str());
  bool ok = true;
  for (const auto& c : result.checks) {
    std::printf("[%s] %s: %s\n", c.passed ? "PASS" : "FAIL", c.name.c_str(), c.detail.c_str());
    ok = ok && c.passed;
  }
  return args.check && !ok ? kCheckFailed : kOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Config:
    case ErrorKind::UnsupportedLevel:
      return kConfigError;
    case ErrorKind::Numeric:
      return kNumericError;
    default:
      return kFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exploration-for-generalization experiments on procedurally generated gridworlds"};
  app.require_subcommand(1);

  std::string kind_name = "maze";
  int size = 9;
  std::uint64_t seed_base = 0;
  int count = 8;
  std::string out_dir = "levels";
  auto* gen = app.add_subcommand("generate-levels", "Write ASCII renderings of a seed range of levels");
  gen->add_option("--kind", kind_name, "maze, keydoor or hidden-maze");
  gen->add_option("--size", size, "Grid side length (odd)");
  gen->add_option("--seed-base", seed_base, "First level seed");
  gen->add_option("--count", count, "Number of levels");
  gen->add_option("-o,--out", out_dir, "Output directory");

  std::uint64_t render_seed = 0;
  bool with_oracle = false;
  auto* render = app.add_subcommand("render-level", "Print one level as ASCII");
  render->add_option("--kind", kind_name, "maze, keydoor or hidden-maze");
  render->add_option("--size", size, "Grid side length (odd)");
  render->add_option("--seed", render_seed, "Level seed");
  render->add_flag("--oracle", with_oracle, "Also print the oracle coverage score");

  RunArgs maxent_args, ensemble_args, eval_args, ablate_args;
  add_run_options(app.add_subcommand("train-maxent", "Train maxEnt exploration policies (and an extrinsic baseline)"),
                  maxent_args);
  add_run_options(app.add_subcommand("train-ensemble", "Train an ensemble of extrinsic-reward policies"), ensemble_args);
  add_run_options(app.add_subcommand("eval-expgen", "Evaluate the ExpGen controller on held-out levels"), eval_args);
  auto* ablate = app.add_subcommand("ablate", "Run an ablation or sweep");
  std::string which;
  ablate->add_option("which", which, "mixed-reward, random-fallback, hidden-maze, knn-sweep or memory")
      ->required()
      ->check(CLI::IsMember({"mixed-reward", "random-fallback", "hidden-maze", "knn-sweep", "memory"}));
  add_run_options(ablate, ablate_args);

  std::string report_dir;
  int n_bootstrap = 2000;
  auto* report = app.add_subcommand("report", "Merge score tables under a directory and compute aggregate metrics");
  report->add_option("dir", report_dir, "Artifact directory")->required();
  report->add_option("--bootstrap", n_bootstrap, "Bootstrap resamples");

  auto* keys = app.add_subcommand("config-keys", "List every config key with its default value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const auto kind = parse_level_kind(kind_name);
      fs::create_directories(out_dir);
      for (int i = 0; i < count; ++i) {
        const auto seed = seed_base + static_cast<std::uint64_t>(i);
        const auto level = generate_level(seed, kind, size, size);
        std::ofstream(fs::path(out_dir) / ("level-" + std::to_string(seed) + ".txt")) << level.to_ascii();
      }
      std::printf("wrote %d levels to %s\n", count, out_dir.c_str());
      return kOk;
    }
    if (render->parsed()) {
      const auto level = generate_level(render_seed, parse_level_kind(kind_name), size, size);
      std::printf("%s", level.to_ascii().c_str());
      if (with_oracle) std::printf("oracle score: %g\n", oracle_score(level));
      return kOk;
    }
    if (report->parsed()) {
      std::printf("%s", export_report(report_dir, n_bootstrap).c_str());
      return kOk;
    }
    if (keys->parsed()) {
      std::printf("%s", config_yaml(ExperimentConfig{}).c_str());
      return kOk;
    }
    for (auto* sub : app.get_subcommands()) {
      const std::string name = sub->get_name();
      if (name == "train-maxent") return run(ExperimentKind::TrainMaxEnt, maxent_args);
      if (name == "train-ensemble") return run(ExperimentKind::TrainEnsemble, ensemble_args);
      if (name == "eval-expgen") return run(ExperimentKind::EvalExpGen, eval_args);
      if (name == "ablate") {
        const ExperimentKind kind = which == "mixed-reward"      ? ExperimentKind::AblationMixedReward
                                    : which == "random-fallback" ? ExperimentKind::AblationRandomFallback
                                    : which == "hidden-maze"     ? ExperimentKind::HiddenMaze
                                    : which == "knn-sweep"       ? ExperimentKind::KnnSweep
                                                                 : ExperimentKind::MemoryAblation;
        return run(kind, ablate_args);
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}
