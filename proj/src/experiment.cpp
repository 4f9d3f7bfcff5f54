#include "expgen/experiment.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "expgen/error.hpp"
#include "expgen/oracle.hpp"
#include "json.hpp"

namespace expgen {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::vector<std::pair<ExperimentKind, const char*>> kKindNames{
    {ExperimentKind::TrainMaxEnt, "train-maxent"},
    {ExperimentKind::TrainEnsemble, "train-ensemble"},
    {ExperimentKind::EvalExpGen, "eval-expgen"},
    {ExperimentKind::AblationMixedReward, "ablation-mixed-reward"},
    {ExperimentKind::AblationRandomFallback, "ablation-random-fallback"},
    {ExperimentKind::HiddenMaze, "hidden-maze"},
    {ExperimentKind::KnnSweep, "knn-sweep"},
    {ExperimentKind::MemoryAblation, "memory-ablation"},
};

}  // namespace

const char* to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames) {
    if (name == n) return k;
  }
  throw Error(ErrorKind::Config, "unknown experiment kind '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& why) {
    if (!ok) throw Error(ErrorKind::Config, why);
  };
  require(schema_version == kConfigSchemaVersion, "schema_version must be " + std::to_string(kConfigSchemaVersion));
  require(size >= 5 && size % 2 == 1, "size must be an odd number >= 5");
  require(n_train_levels >= 1, "n_train_levels must be >= 1");
  require(n_test_levels >= 1, "n_test_levels must be >= 1");
  require(static_cast<std::uint64_t>(n_train_levels) <= kTestSeedOffset,
          "train seed range overlaps the test range (n_train_levels > 1000000)");
  require(episodes_per_level >= 1, "episodes_per_level must be >= 1");
  require(horizon >= 1, "horizon must be >= 1");
  require(n_seeds >= 1, "n_seeds must be >= 1");
  require(eval_points >= 0, "eval_points must be >= 0");
  require(n_bootstrap >= 1, "n_bootstrap must be >= 1");
  require(ensemble_size >= 1, "ensemble_size must be >= 1");
  require(recurrent_width >= 1, "recurrent_width must be >= 1");
  require(!beta_grid.empty() && !knn_grid.empty(), "grids must not be empty");
  for (double b : beta_grid) require(b >= 0.0 && b <= 1.0, "beta_grid values must lie in [0, 1]");
  require(ablation_gamma >= 0.0 && ablation_gamma <= 1.0, "ablation_gamma must lie in [0, 1]");
  for (int k : knn_grid) require(k >= 1, "knn_grid values must be >= 1");
  ppo.validate(false);
  maxent_ppo().validate(true);
  knn.validate();
  require(view_radius >= 0 && explore_view_radius >= 0, "view radii must be >= 0");
  Architecture arch;
  arch.input_dim = observation_size(size, size);
  arch.hidden = hidden;
  arch.validate();
  require(consensus_k >= 1, "consensus_k must be >= 1");
  require(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
  if (kind == ExperimentKind::HiddenMaze) require(env_kind == LevelKind::HiddenMaze, "hidden-maze experiments need env_kind: hidden-maze");
}

PpoConfig ExperimentConfig::maxent_ppo() const {
  PpoConfig p = ppo;
  if (maxent_total_steps) p.total_steps = *maxent_total_steps;
  if (maxent_entropy_bonus) p.entropy_bonus = *maxent_entropy_bonus;
  return p;
}

// ---------------------------------------------------------------------------
// Config file

namespace {

// Shortest text that parses back to the same double.
std::string shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <typename T>
void emit_value(YAML::Emitter& e, const T& v) {
  if constexpr (std::is_same_v<T, double>) {
    e << shortest(v);
  } else {
    e << v;
  }
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, const YAML::Node&)> set;
  std::function<void(const ExperimentConfig&, YAML::Emitter&)> emit;
};

template <typename T>
Field plain(const std::string& key, T ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const YAML::Node& n) { c.*member = n.as<T>(); },
          [member](const ExperimentConfig& c, YAML::Emitter& e) { emit_value(e, c.*member); }};
}

template <typename T>
Field ppo_field(const std::string& key, T PpoConfig::*member) {
  return {key, [member](ExperimentConfig& c, const YAML::Node& n) { c.ppo.*member = n.as<T>(); },
          [member](const ExperimentConfig& c, YAML::Emitter& e) { emit_value(e, c.ppo.*member); }};
}

template <typename T>
Field optional_field(const std::string& key, std::optional<T> ExperimentConfig::*member) {
  return {key,
          [member](ExperimentConfig& c, const YAML::Node& n) {
            if (n.IsNull()) {
              (c.*member).reset();
            } else {
              c.*member = n.as<T>();
            }
          },
          [member](const ExperimentConfig& c, YAML::Emitter& e) {
            if (c.*member) {
              emit_value(e, *(c.*member));
            } else {
              e << YAML::Null;
            }
          }};
}

Field path_field(const std::string& key, std::optional<fs::path> ExperimentConfig::*member) {
  return {key,
          [member](ExperimentConfig& c, const YAML::Node& n) {
            if (n.IsNull() || n.as<std::string>().empty()) {
              (c.*member).reset();
            } else {
              c.*member = fs::path(n.as<std::string>());
            }
          },
          [member](const ExperimentConfig& c, YAML::Emitter& e) {
            if (c.*member) {
              e << (c.*member)->generic_string();
            } else {
              e << YAML::Null;
            }
          }};
}

template <typename T>
Field enum_field(const std::string& key, T ExperimentConfig::*member, T (*parse)(std::string_view),
                 const char* (*name)(T)) {
  return {key, [=](ExperimentConfig& c, const YAML::Node& n) { c.*member = parse(n.as<std::string>()); },
          [=](const ExperimentConfig& c, YAML::Emitter& e) { e << name(c.*member); }};
}

template <typename T>
Field list_field(const std::string& key, std::vector<T> ExperimentConfig::*member) {
  return {key, [member](ExperimentConfig& c, const YAML::Node& n) { c.*member = n.as<std::vector<T>>(); },
          [member](const ExperimentConfig& c, YAML::Emitter& e) {
            e << YAML::Flow << YAML::BeginSeq;
            for (const auto& v : c.*member) emit_value(e, v);
            e << YAML::EndSeq;
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = [] {
    std::vector<Field> f;
    f.push_back(plain("schema_version", &ExperimentConfig::schema_version));
    f.push_back(enum_field("kind", &ExperimentConfig::kind, &parse_experiment_kind, &to_string));
    f.push_back(enum_field("env_kind", &ExperimentConfig::env_kind, &parse_level_kind, &to_string));
    f.push_back(plain("size", &ExperimentConfig::size));
    f.push_back(plain("n_train_levels", &ExperimentConfig::n_train_levels));
    f.push_back(plain("level_seed_base", &ExperimentConfig::level_seed_base));
    f.push_back(plain("n_test_levels", &ExperimentConfig::n_test_levels));
    f.push_back(plain("episodes_per_level", &ExperimentConfig::episodes_per_level));
    f.push_back(plain("horizon", &ExperimentConfig::horizon));
    f.push_back(ppo_field("gamma", &PpoConfig::gamma));
    f.push_back(ppo_field("lambda", &PpoConfig::lambda));
    f.push_back(ppo_field("rollout_len", &PpoConfig::rollout_len));
    f.push_back(ppo_field("epochs", &PpoConfig::epochs));
    f.push_back(ppo_field("minibatches", &PpoConfig::minibatches));
    f.push_back(ppo_field("clip", &PpoConfig::clip));
    f.push_back(ppo_field("entropy_bonus", &PpoConfig::entropy_bonus));
    f.push_back(ppo_field("lr", &PpoConfig::lr));
    f.push_back(ppo_field("n_envs", &PpoConfig::n_envs));
    f.push_back(ppo_field("reward_norm", &PpoConfig::reward_norm));
    f.push_back(ppo_field("total_steps", &PpoConfig::total_steps));
    f.push_back(ppo_field("segment_len", &PpoConfig::segment_len));
    f.push_back(ppo_field("value_coef", &PpoConfig::value_coef));
    f.push_back(ppo_field("max_grad_norm", &PpoConfig::max_grad_norm));
    f.push_back(optional_field("maxent_total_steps", &ExperimentConfig::maxent_total_steps));
    f.push_back(optional_field("maxent_entropy_bonus", &ExperimentConfig::maxent_entropy_bonus));
    f.push_back({"knn_k", [](ExperimentConfig& c, const YAML::Node& n) { c.knn.k = n.as<int>(); },
                 [](const ExperimentConfig& c, YAML::Emitter& e) { e << c.knn.k; }});
    f.push_back({"knn_norm", [](ExperimentConfig& c, const YAML::Node& n) { c.knn.norm = parse_norm(n.as<std::string>()); },
                 [](const ExperimentConfig& c, YAML::Emitter& e) { e << to_string(c.knn.norm); }});
    f.push_back({"knn_epsilon", [](ExperimentConfig& c, const YAML::Node& n) { c.knn.epsilon = n.as<double>(); },
                 [](const ExperimentConfig& c, YAML::Emitter& e) { emit_value(e, c.knn.epsilon); }});
    f.push_back({"pool_kernel", [](ExperimentConfig& c, const YAML::Node& n) { c.knn.pool_kernel = n.as<int>(); },
                 [](const ExperimentConfig& c, YAML::Emitter& e) { e << c.knn.pool_kernel; }});
    f.push_back(list_field("hidden", &ExperimentConfig::hidden));
    f.push_back(plain("recurrent_width", &ExperimentConfig::recurrent_width));
    f.push_back(plain("view_radius", &ExperimentConfig::view_radius));
    f.push_back(plain("explore_view_radius", &ExperimentConfig::explore_view_radius));
    f.push_back(plain("ensemble_size", &ExperimentConfig::ensemble_size));
    f.push_back(plain("consensus_k", &ExperimentConfig::consensus_k));
    f.push_back(plain("alpha", &ExperimentConfig::alpha));
    f.push_back(enum_field("fallback", &ExperimentConfig::fallback, &parse_fallback, &to_string));
    f.push_back(list_field("beta_grid", &ExperimentConfig::beta_grid));
    f.push_back(plain("ablation_gamma", &ExperimentConfig::ablation_gamma));
    f.push_back(list_field("knn_grid", &ExperimentConfig::knn_grid));
    f.push_back(plain("compare_extrinsic", &ExperimentConfig::compare_extrinsic));
    f.push_back(path_field("ensemble_dir", &ExperimentConfig::ensemble_dir));
    f.push_back(path_field("maxent_dir", &ExperimentConfig::maxent_dir));
    f.push_back(plain("master_seed", &ExperimentConfig::master_seed));
    f.push_back(plain("n_seeds", &ExperimentConfig::n_seeds));
    f.push_back(plain("eval_points", &ExperimentConfig::eval_points));
    f.push_back(plain("n_bootstrap", &ExperimentConfig::n_bootstrap));
    f.push_back({"output_dir",
                 [](ExperimentConfig& c, const YAML::Node& n) { c.output_dir = n.as<std::string>(); },
                 [](const ExperimentConfig& c, YAML::Emitter& e) { e << c.output_dir.generic_string(); }});
    f.push_back(plain("timestamped", &ExperimentConfig::timestamped));
    return f;
  }();
  return all;
}

void set_field(ExperimentConfig& cfg, const std::string& key, const YAML::Node& value) {
  for (const auto& f : fields()) {
    if (f.key != key) continue;
    try {
      f.set(cfg, value);
    } catch (const YAML::Exception& e) {
      throw Error(ErrorKind::Config, "bad value for '" + key + "': " + e.msg);
    }
    return;
  }
  throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

ExperimentConfig parse_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Config, "config is not valid YAML: " + e.msg);
  }
  if (!root.IsMap()) throw Error(ErrorKind::Config, "config must be a mapping of key: value pairs");
  if (!root["schema_version"]) throw Error(ErrorKind::Config, "config lacks schema_version");
  ExperimentConfig cfg;
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (kv.second.IsMap()) throw Error(ErrorKind::Config, "nested sections are not supported ('" + key + "')");
    set_field(cfg, key, kv.second);
  }
  if (cfg.schema_version != kConfigSchemaVersion) {
    throw Error(ErrorKind::Config, "unsupported schema_version " + std::to_string(cfg.schema_version));
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Config, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error(ErrorKind::Config, "override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  YAML::Node value;
  try {
    value = YAML::Load(assignment.substr(eq + 1));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::Config, "bad value for '" + key + "': " + e.msg);
  }
  set_field(cfg, key, value);
}

std::string config_yaml(const ExperimentConfig& cfg) {
  YAML::Emitter e;
  e << YAML::BeginMap;
  for (const auto& f : fields()) {
    e << YAML::Key << f.key << YAML::Value;
    f.emit(cfg, e);
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Levels

std::vector<std::shared_ptr<const LevelSpec>> train_levels(const ExperimentConfig& cfg) {
  std::vector<std::shared_ptr<const LevelSpec>> out;
  for (int i = 0; i < cfg.n_train_levels; ++i) {
    out.push_back(std::make_shared<const LevelSpec>(generate_level(cfg.train_seed(i), cfg.env_kind, cfg.size, cfg.size)));
  }
  return out;
}

std::vector<std::shared_ptr<const LevelSpec>> test_levels(const ExperimentConfig& cfg) {
  std::vector<std::shared_ptr<const LevelSpec>> out;
  for (int i = 0; i < cfg.n_test_levels; ++i) {
    out.push_back(std::make_shared<const LevelSpec>(generate_level(cfg.test_seed(i), cfg.env_kind, cfg.size, cfg.size)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Summaries

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<PolicySummary> summarize_policies(const ScoreTable& table) {
  // policy -> split -> run -> returns
  std::map<std::string, std::map<Split, std::map<std::uint64_t, std::vector<double>>>> acc;
  std::vector<std::string> order;
  for (const auto& r : table.rows()) {
    if (!acc.contains(r.policy_id)) order.push_back(r.policy_id);
    acc[r.policy_id][r.split][r.run_seed].push_back(r.ret);
  }
  std::vector<PolicySummary> out;
  for (const auto& id : order) {
    PolicySummary s;
    s.policy_id = id;
    auto per_run = [&](Split split) {
      std::vector<double> means;
      for (const auto& [run, v] : acc[id][split]) means.push_back(mean_of(v));
      return means;
    };
    const auto train = per_run(Split::Train);
    const auto test = per_run(Split::Test);
    s.train_mean = mean_of(train);
    s.test_mean = mean_of(test);
    s.train_std = std_of(train);
    s.test_std = std_of(test);
    s.runs = std::max(train.size(), test.size());
    std::vector<double> rows;
    for (const auto& [run, v] : acc[id][Split::Test]) rows.insert(rows.end(), v.begin(), v.end());
    s.test_rows = rows.size();
    s.test_row_std = std_of(rows);
    if (!train.empty() && !test.empty() && s.train_mean != 0.0) s.gap = generalization_gap(s.train_mean, s.test_mean);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

json policy_json(const PolicySummary& s) {
  json j;
  j["policy_id"] = s.policy_id;
  j["runs"] = s.runs;
  j["train_mean"] = s.train_mean;
  j["train_std"] = s.train_std;
  j["test_mean"] = s.test_mean;
  j["test_std"] = s.test_std;
  j["test_rows"] = s.test_rows;
  j["test_row_std"] = s.test_row_std;
  j["gap"] = s.gap ? json(*s.gap) : json(nullptr);
  return j;
}

json interval_json(const Interval& i) { return {{"point", i.point}, {"ci_low", i.lower}, {"ci_high", i.upper}}; }

// Normalized-score aggregates on the test split for every extrinsic policy
// (policy ids without a ':' suffix).
json aggregates_json(const ScoreTable& table, int n_bootstrap, std::uint64_t seed) {
  json out = json::object();
  const auto consts = NormalizationConstants::defaults();
  std::vector<std::string> ids;
  for (const auto& r : table.rows()) {
    if (r.policy_id.find(':') == std::string::npos && std::find(ids.begin(), ids.end(), r.policy_id) == ids.end()) {
      ids.push_back(r.policy_id);
    }
  }
  for (const auto& id : ids) {
    const auto scores = run_scores(table, consts, Split::Test, id);
    std::size_t n = 0;
    for (const auto& [env, v] : scores) n += v.size();
    if (n < 2) continue;
    const auto rep = aggregate_metrics(scores, n_bootstrap, seed);
    out[id] = {{"mean", interval_json(rep.mean)},
               {"median", interval_json(rep.median)},
               {"iqm", interval_json(rep.iqm)},
               {"optimality_gap", interval_json(rep.optimality_gap)},
               {"runs", rep.runs}};
  }
  return out;
}

const PolicySummary* find_policy(const std::vector<PolicySummary>& all, const std::string& id) {
  for (const auto& s : all) {
    if (s.policy_id == id) return &s;
  }
  return nullptr;
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::vector<Check> experiment_checks(ExperimentKind kind, const std::vector<PolicySummary>& ps) {
  std::vector<Check> checks;
  auto need = [&](const std::string& id) -> const PolicySummary& {
    const auto* p = find_policy(ps, id);
    if (!p) throw Error(ErrorKind::EmptyInput, "no scores for policy " + id);
    return *p;
  };
  if (kind == ExperimentKind::TrainMaxEnt && find_policy(ps, "ppo")) {
    const auto& me = need("maxent:intrinsic");
    const auto& ppo = need("ppo");
    Check c{"maxent_generalization", false, ""};
    if (me.gap && ppo.gap) {
      c.passed = *me.gap < 0.15 && *me.gap < 0.5 * *ppo.gap;
      c.detail = "maxEnt intrinsic gap " + fmt(*me.gap) + " (train " + fmt(me.train_mean) + ", test " +
                 fmt(me.test_mean) + "); extrinsic PPO gap " + fmt(*ppo.gap) + "; need < 0.15 and < " +
                 fmt(0.5 * *ppo.gap);
    } else {
      c.detail = "gap undefined (zero train return)";
    }
    checks.push_back(c);
  }
  if (kind == ExperimentKind::AblationRandomFallback) {
    const auto& a = need("expgen-maxent");
    const auto& b = need("expgen-random");
    const auto& p = need("ppo");
    const double se = std::sqrt(a.test_row_std * a.test_row_std / static_cast<double>(a.test_rows) +
                                b.test_row_std * b.test_row_std / static_cast<double>(b.test_rows));
    Check c{"expgen_ordering", a.test_mean - b.test_mean > se && b.test_mean > p.test_mean, ""};
    c.detail = "test return ExpGen(maxEnt) " + fmt(a.test_mean) + ", ExpGen(random) " + fmt(b.test_mean) + ", PPO " +
               fmt(p.test_mean) + "; first margin " + fmt(a.test_mean - b.test_mean) + " vs pooled SE " + fmt(se);
    checks.push_back(c);
  }
  if (kind == ExperimentKind::HiddenMaze) {
    const auto& p = need("ppo-recurrent");
    const auto& r = need("random");
    const double train_success = p.train_mean / kGoalReward;
    const double test_success = p.test_mean / kGoalReward;
    const double random_success = r.test_mean / kGoalReward;
    Check c{"hidden_maze_overfit", train_success >= 0.7 && test_success <= 2.0 * random_success, ""};
    c.detail = "train success " + fmt(train_success) + " (need >= 0.7); test success " + fmt(test_success) +
               " vs random " + fmt(random_success) + " (need <= " + fmt(2.0 * random_success) + ")";
    checks.push_back(c);
  }
  return checks;
}

// ---------------------------------------------------------------------------
// Running

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string utc_stamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << text;
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

class Runner {
 public:
  Runner(const ExperimentConfig& cfg, const LogFn& log) : cfg_(cfg), log_(log) {
    train_ = train_levels(cfg);
    test_ = test_levels(cfg);
    eval_.mode = default_mode(cfg.env_kind);
    eval_.horizon = cfg.horizon;
    eval_.episodes_per_level = cfg.episodes_per_level;
    eval_.knn = cfg.knn;
  }

  ExperimentResult run() {
    make_dir();
    write_text(dir_ / "config.yaml", config_yaml(cfg_));
    files_.push_back("config.yaml");
    for (int r = 0; r < cfg_.n_seeds; ++r) run_once(r);
    table_.write_csv(dir_ / "scores.csv");
    files_.push_back("scores.csv");

    ExperimentResult result;
    result.dir = dir_;
    const auto policies = summarize_policies(table_);
    result.checks = experiment_checks(cfg_.kind, policies);
    json summary;
    summary["kind"] = to_string(cfg_.kind);
    summary["env_kind"] = to_string(cfg_.env_kind);
    summary["runs"] = cfg_.n_seeds;
    summary["policies"] = json::array();
    for (const auto& p : policies) summary["policies"].push_back(policy_json(p));
    summary["aggregates"] = aggregates_json(table_, cfg_.n_bootstrap, cfg_.master_seed);
    summary["checks"] = json::array();
    for (const auto& c : result.checks) summary["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    result.summary_json = summary.dump(2);
    write_text(dir_ / "summary.json", result.summary_json + "\n");
    files_.push_back("summary.json");
    write_manifest();
    result.scores = std::move(table_);
    return result;
  }

 private:
  void log(const std::string& s) const {
    if (log_) log_(s);
  }

  void make_dir() {
    if (!cfg_.timestamped) {
      dir_ = cfg_.output_dir;
    } else {
      const auto base = cfg_.output_dir / (std::string(to_string(cfg_.kind)) + "-" + utc_stamp());
      dir_ = base;
      for (int i = 2; fs::exists(dir_); ++i) dir_ = base.string() + "-" + std::to_string(i);
    }
    fs::create_directories(dir_);
    created_ = utc_stamp();
  }

  void write_manifest() const {
    json m;
    m["schema_version"] = kConfigSchemaVersion;
    m["kind"] = to_string(cfg_.kind);
    m["created_utc"] = created_;
    m["master_seed"] = cfg_.master_seed;
    m["runs"] = cfg_.n_seeds;
    m["train_level_seeds"] = {cfg_.train_seed(0), cfg_.train_seed(cfg_.n_train_levels)};
    m["test_level_seeds"] = {cfg_.test_seed(0), cfg_.test_seed(cfg_.n_test_levels)};
    m["files"] = files_;
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

  std::uint64_t run_seed(int r) const { return cfg_.master_seed + static_cast<std::uint64_t>(r); }

  Architecture arch(int recurrent_width, int view_radius) const {
    Architecture a;
    a.view_radius = view_radius;
    a.input_dim = observation_size(cfg_.size, cfg_.size, view_radius);
    a.hidden = cfg_.hidden;
    a.recurrent_width = recurrent_width;
    return a;
  }

  PolicyParams<float> train_policy(const fs::path& run_dir, const std::string& name, const PpoConfig& ppo,
                                   const RewardSource& src, const Architecture& a, std::uint64_t seed) {
    TrainOptions opt;
    opt.mode = eval_.mode;
    opt.horizon = cfg_.horizon;
    opt.test_levels = test_;
    opt.eval_interval = cfg_.eval_points > 0 ? std::max<std::int64_t>(1, ppo.total_steps / cfg_.eval_points) : 0;
    const auto rel = fs::relative(run_dir, dir_).generic_string() + "/" + name;
    opt.on_progress = [&](const CurveRow& row) {
      if (row.test_return_mean) {
        log(rel + " step " + std::to_string(row.step) + " train " + fmt(row.train_return_mean) + " test " +
            fmt(*row.test_return_mean) + (src.needs_intrinsic() ? " intrinsic " + fmt(row.intrinsic_return_mean) : ""));
      }
    };
    log("training " + rel + " (" + to_string(src.mode) + ", " + std::to_string(ppo.total_steps) + " steps)");
    auto res = train(train_, ppo, src, a, seed, opt);
    save_checkpoint(run_dir / (name + ".ckpt"), res.params, &res.optimizer);
    write_curve_csv(run_dir / (name + "-curve.csv"), res.curve);
    files_.push_back(rel + ".ckpt");
    files_.push_back(rel + "-curve.csv");
    return std::move(res.params);
  }

  fs::path run_dir(int r) {
    const auto d = dir_ / ("run-" + std::to_string(r));
    fs::create_directories(d);
    return d;
  }

  std::uint64_t eval_seed(int r, const std::string& tag) const { return derive_seed(run_seed(r), name_hash(tag)); }

  void add(const std::string& policy, int r, Split split, const std::vector<EpisodeStats>& stats, bool intrinsic) {
    const auto per = static_cast<std::size_t>(cfg_.episodes_per_level);
    for (std::size_t i = 0; i < stats.size(); i += per) {
      double sum = 0.0;
      for (std::size_t e = i; e < i + per; ++e) sum += intrinsic ? stats[e].intrinsic_return : stats[e].extrinsic_return;
      table_.add({to_string(cfg_.env_kind), stats[i].level_seed, policy, run_seed(r), sum / static_cast<double>(per), split});
    }
  }

  void evaluate(const PolicyParams<float>& params, const std::string& policy, int r, bool with_intrinsic) {
    for (Split split : {Split::Train, Split::Test}) {
      const auto& levels = split == Split::Train ? train_ : test_;
      const auto stats = evaluate_policy(params, levels, eval_, eval_seed(r, policy + "/" + to_string(split)));
      add(policy, r, split, stats, false);
      if (with_intrinsic) add(policy + ":intrinsic", r, split, stats, true);
    }
  }

  void evaluate_random_baseline(int r, bool with_intrinsic) {
    for (Split split : {Split::Train, Split::Test}) {
      const auto& levels = split == Split::Train ? train_ : test_;
      const auto stats = evaluate_random(levels, eval_, eval_seed(r, std::string("random/") + to_string(split)));
      add("random", r, split, stats, false);
      if (with_intrinsic) add("random:intrinsic", r, split, stats, true);
    }
  }

  void evaluate_bundle(const EnsembleBundle& bundle, const std::string& policy, int r) {
    for (Split split : {Split::Train, Split::Test}) {
      const auto& levels = split == Split::Train ? train_ : test_;
      const auto eps = evaluate_expgen(bundle, levels, eval_, eval_seed(r, policy + "/" + to_string(split)));
      std::vector<EpisodeStats> stats;
      std::size_t explore = 0, total = 0;
      for (const auto& e : eps) {
        stats.push_back(e.stats);
        explore += static_cast<std::size_t>(e.explore_steps);
        total += static_cast<std::size_t>(e.stats.length);
      }
      add(policy, r, split, stats, false);
      log(policy + " run " + std::to_string(r) + " " + to_string(split) + ": explore fraction " +
          fmt(static_cast<double>(explore) / static_cast<double>(std::max<std::size_t>(total, 1))));
    }
  }

  PolicyParams<float> maxent_policy(int r, const fs::path& rd, std::optional<int> knn_k = std::nullopt,
                                    std::optional<int> width = std::nullopt, const std::string& name = "maxent") {
    if (cfg_.maxent_dir && !knn_k && !width) {
      const auto path = *cfg_.maxent_dir / ("run-" + std::to_string(r)) / "maxent.ckpt";
      if (!fs::exists(path)) throw Error(ErrorKind::Config, "missing checkpoint " + path.string());
      return load_checkpoint<float>(path).params;
    }
    auto knn = cfg_.knn;
    if (knn_k) knn.k = *knn_k;
    return train_policy(rd, name, cfg_.maxent_ppo(), RewardSource::intrinsic(knn), arch(width.value_or(cfg_.recurrent_width), cfg_.explore_view_radius),
                        derive_seed(run_seed(r), name_hash(name)));
  }

  std::vector<PolicyParams<float>> ensemble(int r, const fs::path& rd) {
    if (cfg_.ensemble_dir) {
      const auto path = *cfg_.ensemble_dir / ("run-" + std::to_string(r)) / "bundle.json";
      if (!fs::exists(path)) throw Error(ErrorKind::Config, "missing ensemble manifest " + path.string());
      auto b = load_bundle(path);
      return std::move(b.reward_policies);
    }
    std::vector<PolicyParams<float>> members;
    BundleManifest manifest;
    for (int i = 0; i < cfg_.ensemble_size; ++i) {
      const std::string name = "member-" + std::to_string(i);
      members.push_back(train_policy(rd, name, cfg_.ppo, RewardSource::extrinsic(), arch(0, cfg_.view_radius),
                                     derive_seed(run_seed(r), name_hash(name))));
      manifest.reward_checkpoints.push_back(name + ".ckpt");
    }
    manifest.consensus_k = cfg_.consensus_k;
    manifest.alpha = cfg_.alpha;
    manifest.fallback = Fallback::Random;
    write_bundle_manifest(rd / "bundle.json", manifest);
    files_.push_back(fs::relative(rd / "bundle.json", dir_).generic_string());
    return members;
  }

  EnsembleBundle make_bundle(std::vector<PolicyParams<float>> members, std::optional<PolicyParams<float>> maxent,
                             Fallback fallback) const {
    EnsembleBundle b;
    b.reward_policies = std::move(members);
    b.maxent_policy = std::move(maxent);
    b.consensus_k = cfg_.consensus_k;
    b.alpha = cfg_.alpha;
    b.fallback = fallback;
    b.validate();
    return b;
  }

  void run_once(int r) {
    const auto rd = run_dir(r);
    switch (cfg_.kind) {
      case ExperimentKind::TrainMaxEnt: {
        const auto me = maxent_policy(r, rd);
        evaluate(me, "maxent", r, true);
        if (cfg_.compare_extrinsic) {
          // Same memory, view, step budget and entropy bonus as the maxEnt policy.
          const auto ppo = train_policy(rd, "ppo", cfg_.maxent_ppo(), RewardSource::extrinsic(),
                                        arch(cfg_.recurrent_width, cfg_.explore_view_radius),
                                        derive_seed(run_seed(r), name_hash("ppo")));
          evaluate(ppo, "ppo", r, true);
        }
        evaluate_random_baseline(r, true);
        break;
      }
      case ExperimentKind::TrainEnsemble: {
        const auto members = ensemble(r, rd);
        for (std::size_t i = 0; i < members.size(); ++i) evaluate(members[i], "member-" + std::to_string(i), r, false);
        break;
      }
      case ExperimentKind::EvalExpGen:
      case ExperimentKind::AblationRandomFallback: {
        auto members = ensemble(r, rd);
        const auto single = members.front();
        const bool both = cfg_.kind == ExperimentKind::AblationRandomFallback;
        if (both || cfg_.fallback == Fallback::MaxEnt) {
          evaluate_bundle(make_bundle(members, maxent_policy(r, rd), Fallback::MaxEnt), "expgen-maxent", r);
        }
        if (both || cfg_.fallback == Fallback::Random) {
          evaluate_bundle(make_bundle(members, std::nullopt, Fallback::Random), "expgen-random", r);
        }
        evaluate(single, "ppo", r, false);
        if (both) evaluate_random_baseline(r, false);
        break;
      }
      case ExperimentKind::AblationMixedReward: {
        auto ppo = cfg_.ppo;
        ppo.gamma = cfg_.ablation_gamma;
        for (double beta : cfg_.beta_grid) {
          const std::string name = "mixed-beta" + fmt(beta);
          const auto p = train_policy(rd, name, ppo, RewardSource::mixed(beta, cfg_.knn), arch(cfg_.recurrent_width, cfg_.explore_view_radius),
                                      derive_seed(run_seed(r), name_hash(name)));
          evaluate(p, name, r, true);
        }
        break;
      }
      case ExperimentKind::HiddenMaze: {
        const auto p = train_policy(rd, "ppo-recurrent", cfg_.ppo, RewardSource::extrinsic(), arch(cfg_.recurrent_width, cfg_.view_radius),
                                    derive_seed(run_seed(r), name_hash("ppo-recurrent")));
        evaluate(p, "ppo-recurrent", r, false);
        evaluate_random_baseline(r, false);
        break;
      }
      case ExperimentKind::KnnSweep: {
        for (int k : cfg_.knn_grid) {
          const std::string name = "maxent-k" + std::to_string(k);
          evaluate(maxent_policy(r, rd, k, std::nullopt, name), name, r, true);
        }
        break;
      }
      case ExperimentKind::MemoryAblation: {
        evaluate(maxent_policy(r, rd, std::nullopt, cfg_.recurrent_width, "maxent-gru"), "maxent-gru", r, true);
        evaluate(maxent_policy(r, rd, std::nullopt, 0, "maxent-ff"), "maxent-ff", r, true);
        break;
      }
    }
  }

  const ExperimentConfig& cfg_;
  LogFn log_;
  std::vector<std::shared_ptr<const LevelSpec>> train_;
  std::vector<std::shared_ptr<const LevelSpec>> test_;
  EvalOptions eval_;
  fs::path dir_;
  std::string created_;
  std::vector<std::string> files_;
  ScoreTable table_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg, const LogFn& log) {
  cfg.validate();
  if (cfg.ensemble_dir && !fs::is_directory(*cfg.ensemble_dir)) {
    throw Error(ErrorKind::Config, "ensemble_dir " + cfg.ensemble_dir->string() + " does not exist");
  }
  if (cfg.maxent_dir && !fs::is_directory(*cfg.maxent_dir)) {
    throw Error(ErrorKind::Config, "maxent_dir " + cfg.maxent_dir->string() + " does not exist");
  }
  return Runner(cfg, log).run();
}

// ---------------------------------------------------------------------------
// Reports

std::string export_report(const fs::path& artifact_dir, int n_bootstrap, std::uint64_t seed) {
  if (!fs::is_directory(artifact_dir)) throw Error(ErrorKind::Config, artifact_dir.string() + " is not a directory");
  std::vector<fs::path> tables;
  for (const auto& entry : fs::recursive_directory_iterator(artifact_dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "scores.csv") tables.push_back(entry.path());
  }
  std::sort(tables.begin(), tables.end());
  if (tables.empty()) throw Error(ErrorKind::EmptyInput, "no score tables under " + artifact_dir.string());
  ScoreTable merged;
  for (const auto& path : tables) {
    ScoreTable t;
    try {
      t = ScoreTable::read_csv(path);
    } catch (const Error& e) {
      throw Error(ErrorKind::Io, "corrupt score table " + path.string() + " (" + e.what() + ")");
    }
    try {
      merged.merge(t);
    } catch (const Error& e) {
      throw Error(ErrorKind::Config, "cannot merge " + path.string() + ": " + e.what());
    }
  }
  if (merged.empty()) throw Error(ErrorKind::EmptyInput, "score tables under " + artifact_dir.string() + " hold no rows");

  const auto policies = summarize_policies(merged);
  json report;
  report["tables"] = json::array();
  for (const auto& p : tables) report["tables"].push_back(fs::relative(p, artifact_dir).generic_string());
  report["policies"] = json::array();
  for (const auto& p : policies) report["policies"].push_back(policy_json(p));
  report["aggregates"] = aggregates_json(merged, n_bootstrap, seed);
  write_text(artifact_dir / "report.json", report.dump(2) + "\n");

  std::ostringstream csv;
  csv << "policy_id,split,mean,std,runs\n";
  char line[256];
  for (const auto& p : policies) {
    std::snprintf(line, sizeof line, "%s,train,%.17g,%.17g,%zu\n", p.policy_id.c_str(), p.train_mean, p.train_std, p.runs);
    csv << line;
    std::snprintf(line, sizeof line, "%s,test,%.17g,%.17g,%zu\n", p.policy_id.c_str(), p.test_mean, p.test_std, p.runs);
    csv << line;
  }
  write_text(artifact_dir / "report.csv", csv.str());

  std::ostringstream text;
  std::snprintf(line, sizeof line, "%-28s %5s %18s %18s %8s\n", "policy", "runs", "train mean+-std", "test mean+-std", "gap");
  text << line;
  for (const auto& p : policies) {
    std::snprintf(line, sizeof line, "%-28s %5zu %9.3f+-%-7.3f %9.3f+-%-7.3f %8s\n", p.policy_id.c_str(), p.runs, p.train_mean,
                  p.train_std, p.test_mean, p.test_std, p.gap ? fmt(*p.gap, 3).c_str() : "-");
    text << line;
  }
  write_text(artifact_dir / "summary.txt", text.str());
  return text.str();
}

}  // namespace expgen
