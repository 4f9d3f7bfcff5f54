#include "expgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "expgen/error.hpp"
#include "expgen/random.hpp"
#include "json.hpp"

namespace expgen {

const char* to_string(Split split) { return split == Split::Train ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::Train;
  if (name == "test") return Split::Test;
  throw Error(ErrorKind::Config, "unknown split '" + std::string(name) + "'");
}

void ScoreTable::add(ScoreRow row) {
  auto bad = [](const std::string& s) { return s.empty() || s.find_first_of(",\n\r") != std::string::npos; };
  if (bad(row.env_kind) || bad(row.policy_id)) {
    throw Error(ErrorKind::Config, "env_kind and policy_id must be non-empty and free of commas");
  }
  auto key = std::make_tuple(row.env_kind, row.level_seed, row.policy_id, row.run_seed);
  if (index_.contains(key)) {
    throw Error(ErrorKind::Config, "duplicate score row for " + row.env_kind + "/" + std::to_string(row.level_seed) +
                                       "/" + row.policy_id + "/" + std::to_string(row.run_seed));
  }
  index_.emplace(std::move(key), rows_.size());
  rows_.push_back(std::move(row));
}

void ScoreTable::merge(const ScoreTable& other) {
  for (const auto& r : other.rows_) add(r);
}

void ScoreTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "env_kind,level_seed,policy_id,run_seed,return,split\n";
  char buf[64];
  for (const auto& r : rows_) {
    std::snprintf(buf, sizeof buf, "%.17g", r.ret);
    os << r.env_kind << ',' << r.level_seed << ',' << r.policy_id << ',' << r.run_seed << ',' << buf << ','
       << to_string(r.split) << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "failed writing " + path.string());
}

ScoreTable ScoreTable::read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "env_kind,level_seed,policy_id,run_seed,return,split") {
    throw Error(ErrorKind::Io, path.string() + ": missing or wrong header");
  }
  ScoreTable table;
  int number = 1;
  while (std::getline(is, line)) {
    ++number;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    auto fail = [&](const std::string& why) {
      throw Error(ErrorKind::Io, path.string() + ":" + std::to_string(number) + ": " + why);
    };
    if (f.size() != 6) fail("expected 6 fields");
    ScoreRow row;
    row.env_kind = f[0];
    row.policy_id = f[2];
    try {
      std::size_t used = 0;
      row.level_seed = std::stoull(f[1], &used);
      if (used != f[1].size()) fail("bad level_seed");
      row.run_seed = std::stoull(f[3], &used);
      if (used != f[3].size()) fail("bad run_seed");
      row.ret = std::stod(f[4], &used);
      if (used != f[4].size() || !std::isfinite(row.ret)) fail("bad return");
      row.split = parse_split(f[5]);
    } catch (const std::logic_error&) {
      fail("malformed number");
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::Io) throw;
      fail(e.what());
    }
    try {
      table.add(std::move(row));
    } catch (const Error& e) {
      fail(e.what());
    }
  }
  return table;
}

NormalizationConstants NormalizationConstants::defaults() {
  NormalizationConstants c;
  c.set("maze", 5.0, 10.0);
  c.set("hidden-maze", 5.0, 10.0);
  c.set("keydoor", 3.5, 10.0);
  return c;
}

void NormalizationConstants::set(const std::string& env_kind, double r_min, double r_max) {
  if (!(r_max > r_min)) throw Error(ErrorKind::Config, "R_max must exceed R_min for " + env_kind);
  ranges[env_kind] = {r_min, r_max};
}

double normalized_return(double ret, const NormalizationConstants& consts, const std::string& env_kind) {
  auto it = consts.ranges.find(env_kind);
  if (it == consts.ranges.end()) throw Error(ErrorKind::Config, "no normalization constants for '" + env_kind + "'");
  const auto [lo, hi] = it->second;
  return (ret - lo) / (hi - lo);
}

double generalization_gap(double train_mean, double test_mean) {
  if (train_mean == 0.0) throw Error(ErrorKind::UndefinedGap, "generalization gap undefined for zero train return");
  return (train_mean - test_mean) / train_mean;
}

double interquartile_mean(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "interquartile mean of no values");
  std::sort(values.begin(), values.end());
  const std::size_t cut = values.size() / 4;
  const auto first = values.begin() + static_cast<std::ptrdiff_t>(cut);
  const auto last = values.end() - static_cast<std::ptrdiff_t>(cut);
  return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "median of no values");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::map<std::string, std::vector<double>> run_scores(const ScoreTable& table, const NormalizationConstants& consts,
                                                      Split split, const std::string& policy_id) {
  // (env, policy, run) -> (sum, count), iterated in key order for determinism.
  std::map<std::tuple<std::string, std::string, std::uint64_t>, std::pair<double, int>> acc;
  for (const auto& r : table.rows()) {
    if (r.split != split || (!policy_id.empty() && r.policy_id != policy_id)) continue;
    auto& a = acc[{r.env_kind, r.policy_id, r.run_seed}];
    a.first += normalized_return(r.ret, consts, r.env_kind);
    ++a.second;
  }
  std::map<std::string, std::vector<double>> out;
  for (const auto& [key, a] : acc) out[std::get<0>(key)].push_back(a.first / a.second);
  return out;
}

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

AggregateReport aggregate_metrics(const std::map<std::string, std::vector<double>>& scores, int n_bootstrap,
                                  std::uint64_t seed) {
  std::vector<double> pooled;
  for (const auto& [env, v] : scores) pooled.insert(pooled.end(), v.begin(), v.end());
  if (pooled.empty()) throw Error(ErrorKind::EmptyInput, "no run scores to aggregate");
  if (pooled.size() < 2) throw Error(ErrorKind::InsufficientSamples, "aggregate metrics need at least 2 runs");
  if (n_bootstrap < 1) throw Error(ErrorKind::Config, "n_bootstrap must be >= 1");

  AggregateReport report;
  report.runs = pooled.size();
  report.n_bootstrap = n_bootstrap;
  auto point = [](const std::vector<double>& v, const std::string& metric) {
    if (metric == "mean") return mean_of(v);
    if (metric == "median") return median(v);
    if (metric == "iqm") return interquartile_mean(v);
    return 1.0 - mean_of(v);
  };
  const std::vector<std::string> metrics{"mean", "median", "iqm", "optimality_gap"};
  Rng rng(seed);
  std::vector<double> sample;
  for (const auto& m : metrics) report.bootstrap[m].reserve(static_cast<std::size_t>(n_bootstrap));
  for (int b = 0; b < n_bootstrap; ++b) {
    sample.clear();
    for (const auto& [env, v] : scores) {
      for (std::size_t i = 0; i < v.size(); ++i) sample.push_back(v[uniform_index(rng, v.size())]);
    }
    for (const auto& m : metrics) report.bootstrap[m].push_back(point(sample, m));
  }
  auto interval = [&](const std::string& m) {
    return Interval{point(pooled, m), percentile(report.bootstrap[m], 2.5), percentile(report.bootstrap[m], 97.5)};
  };
  report.mean = interval("mean");
  report.median = interval("median");
  report.iqm = interval("iqm");
  report.optimality_gap = interval("optimality_gap");
  return report;
}

double probability_of_improvement(const std::map<std::string, std::vector<double>>& x,
                                  const std::map<std::string, std::vector<double>>& y) {
  if (x.empty()) throw Error(ErrorKind::EmptyInput, "no scores for probability of improvement");
  if (x.size() != y.size() || !std::equal(x.begin(), x.end(), y.begin(), [](const auto& a, const auto& b) {
        return a.first == b.first;
      })) {
    throw Error(ErrorKind::Shape, "probability of improvement needs the same env kinds for both algorithms");
  }
  double total = 0.0;
  for (const auto& [env, xs] : x) {
    const auto& ys = y.at(env);
    if (xs.empty() || ys.empty()) throw Error(ErrorKind::EmptyInput, "no runs for env kind " + env);
    double wins = 0.0;
    for (double a : xs) {
      for (double b : ys) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    }
    total += wins / static_cast<double>(xs.size() * ys.size());
  }
  return total / static_cast<double>(x.size());
}

std::string report_json(const AggregateReport& report) {
  nlohmann::ordered_json j;
  auto put = [&](const char* name, const Interval& i) {
    j[name] = {{"point", i.point}, {"ci_low", i.lower}, {"ci_high", i.upper}};
  };
  put("mean", report.mean);
  put("median", report.median);
  put("iqm", report.iqm);
  put("optimality_gap", report.optimality_gap);
  j["runs"] = report.runs;
  j["n_bootstrap"] = report.n_bootstrap;
  return j.dump(2);
}

void write_bootstrap_csv(const std::filesystem::path& path, const AggregateReport& report) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os << "metric,resample,value\n";
  char buf[64];
  for (const auto& [metric, values] : report.bootstrap) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", values[i]);
      os << metric << ',' << i << ',' << buf << '\n';
    }
  }
}

}  // namespace expgen
