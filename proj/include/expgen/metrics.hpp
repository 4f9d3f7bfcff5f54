#pragma once

// Score tables, normalized returns, generalization gaps and aggregate
// statistics with stratified bootstrap confidence intervals.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace expgen {

enum class Split { Train, Test };

const char* to_string(Split split);
Split parse_split(std::string_view name);

struct ScoreRow {
  std::string env_kind;
  std::uint64_t level_seed = 0;
  std::string policy_id;
  std::uint64_t run_seed = 0;
  double ret = 0.0;
  Split split = Split::Test;
};

/// Rows keyed by (env_kind, level_seed, policy_id, run_seed); duplicates are
/// rejected.
class ScoreTable {
 public:
  void add(ScoreRow row);
  void merge(const ScoreTable& other);
  const std::vector<ScoreRow>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }

  /// Columns env_kind,level_seed,policy_id,run_seed,return,split; returns are
  /// printed with 17 significant digits so files round-trip exactly.
  void write_csv(const std::filesystem::path& path) const;
  static ScoreTable read_csv(const std::filesystem::path& path);

 private:
  std::vector<ScoreRow> rows_;
  std::map<std::tuple<std::string, std::uint64_t, std::string, std::uint64_t>, std::size_t> index_;
};

struct NormalizationConstants {
  std::map<std::string, std::pair<double, double>> ranges;  // env_kind -> (R_min, R_max)

  /// Maze and hidden-maze (5, 10); key-door (3.5, 10).
  static NormalizationConstants defaults();
  void set(const std::string& env_kind, double r_min, double r_max);
};

double normalized_return(double ret, const NormalizationConstants& consts, const std::string& env_kind);

/// (train - test) / train.
double generalization_gap(double train_mean, double test_mean);

double interquartile_mean(std::vector<double> values);
double median(std::vector<double> values);

/// Normalized score of each run: the mean normalized return over the levels
/// of `split`, for every (policy_id, run_seed) within each env kind.
std::map<std::string, std::vector<double>> run_scores(const ScoreTable& table, const NormalizationConstants& consts,
                                                      Split split, const std::string& policy_id = "");

struct Interval {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct AggregateReport {
  Interval mean;
  Interval median;
  Interval iqm;
  Interval optimality_gap;
  std::size_t runs = 0;
  int n_bootstrap = 0;
  // Bootstrap replicates per metric, in resample order.
  std::map<std::string, std::vector<double>> bootstrap;
};

/// Point estimates over the pooled run scores plus 95% percentile intervals
/// from a bootstrap that resamples runs within each env kind.
AggregateReport aggregate_metrics(const std::map<std::string, std::vector<double>>& scores, int n_bootstrap,
                                  std::uint64_t seed);

/// Mean over env kinds of P(x > y) + 0.5 P(x = y) over all run pairs.
double probability_of_improvement(const std::map<std::string, std::vector<double>>& x,
                                  const std::map<std::string, std::vector<double>>& y);

std::string report_json(const AggregateReport& report);
void write_bootstrap_csv(const std::filesystem::path& path, const AggregateReport& report);

}  // namespace expgen
