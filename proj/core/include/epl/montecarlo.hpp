#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "epl/presets.hpp"

namespace epl {

// estimator names: "<k>-npl", "<k>-epl" with k a positive integer or "inf", and "mle"
struct EstimatorName {
  std::string family;  // "npl", "epl" or "mle"
  std::optional<int> k;  // empty means run to convergence
  std::string label() const;
  static EstimatorName parse(const std::string& s);
};

struct ExperimentConfig {
  std::string preset = "psd2008-i";
  std::optional<Preset> custom;  // overrides the preset id when set
  int N = 1000;
  int T = 1;
  int replications = 200;
  std::uint64_t seed = 20240601;
  std::vector<std::string> estimators = {"1-npl", "inf-npl", "1-epl", "inf-epl"};
  std::optional<StopRule> stop;  // defaults to the preset rule
  int threads = 1;
  int mle_starts = 10;
  void validate() const;
  std::string canonical() const;  // stable text form used for the config hash
  std::uint64_t hash() const;
};

struct ReplicationRecord {
  int replication = 0;
  std::string estimator;
  ThetaVec theta;  // empty when the replication failed before producing an estimate
  bool converged = false;
  int iterations = 0;
  double seconds = 0.0;
  std::string failure;
  std::vector<ThetaVec> path;  // theta-hat_1 .. theta-hat_k
};

struct EstimatorStats {
  std::string estimator;
  std::vector<std::string> param_names;
  Vec mean, bias, mse;
  int replications = 0;
  int used = 0;  // replications with a finite estimate
  int non_converged = 0;
  double convergence_rate = 0.0;
  double iter_median = 0.0, iter_iqr = 0.0;
  int iter_max = 0;
  double time_total = 0.0, time_mean = 0.0, time_median = 0.0, time_per_iteration = 0.0;
  std::string error;  // set when no replication produced an estimate
};

struct ExperimentResult {
  std::string preset;
  ThetaVec theta_true;
  std::vector<std::string> param_names;
  std::vector<EstimatorStats> stats;
  std::vector<ReplicationRecord> records;  // ordered by (replication, estimator)
  double wall_seconds = 0.0;
  double setup_seconds = 0.0;        // preset construction and the untimed warm-up replication
  double replication_seconds = 0.0;  // sum of per-replication wall times
  std::uint64_t config_hash = 0;
  std::string config_text;
  const EstimatorStats& find(const std::string& estimator) const;
};

ExperimentResult run_replications(const ExperimentConfig& cfg);

// one replication of a dynamic preset; exposed for tests
std::vector<ReplicationRecord> run_one_replication(const Preset& preset, const ExperimentConfig& cfg, int rep);

EstimatorStats summarize(const std::string& estimator, const std::vector<ReplicationRecord>& records,
                         const ThetaVec& theta_true, const std::vector<std::string>& param_names = {});

// writes stats.csv, stats.txt, replications.csv and manifest.json into dir
void emit_tables(const ExperimentResult& result, const std::filesystem::path& dir);
std::string format_table(const ExperimentResult& result);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace epl
