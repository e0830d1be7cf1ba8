#pragma once

#include <cstdint>
#include <nlohmann/json_fwd.hpp>
#include <string>
#include <utility>
#include <vector>

#include "emmc/classifiers.hpp"
#include "emmc/dataset.hpp"
#include "emmc/node.hpp"
#include "emmc/stats.hpp"

namespace emmc {

struct SyntheticDataConfig {
  ClassMixtureSpec mixture;
  // per_node_generation: node_counts[j] = samples for the node's (first,
  // second) class; otherwise class_counts is generated pooled and partitioned.
  bool per_node_generation = true;
  std::vector<std::pair<int, int>> node_counts;
  std::vector<int> class_counts;
  std::vector<int> test_counts;
};

struct CsvDataConfig {
  std::string train_path;
  std::string test_path;  // empty: split train by test_fraction each replicate
  std::string label_column = "label";
  std::vector<std::string> feature_columns;
};

struct ExperimentConfig {
  bool synthetic = true;
  SyntheticDataConfig synth;
  CsvDataConfig csv;

  Topology topology;
  std::vector<int> k_per_node;  // broadcast if a single entry
  ClassifierKind classifier = ClassifierKind::Logistic;
  EmOptions em{};
  LogisticOptions logistic{};
  LogisticOptions baseline_opts{};
  bool run_baseline = true;
  bool balance = false;
  int balance_cap = 1000;
  PriorCounts prior_counts = PriorCounts::PostBalance;
  double test_fraction = 0.25;
  int replicates = 1;
  uint64_t seed = 0;
  int jobs = 1;
  std::string out_dir = "out";
  // The one-shot exchange is file-based by default; the in-process path
  // exists to check that both agree bit-exactly.
  bool aggregate_from_files = true;

  static ExperimentConfig from_toml_file(const std::string& path);
  static ExperimentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
  void validate() const;
  int num_nodes() const { return topology.num_nodes(); }
  int k_for_node(int j) const;
};

struct ReplicateOutcome {
  int replicate = 0;
  bool ok = false;
  std::string error;
  MetricsReport ensemble;
  MetricsReport baseline;
};

struct RunReport {
  std::vector<ReplicateOutcome> replicates;
  MetricsReport ensemble_summary;
  MetricsReport baseline_summary;
  bool has_baseline = false;
  int failed = 0;
  double elapsed_seconds = 0.0;
};

// Full protocol per replicate: build node datasets, fit each node, exchange
// summaries through .nodesum.json files, aggregate, evaluate on the pooled
// test set, and fit/evaluate the pooled-data multinomial baseline. Writes
// metrics.csv, summary.csv and manifest.json under config.out_dir.
RunReport run_experiment(const ExperimentConfig& config);

void write_metrics_csv(const RunReport& report, const std::string& path);
void write_summary_csv(const RunReport& report, const std::string& path);

// Seed-path stage tags, fixed so runs are reproducible and documented in the
// manifest: seed = derive_seed(master, {replicate, tag, [node]}).
namespace stage {
inline constexpr uint64_t kGenerate = 1;
inline constexpr uint64_t kTestSet = 2;
inline constexpr uint64_t kAssign = 3;
inline constexpr uint64_t kSplit = 4;
inline constexpr uint64_t kNodeFit = 5;
inline constexpr uint64_t kBaseline = 6;
}  // namespace stage

}  // namespace emmc
