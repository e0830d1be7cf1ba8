#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include <nlohmann/json_fwd.hpp>

#include "emmc/classifiers.hpp"
#include "emmc/dataset.hpp"
#include "emmc/gmm.hpp"

namespace emmc {

// The one-shot message a node sends to the coordinator: class pair, sample
// count, fitted binary classifier, fitted feature-density GMM, audit metadata.
struct NodeSummary {
  int node_id = 0;
  int n = 0;
  std::pair<int, int> classes{0, 0};
  BinaryClassifier classifier;
  GmmModel gmm;
  std::string meta_json = "{}";

  void validate() const;

  // Wire format: one JSON document, floats at full round-trip precision.
  std::string serialize() const;
  static NodeSummary deserialize(const std::string& bytes);

  nlohmann::json to_json() const;
  static NodeSummary from_json(const nlohmann::json& doc);
};

// Whether the coordinator prior uses the sample count the models were fitted
// on (post-balance) or the raw count the node held.
enum class PriorCounts { PostBalance, PreBalance };

struct NodeConfig {
  ClassifierKind classifier = ClassifierKind::Logistic;
  int k = 3;
  EmOptions em{};
  LogisticOptions logistic{};
  bool balance = false;
  int balance_cap = 1000;
  PriorCounts prior_counts = PriorCounts::PostBalance;
  uint64_t seed = 0;
};

// Steps run inside one node: optional balancing, binary classifier fit on the
// labeled data, GMM fit on the same features with labels ignored.
NodeSummary fit_node(int node_id, const Dataset& data, const NodeConfig& config);

void write_node_summary(const NodeSummary& summary, const std::string& path);
NodeSummary read_node_summary(const std::string& path);

}  // namespace emmc
