#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace emmc {

struct LabeledSample {
  Eigen::VectorXd features;
  int label = 0;
};

// Immutable-after-construction container: feature matrix (one row per sample)
// plus integer labels in 0..num_classes-1.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Eigen::MatrixXd features, std::vector<int> labels, int num_classes);
  static Dataset from_samples(const std::vector<LabeledSample>& samples, int num_classes);

  int size() const { return static_cast<int>(features_.rows()); }
  int dim() const { return static_cast<int>(features_.cols()); }
  int num_classes() const { return num_classes_; }
  bool empty() const { return size() == 0; }

  const Eigen::MatrixXd& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  Eigen::VectorXd sample(int i) const { return features_.row(i).transpose(); }
  int label(int i) const { return labels_[static_cast<size_t>(i)]; }

  std::vector<int> class_counts() const;
  std::set<int> present_classes() const;
  std::vector<int> indices_of_class(int cls) const;
  Dataset subset(const std::vector<int>& indices) const;
  Eigen::MatrixXd features_of_class(int cls) const;
  void append(const Dataset& other);

 private:
  Eigen::MatrixXd features_;
  std::vector<int> labels_;
  int num_classes_ = 0;
};

enum class TopologyKind { Star, Ring, FullyConnected };

TopologyKind topology_kind_from_string(const std::string& name);
std::string to_string(TopologyKind kind);

// Which class pairs live on which node. num_classes is M+1 (class 0 plus M
// attack classes).
struct Topology {
  TopologyKind kind = TopologyKind::Star;
  int num_classes = 0;

  // Star: M nodes {0,j}. Ring: M+1 nodes {j-1, j mod (M+1)}.
  // FullyConnected: one node per unordered pair, lexicographic order.
  std::vector<std::pair<int, int>> node_class_pairs() const;
  int num_nodes() const { return static_cast<int>(node_class_pairs().size()); }
};

struct MixtureComponent {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  double weight = 0.0;
};

// Per-class Gaussian mixture parameters used by the synthetic generator.
struct ClassMixtureSpec {
  std::vector<std::vector<MixtureComponent>> classes;

  int num_classes() const { return static_cast<int>(classes.size()); }
  int dim() const;
  // Throws DataError on non-SPD covariance, bad weights, or dim mismatch.
  void validate() const;
};

struct NodeData {
  int node_id = 0;
  Dataset data;
  std::pair<int, int> classes;
};

// counts[m] samples per class m, drawn from its mixture. Deterministic given seed.
Dataset generate_synthetic(const ClassMixtureSpec& spec, const std::vector<int>& counts,
                           uint64_t seed);

// Partition a pooled dataset onto topology nodes. Classes held by several
// nodes are split disjointly at random; in Star topologies the shared class 0
// is allotted proportionally to each node's attack-class count.
std::vector<NodeData> assign_to_nodes(const Dataset& data, const Topology& topo, uint64_t seed);

// Subsample any class with more than `cap` samples down to exactly `cap`
// (without replacement, original order kept). Smaller classes pass through.
Dataset balance(const Dataset& data, int cap, uint64_t seed);

// Stratified split; exact partition of the input, deterministic given seed.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             uint64_t seed);

// CSV ingestion: header row required, label column integer-valued. An empty
// feature_columns list selects every non-label column in header order.
Dataset load_csv(const std::string& path, const std::string& label_column = "label",
                 const std::vector<std::string>& feature_columns = {});
void save_csv(const Dataset& data, const std::string& path);

}  // namespace emmc
