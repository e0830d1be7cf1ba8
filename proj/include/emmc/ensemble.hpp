#pragma once

#include <Eigen/Dense>
#include <map>
#include <utility>
#include <vector>

#include "emmc/node.hpp"

namespace emmc {

struct PosteriorResult {
  Eigen::VectorXd posterior;           // over classes 0..M
  Eigen::VectorXd weights;             // per node, softmax of log-density + log-prior
  Eigen::VectorXd log_node_densities;  // per node
};

struct JensenCell {
  int node = 0;
  int cls = 0;
  long violations = 0;
  long evaluations = 0;
};

// Diagnostic for the aggregation-optimality hypothesis
// w_j(x) >= c_j^(m)(x)^(J-1) / J. Reported only; never changes predictions.
struct JensenReport {
  long points = 0;
  std::vector<JensenCell> cells;
  double overall_rate = 0.0;
};

// Coordinator-side model: node summaries plus priors n_j / sum(n_j). Immutable
// and safe to share across threads.
class EnsembleModel {
 public:
  // num_classes = 0 infers M+1 from the largest class id; passing it
  // explicitly lets the coverage check catch missing top classes.
  static EnsembleModel build(std::vector<NodeSummary> summaries, int num_classes = 0);

  int num_nodes() const { return static_cast<int>(summaries_.size()); }
  int num_classes() const { return num_classes_; }
  int dim() const { return dim_; }
  const std::vector<NodeSummary>& summaries() const { return summaries_; }
  const Eigen::VectorXd& priors() const { return priors_; }

  PosteriorResult posterior(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const;  // argmax, ties -> lowest class id
  std::vector<int> predict_batch(const Eigen::MatrixXd& X, int jobs = 1) const;
  Eigen::MatrixXd posterior_batch(const Eigen::MatrixXd& X, int jobs = 1) const;

  JensenReport jensen_condition_report(const Eigen::MatrixXd& xs) const;

 private:
  EnsembleModel() = default;
  std::vector<NodeSummary> summaries_;
  Eigen::VectorXd priors_;
  Eigen::VectorXd log_priors_;
  int num_classes_ = 0;
  int dim_ = 0;
};

// Softmax with the standard max-shift; exposed for its shift-invariance test.
Eigen::VectorXd softmax(const Eigen::VectorXd& log_scores);

}  // namespace emmc
