#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "emmc/dataset.hpp"

namespace emmc {

struct KlEstimate {
  double value = 0.0;   // clamped at 0 from below
  long floored = 0;     // nearest-neighbor distances hit the 1e-12 floor
  bool degenerate = false;
};

// 1-nearest-neighbor nonparametric KL(a||b) estimate:
// (d/n) sum_i log(nu_i / rho_i) + log(m/(n-1)).
double kl_estimate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);
KlEstimate kl_estimate_detail(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct DriftTestResult {
  double kl_hat = 0.0;
  std::vector<double> null_kls;
  double p_value = 1.0;  // (#{null >= observed} + 1) / (permutations + 1)
  bool degenerate = false;
};

// Permutation test of H0: KL(train||test) = 0 via seeded re-splits of the
// pooled sample, preserving the two sample sizes.
DriftTestResult drift_test(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test,
                           int permutations, uint64_t seed, int jobs = 1);
DriftTestResult drift_test(const Dataset& train, const Dataset& test, int permutations = 100,
                           uint64_t seed = 0, int jobs = 1);

// W2 between equal-size point sets: sqrt of the minimum mean squared matching
// cost, solved exactly by assignment.
double wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

struct MetricsReport {
  Eigen::MatrixXi confusion;  // truth rows x predicted cols; summed for summaries
  std::vector<std::optional<double>> precision, recall;
  // filled by replicate_summary (sample SD; 0 for a single replicate)
  std::vector<std::optional<double>> precision_sd, recall_sd;

  int num_classes() const { return static_cast<int>(precision.size()); }
};

MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                       int num_classes);
MetricsReport replicate_summary(const std::vector<MetricsReport>& reports);

}  // namespace emmc
