#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace emmc {

// Row i = matched target point - source point i under the optimal
// quadratic-cost assignment.
struct DisplacementMatrix {
  Eigen::MatrixXd rows;  // n x d
};

// Orthonormal direction columns with their explained-variance ratios.
// `spectrum` carries all d ratios (non-increasing, summing to 1); the first
// r entries correspond to the stored columns.
struct DirectionMatrix {
  Eigen::MatrixXd columns;   // d x r
  Eigen::VectorXd spectrum;  // length d

  int r() const { return static_cast<int>(columns.cols()); }
  int dim() const { return static_cast<int>(columns.rows()); }
};

DisplacementMatrix displacement(const Eigen::MatrixXd& attack, const Eigen::MatrixXd& normal);

// Principal directions of the displacement matrix. Uncentered by default: a
// pure translation between the groups is itself the leading signal.
DirectionMatrix potd_directions(const DisplacementMatrix& disp, int r, bool center = false);

Eigen::MatrixXd project(const Eigen::MatrixXd& data, const DirectionMatrix& dirs);

// distances[attack][subspace][rep]: W2 between projected subsamples of the
// attack-vs-normal pair, one shared subsample per (attack, rep).
struct SpecificityResult {
  std::vector<std::vector<std::vector<double>>> distances;
  int n_sub = 0;
  int reps = 0;
};

SpecificityResult specificity_experiment(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& binary_datasets,
    const std::vector<DirectionMatrix>& dirs, int n_sub = 1000, int reps = 100, uint64_t seed = 0,
    int jobs = 1);

struct PcaModel {
  Eigen::VectorXd mean;
  DirectionMatrix dirs;
};

// Standard centered PCA; the returned model applies the same transform to
// held-out data.
std::pair<Eigen::MatrixXd, PcaModel> pca_reduce(const Eigen::MatrixXd& data, int r);
Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& data);

}  // namespace emmc
