#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "emmc/dataset.hpp"

namespace test_helpers {

// Four well-separated 2-D classes, each a small Gaussian mixture with unit
// covariances. Used across the synthetic experiments.
inline emmc::ClassMixtureSpec four_class_mixture() {
  using Eigen::MatrixXd;
  using Eigen::Vector2d;
  const MatrixXd eye = MatrixXd::Identity(2, 2);
  auto comp = [&](double x, double y, double w) {
    return emmc::MixtureComponent{Vector2d(x, y), eye, w};
  };
  emmc::ClassMixtureSpec spec;
  spec.classes = {
      {comp(-6, -1, 0.5), comp(-8, 2, 0.5)},
      {comp(3, 6, 4.0 / 15), comp(4, 4, 6.0 / 15), comp(5, 6, 5.0 / 15)},
      {comp(0, -4, 9.0 / 13), comp(0, -2, 4.0 / 13)},
      {comp(-1, 5, 6.0 / 15), comp(-2, 4, 5.0 / 15), comp(-2, 5, 4.0 / 15)},
  };
  return spec;
}

// Exhaustive matching oracle for small instances (n <= 8).
inline std::pair<std::vector<int>, double> brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int i = 0; i < n; ++i) c += cost(i, perm[static_cast<size_t>(i)]);
    if (c < best_cost) {
      best_cost = c;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

inline Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = normal(rng);
  return m;
}

// Random SPD matrix A A^T + eps I.
inline Eigen::MatrixXd random_spd(int d, std::mt19937_64& rng) {
  const Eigen::MatrixXd a = random_matrix(d, d, rng);
  return a * a.transpose() + 0.5 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace test_helpers
