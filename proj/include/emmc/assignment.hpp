#pragma once

#include <Eigen/Dense>
#include <vector>

namespace emmc {

struct AssignmentResult {
  std::vector<int> row_to_col;
  double cost = 0.0;
};

// Exact minimum-cost perfect matching on a dense square cost matrix,
// shortest-augmenting-path (Jonker-Volgenant). Rejects n > 4096; subsample
// upstream instead.
AssignmentResult solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace emmc
