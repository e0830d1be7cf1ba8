// Dense linear assignment by successive shortest augmenting paths with dual
// updates, following D. F. Crouse, "On Implementing 2D Rectangular Assignment
// Algorithms", IEEE Trans. Aerospace and Electronic Systems 52(4), 2016 -- a
// tie-robust variant of the Jonker-Volgenant shortest augmenting path scheme.
#include "emmc/assignment.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "emmc/errors.hpp"

namespace emmc {

AssignmentResult solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (n == 0) throw DataError("assignment: empty cost matrix");
  if (cost.cols() != n) {
    throw DataError("assignment: cost matrix must be square, got " + std::to_string(cost.rows()) +
                    "x" + std::to_string(cost.cols()));
  }
  if (n > 4096) {
    throw DataError("assignment: n=" + std::to_string(n) +
                    " exceeds 4096; subsample the point sets first");
  }
  if (!cost.allFinite()) throw NumericError("assignment: non-finite cost entry");

  // row-major copy for cache-friendly row scans
  std::vector<double> c(static_cast<size_t>(n) * static_cast<size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) c[static_cast<size_t>(i) * n + j] = cost(i, j);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n, 0.0), v(n, 0.0);
  std::vector<int> row_for_col(n, -1), col_for_row(n, -1);
  std::vector<double> shortest(n);
  std::vector<int> pred(n);       // predecessor row on the alternating path
  std::vector<int> remaining(n);  // columns not yet in the shortest-path tree
  std::vector<char> in_sr(n), in_sc(n);

  for (int cur_row = 0; cur_row < n; ++cur_row) {
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::fill(in_sr.begin(), in_sr.end(), 0);
    std::fill(in_sc.begin(), in_sc.end(), 0);
    int num_remaining = n;
    for (int j = 0; j < n; ++j) remaining[j] = j;

    double min_val = 0.0;
    int sink = -1;
    int i = cur_row;
    while (sink == -1) {
      in_sr[i] = 1;
      const double* row = &c[static_cast<size_t>(i) * n];
      const double ui = u[i];
      int index = -1;
      double lowest = kInf;
      for (int t = 0; t < num_remaining; ++t) {
        const int j = remaining[t];
        const double r = min_val + row[j] - ui - v[j];
        if (r < shortest[j]) {
          pred[j] = i;
          shortest[j] = r;
        }
        // prefer unassigned columns on ties so the path closes sooner
        if (shortest[j] < lowest || (shortest[j] == lowest && row_for_col[j] == -1)) {
          lowest = shortest[j];
          index = t;
        }
      }
      min_val = lowest;
      if (index == -1 || min_val == kInf) {
        throw NumericError("assignment: no augmenting path (infeasible cost matrix)");
      }
      const int j = remaining[index];
      in_sc[j] = 1;
      remaining[index] = remaining[--num_remaining];
      if (row_for_col[j] == -1) {
        sink = j;
      } else {
        i = row_for_col[j];
      }
    }

    // dual updates keep reduced costs consistent for later augmentations
    u[cur_row] += min_val;
    for (int k = 0; k < n; ++k) {
      if (in_sr[k] && k != cur_row) {
        u[k] += min_val - shortest[col_for_row[k]];
      }
    }
    for (int j = 0; j < n; ++j) {
      if (in_sc[j]) {
        v[j] -= min_val - shortest[j];
      }
    }

    // augment: walk predecessors back to cur_row
    int j = sink;
    while (true) {
      const int pi = pred[j];
      row_for_col[j] = pi;
      std::swap(col_for_row[pi], j);
      if (pi == cur_row) break;
    }
  }

  AssignmentResult result;
  result.row_to_col = col_for_row;
  for (int i = 0; i < n; ++i) {
    result.cost += c[static_cast<size_t>(i) * n + col_for_row[i]];
  }
  return result;
}

}  // namespace emmc
