#include "emmc/potd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include "emmc/assignment.hpp"
#include "emmc/errors.hpp"
#include "emmc/rng.hpp"
#include "emmc/stats.hpp"

namespace emmc {

DisplacementMatrix displacement(const Eigen::MatrixXd& attack, const Eigen::MatrixXd& normal) {
  const int n = static_cast<int>(attack.rows());
  if (n == 0) throw DataError("displacement: empty point sets");
  if (normal.rows() != n) {
    throw DataError("displacement: sizes differ (" + std::to_string(n) + " vs " +
                    std::to_string(normal.rows()) + "); subsample to equal sizes upstream");
  }
  if (attack.cols() != normal.cols()) {
    throw DataError("displacement: dim mismatch");
  }
  Eigen::MatrixXd cost = -2.0 * attack * normal.transpose();
  cost.colwise() += attack.rowwise().squaredNorm();
  cost.rowwise() += normal.rowwise().squaredNorm().transpose();
  cost = cost.cwiseMax(0.0);
  const auto solution = solve_assignment(cost);

  DisplacementMatrix disp;
  disp.rows.resize(n, attack.cols());
  for (int i = 0; i < n; ++i) {
    disp.rows.row(i) = normal.row(solution.row_to_col[static_cast<size_t>(i)]) - attack.row(i);
  }
  return disp;
}

namespace {

// Fix sign so the largest-magnitude entry of each column is positive;
// deterministic across SVD implementations.
void canonicalize_signs(Eigen::MatrixXd& columns) {
  for (Eigen::Index c = 0; c < columns.cols(); ++c) {
    Eigen::Index imax = 0;
    columns.col(c).cwiseAbs().maxCoeff(&imax);
    if (columns(imax, c) < 0.0) columns.col(c) = -columns.col(c);
  }
}

DirectionMatrix principal_directions(const Eigen::MatrixXd& rows, int r) {
  const int d = static_cast<int>(rows.cols());
  if (r < 1 || r > d) {
    throw DataError("directions: r=" + std::to_string(r) + " outside 1.." + std::to_string(d));
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeThinV);
  const Eigen::VectorXd sv = svd.singularValues();
  Eigen::VectorXd spectrum = Eigen::VectorXd::Zero(d);
  const double total = sv.squaredNorm();
  for (Eigen::Index i = 0; i < sv.size() && i < d; ++i) {
    spectrum[i] = total > 0.0 ? sv[i] * sv[i] / total : 0.0;
  }
  if (total <= 0.0) spectrum.setConstant(1.0 / d);  // all-zero input: flat spectrum

  DirectionMatrix dirs;
  dirs.columns = svd.matrixV().leftCols(r);
  dirs.spectrum = spectrum;
  canonicalize_signs(dirs.columns);
  return dirs;
}

}  // namespace

DirectionMatrix potd_directions(const DisplacementMatrix& disp, int r, bool center) {
  if (disp.rows.rows() == 0) throw DataError("potd_directions: empty displacement matrix");
  if (center) {
    const Eigen::RowVectorXd mean = disp.rows.colwise().mean();
    return principal_directions(disp.rows.rowwise() - mean, r);
  }
  return principal_directions(disp.rows, r);
}

Eigen::MatrixXd project(const Eigen::MatrixXd& data, const DirectionMatrix& dirs) {
  if (data.cols() != dirs.dim()) {
    throw DataError("project: data dim " + std::to_string(data.cols()) + " != directions dim " +
                    std::to_string(dirs.dim()));
  }
  return data * dirs.columns;
}

SpecificityResult specificity_experiment(
    const std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>>& binary_datasets,
    const std::vector<DirectionMatrix>& dirs, int n_sub, int reps, uint64_t seed, int jobs) {
  if (binary_datasets.empty()) throw DataError("specificity: no binary datasets");
  if (dirs.size() != binary_datasets.size()) {
    throw DataError("specificity: need one direction matrix per attack");
  }
  if (n_sub < 1 || reps < 1) throw DataError("specificity: n_sub and reps must be >= 1");
  const int num_attacks = static_cast<int>(binary_datasets.size());
  for (int m = 0; m < num_attacks; ++m) {
    const auto& [attack, normal] = binary_datasets[static_cast<size_t>(m)];
    if (attack.rows() < n_sub || normal.rows() < n_sub) {
      throw DataError("specificity: attack " + std::to_string(m + 1) + " has fewer than " +
                      std::to_string(n_sub) + " samples in a group");
    }
  }

  SpecificityResult result;
  result.n_sub = n_sub;
  result.reps = reps;
  result.distances.assign(
      static_cast<size_t>(num_attacks),
      std::vector<std::vector<double>>(dirs.size(), std::vector<double>(static_cast<size_t>(reps))));

  // One task per (attack, rep): a shared subsample is projected onto every
  // subspace so the per-rep distances are comparable.
  const int tasks = num_attacks * reps;
  std::atomic<int> next{0};
  auto worker = [&] {
    while (true) {
      const int task = next.fetch_add(1);
      if (task >= tasks) return;
      const int m = task / reps;
      const int rep = task % reps;
      const auto& [attack, normal] = binary_datasets[static_cast<size_t>(m)];

      Rng rng(derive_seed(seed, {static_cast<uint64_t>(m), static_cast<uint64_t>(rep)}));
      auto subsample = [&](const Eigen::MatrixXd& src) {
        std::vector<int> idx(static_cast<size_t>(src.rows()));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        Eigen::MatrixXd out(n_sub, src.cols());
        for (int i = 0; i < n_sub; ++i) out.row(i) = src.row(idx[static_cast<size_t>(i)]);
        return out;
      };
      const Eigen::MatrixXd sub_attack = subsample(attack);
      const Eigen::MatrixXd sub_normal = subsample(normal);
      for (size_t s = 0; s < dirs.size(); ++s) {
        result.distances[static_cast<size_t>(m)][s][static_cast<size_t>(rep)] =
            wasserstein(project(sub_attack, dirs[s]), project(sub_normal, dirs[s]));
      }
    }
  };
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  return result;
}

std::pair<Eigen::MatrixXd, PcaModel> pca_reduce(const Eigen::MatrixXd& data, int r) {
  if (data.rows() == 0) throw DataError("pca_reduce: empty data");
  PcaModel model;
  model.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - model.mean.transpose();
  model.dirs = principal_directions(centered, r);
  return {centered * model.dirs.columns, std::move(model)};
}

Eigen::MatrixXd pca_apply(const PcaModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.dirs.dim()) {
    throw DataError("pca_apply: data dim " + std::to_string(data.cols()) + " != model dim " +
                    std::to_string(model.dirs.dim()));
  }
  return (data.rowwise() - model.mean.transpose()) * model.dirs.columns;
}

}  // namespace emmc
