#include "emmc/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "emmc/assignment.hpp"
#include "emmc/errors.hpp"
#include "emmc/rng.hpp"

namespace emmc {

namespace {

constexpr double kDistFloor = 1e-12;  // duplicate points are common in traffic data

double sq_dist(const double* x, const double* y, int d) {
  double acc = 0.0;
  for (int j = 0; j < d; ++j) {
    const double diff = x[j] - y[j];
    acc += diff * diff;
  }
  return acc;
}

}  // namespace

KlEstimate kl_estimate_detail(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(b.rows());
  const int d = static_cast<int>(a.cols());
  if (n < 2) throw DataError("kl_estimate: need at least 2 samples in a, got " + std::to_string(n));
  if (m < 1) throw DataError("kl_estimate: need at least 1 sample in b, got " + std::to_string(m));
  if (b.cols() != d) {
    throw DataError("kl_estimate: dim mismatch " + std::to_string(d) + " vs " +
                    std::to_string(b.cols()));
  }

  // row-major copies so the inner scans stride contiguously
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMat ar = a;
  const RowMat br = b;

  KlEstimate result;
  long nu_floored = 0;
  double log_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double* xi = ar.row(i).data();
    double rho2 = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      rho2 = std::min(rho2, sq_dist(xi, ar.row(j).data(), d));
    }
    double nu2 = std::numeric_limits<double>::infinity();
    for (int j = 0; j < m; ++j) {
      nu2 = std::min(nu2, sq_dist(xi, br.row(j).data(), d));
    }
    double rho = std::sqrt(rho2);
    double nu = std::sqrt(nu2);
    if (rho < kDistFloor) {
      rho = kDistFloor;
      result.floored++;
    }
    if (nu < kDistFloor) {
      nu = kDistFloor;
      result.floored++;
      nu_floored++;
    }
    log_sum += std::log(nu / rho);
  }
  const double raw = static_cast<double>(d) / n * log_sum +
                     std::log(static_cast<double>(m) / static_cast<double>(n - 1));
  result.degenerate = nu_floored == n;  // e.g. b == a: every cross-distance collapses
  result.value = std::max(0.0, raw);
  return result;
}

double kl_estimate(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return kl_estimate_detail(a, b).value;
}

DriftTestResult drift_test(const Eigen::MatrixXd& train, const Eigen::MatrixXd& test,
                           int permutations, uint64_t seed, int jobs) {
  if (train.rows() == 0 || test.rows() == 0) throw DataError("drift_test: empty sample");
  if (train.cols() != test.cols()) {
    throw DataError("drift_test: dim mismatch " + std::to_string(train.cols()) + " vs " +
                    std::to_string(test.cols()));
  }
  if (permutations < 1) throw DataError("drift_test: permutations must be >= 1");

  const int n = static_cast<int>(train.rows());
  const int m = static_cast<int>(test.rows());
  Eigen::MatrixXd pooled(n + m, train.cols());
  pooled.topRows(n) = train;
  pooled.bottomRows(m) = test;

  DriftTestResult result;
  const auto observed = kl_estimate_detail(train, test);
  result.kl_hat = observed.value;
  result.degenerate = observed.degenerate;
  result.null_kls.assign(static_cast<size_t>(permutations), 0.0);

  std::atomic<int> next{0};
  auto worker = [&] {
    std::vector<int> idx(static_cast<size_t>(n + m));
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= permutations) return;
      std::iota(idx.begin(), idx.end(), 0);
      Rng rng(derive_seed(seed, {static_cast<uint64_t>(r)}));
      std::shuffle(idx.begin(), idx.end(), rng);
      Eigen::MatrixXd pa(n, pooled.cols());
      Eigen::MatrixXd pb(m, pooled.cols());
      for (int i = 0; i < n; ++i) pa.row(i) = pooled.row(idx[static_cast<size_t>(i)]);
      for (int i = 0; i < m; ++i) pb.row(i) = pooled.row(idx[static_cast<size_t>(n + i)]);
      result.null_kls[static_cast<size_t>(r)] = kl_estimate(pa, pb);
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

  long ge = 0;
  for (double v : result.null_kls) {
    if (v >= result.kl_hat) ++ge;
  }
  result.p_value = static_cast<double>(ge + 1) / static_cast<double>(permutations + 1);
  return result;
}

DriftTestResult drift_test(const Dataset& train, const Dataset& test, int permutations,
                           uint64_t seed, int jobs) {
  return drift_test(train.features(), test.features(), permutations, seed, jobs);
}

double wasserstein(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const int n = static_cast<int>(a.rows());
  if (n == 0) throw DataError("wasserstein: empty point sets");
  if (b.rows() != n) {
    throw DataError("wasserstein: sizes differ (" + std::to_string(n) + " vs " +
                    std::to_string(b.rows()) + "); resample to equal sizes upstream");
  }
  if (a.cols() != b.cols()) {
    throw DataError("wasserstein: dim mismatch " + std::to_string(a.cols()) + " vs " +
                    std::to_string(b.cols()));
  }
  // squared-Euclidean cost matrix via |x|^2 + |y|^2 - 2 x.y
  Eigen::MatrixXd cost = -2.0 * a * b.transpose();
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  cost.colwise() += an;
  cost.rowwise() += bn.transpose();
  cost = cost.cwiseMax(0.0);  // clip tiny negatives from cancellation

  const auto solution = solve_assignment(cost);
  return std::sqrt(std::max(0.0, solution.cost / static_cast<double>(n)));
}

MetricsReport evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                       int num_classes) {
  if (predictions.size() != truth.size()) {
    throw DataError("evaluate: predictions (" + std::to_string(predictions.size()) +
                    ") and truth (" + std::to_string(truth.size()) + ") differ in length");
  }
  MetricsReport report;
  report.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  for (size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predictions[i];
    if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
      throw DataError("evaluate: label out of range at index " + std::to_string(i));
    }
    report.confusion(t, p)++;
  }
  report.precision.resize(static_cast<size_t>(num_classes));
  report.recall.resize(static_cast<size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    const int tp = report.confusion(c, c);
    const int col = report.confusion.col(c).sum();
    const int row = report.confusion.row(c).sum();
    if (col > 0) report.precision[static_cast<size_t>(c)] = static_cast<double>(tp) / col;
    if (row > 0) report.recall[static_cast<size_t>(c)] = static_cast<double>(tp) / row;
  }
  return report;
}

namespace {

std::pair<std::optional<double>, std::optional<double>> mean_sd(
    const std::vector<double>& values) {
  if (values.empty()) return {std::nullopt, std::nullopt};
  const double mean =
      std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace

MetricsReport replicate_summary(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw DataError("replicate_summary: no reports");
  const int num_classes = reports.front().num_classes();
  MetricsReport summary;
  summary.confusion = Eigen::MatrixXi::Zero(num_classes, num_classes);
  summary.precision.resize(static_cast<size_t>(num_classes));
  summary.recall.resize(static_cast<size_t>(num_classes));
  summary.precision_sd.resize(static_cast<size_t>(num_classes));
  summary.recall_sd.resize(static_cast<size_t>(num_classes));
  for (const auto& r : reports) {
    if (r.num_classes() != num_classes) {
      throw DataError("replicate_summary: reports disagree on class count");
    }
    if (r.confusion.rows() == num_classes) summary.confusion += r.confusion;
  }
  for (int c = 0; c < num_classes; ++c) {
    std::vector<double> prec, rec;
    for (const auto& r : reports) {
      if (r.precision[static_cast<size_t>(c)]) prec.push_back(*r.precision[static_cast<size_t>(c)]);
      if (r.recall[static_cast<size_t>(c)]) rec.push_back(*r.recall[static_cast<size_t>(c)]);
    }
    std::tie(summary.precision[static_cast<size_t>(c)], summary.precision_sd[static_cast<size_t>(c)]) =
        mean_sd(prec);
    std::tie(summary.recall[static_cast<size_t>(c)], summary.recall_sd[static_cast<size_t>(c)]) =
        mean_sd(rec);
  }
  return summary;
}

}  // namespace emmc
