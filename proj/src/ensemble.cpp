#include "emmc/ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <set>
#include <thread>

#include "emmc/errors.hpp"

namespace emmc {

Eigen::VectorXd softmax(const Eigen::VectorXd& log_scores) {
  const double mx = log_scores.maxCoeff();
  Eigen::VectorXd e = (log_scores.array() - mx).exp();
  return e / e.sum();
}

EnsembleModel EnsembleModel::build(std::vector<NodeSummary> summaries, int num_classes) {
  if (summaries.empty()) throw DataError("ensemble: no node summaries");
  EnsembleModel model;
  model.dim_ = summaries.front().gmm.dim();

  long total_n = 0;
  int max_class = 0;
  for (const auto& s : summaries) {
    s.validate();
    if (s.gmm.dim() != model.dim_) {
      throw DataError("ensemble: node " + std::to_string(s.node_id) + " dim " +
                      std::to_string(s.gmm.dim()) + " != " + std::to_string(model.dim_));
    }
    total_n += s.n;
    max_class = std::max({max_class, s.classes.first, s.classes.second});
  }
  if (num_classes != 0 && num_classes < max_class + 1) {
    throw DataError("ensemble: summaries hold class " + std::to_string(max_class) +
                    " but only " + std::to_string(num_classes) + " classes were expected");
  }
  model.num_classes_ = num_classes != 0 ? num_classes : max_class + 1;

  std::set<int> covered;
  for (const auto& s : summaries) {
    covered.insert(s.classes.first);
    covered.insert(s.classes.second);
  }
  std::string missing;
  for (int c = 0; c < model.num_classes_; ++c) {
    if (covered.find(c) == covered.end()) {
      missing += (missing.empty() ? "" : ", ");
      missing += "class " + std::to_string(c) + " uncovered";
    }
  }
  if (!missing.empty()) throw DataError("ensemble: " + missing);

  model.priors_.resize(static_cast<Eigen::Index>(summaries.size()));
  for (size_t j = 0; j < summaries.size(); ++j) {
    model.priors_[static_cast<Eigen::Index>(j)] =
        static_cast<double>(summaries[j].n) / static_cast<double>(total_n);
  }
  model.log_priors_ = model.priors_.array().log();
  model.summaries_ = std::move(summaries);
  return model;
}

PosteriorResult EnsembleModel::posterior(const Eigen::VectorXd& x) const {
  if (x.size() != dim_) {
    throw DataError("ensemble: query dim " + std::to_string(x.size()) + " != model dim " +
                    std::to_string(dim_));
  }
  const int j_count = num_nodes();
  PosteriorResult result;
  result.log_node_densities.resize(j_count);
  for (int j = 0; j < j_count; ++j) {
    result.log_node_densities[j] = summaries_[static_cast<size_t>(j)].gmm.log_density(x);
  }
  result.weights = softmax(result.log_node_densities + log_priors_);

  result.posterior = Eigen::VectorXd::Zero(num_classes_);
  for (int j = 0; j < j_count; ++j) {
    const auto& s = summaries_[static_cast<size_t>(j)];
    const auto [pa, pb] = s.classifier.predict_proba(x);
    result.posterior[s.classes.first] += result.weights[j] * pa;
    result.posterior[s.classes.second] += result.weights[j] * pb;
  }
  return result;
}

int EnsembleModel::predict(const Eigen::VectorXd& x) const {
  const auto post = posterior(x).posterior;
  int best = 0;
  for (int m = 1; m < num_classes_; ++m) {
    if (post[m] > post[best]) best = m;  // strict: ties keep the lowest id
  }
  return best;
}

namespace {

// Chunked parallel loop; results written by index so scheduling cannot change
// the output.
void parallel_over(int n, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || n < 2 * jobs) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> workers;
  std::atomic<int> next{0};
  for (int t = 0; t < jobs; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        body(i);
      }
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace

std::vector<int> EnsembleModel::predict_batch(const Eigen::MatrixXd& X, int jobs) const {
  std::vector<int> out(static_cast<size_t>(X.rows()));
  parallel_over(static_cast<int>(X.rows()), jobs, [&](int i) {
    out[static_cast<size_t>(i)] = predict(X.row(i).transpose());
  });
  return out;
}

Eigen::MatrixXd EnsembleModel::posterior_batch(const Eigen::MatrixXd& X, int jobs) const {
  Eigen::MatrixXd out(X.rows(), num_classes_);
  parallel_over(static_cast<int>(X.rows()), jobs, [&](int i) {
    out.row(i) = posterior(X.row(i).transpose()).posterior.transpose();
  });
  return out;
}

JensenReport EnsembleModel::jensen_condition_report(const Eigen::MatrixXd& xs) const {
  JensenReport report;
  report.points = xs.rows();
  std::map<std::pair<int, int>, std::pair<long, long>> cells;
  long violations = 0;
  long evaluations = 0;
  const double j_count = static_cast<double>(num_nodes());
  for (Eigen::Index i = 0; i < xs.rows(); ++i) {
    const auto res = posterior(xs.row(i).transpose());
    for (int j = 0; j < num_nodes(); ++j) {
      const auto& s = summaries_[static_cast<size_t>(j)];
      const auto [pa, pb] = s.classifier.predict_proba(xs.row(i).transpose());
      for (const auto& [cls, p] :
           {std::pair{s.classes.first, pa}, std::pair{s.classes.second, pb}}) {
        const double bound = std::pow(p, j_count - 1.0) / j_count;
        const bool violated = res.weights[j] < bound;
        auto& cell = cells[{j, cls}];
        cell.second++;
        if (violated) cell.first++;
        evaluations++;
        if (violated) violations++;
      }
    }
  }
  for (const auto& [key, counts] : cells) {
    report.cells.push_back({key.first, key.second, counts.first, counts.second});
  }
  report.overall_rate =
      evaluations == 0 ? 0.0 : static_cast<double>(violations) / static_cast<double>(evaluations);
  return report;
}

}  // namespace emmc
