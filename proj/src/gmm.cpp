#include "emmc/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "emmc/errors.hpp"
#include "emmc/rng.hpp"

namespace emmc {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454836;
}

Eigen::MatrixXd cholesky_spd(const Eigen::MatrixXd& m, const std::string& what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NumericError(what + ": matrix is not symmetric positive definite");
  }
  return llt.matrixL();
}

GmmModel::GmmModel(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw NumericError("gmm: needs at least one component");
  dim_ = static_cast<int>(components_.front().mean.size());
  double wsum = 0.0;
  for (size_t k = 0; k < components_.size(); ++k) {
    const auto& c = components_[k];
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_) {
      throw NumericError("gmm: component " + std::to_string(k) + " dim mismatch");
    }
    if (c.weight <= 0.0) {
      throw NumericError("gmm: component " + std::to_string(k) + " weight must be > 0");
    }
    wsum += c.weight;
    Eigen::MatrixXd L = cholesky_spd(c.cov, "gmm component " + std::to_string(k));
    double log_det = 0.0;
    for (int i = 0; i < dim_; ++i) log_det += std::log(L(i, i));
    log_norm_.push_back(-0.5 * dim_ * kLogTwoPi - log_det);
    chol_.push_back(std::move(L));
  }
  if (std::abs(wsum - 1.0) > 1e-12) {
    throw NumericError("gmm: weights sum to " + std::to_string(wsum) + ", expected 1");
  }
}

Eigen::MatrixXd GmmModel::component_log_joint(const Eigen::MatrixXd& X) const {
  if (X.cols() != dim_) {
    throw NumericError("gmm: query dim " + std::to_string(X.cols()) + " != model dim " +
                       std::to_string(dim_));
  }
  const auto n = X.rows();
  Eigen::MatrixXd out(n, k());
  for (int c = 0; c < k(); ++c) {
    // Solve L Z = (X - mu)^T for all samples at once; quadform_i = |z_i|^2.
    Eigen::MatrixXd ct =
        (X.rowwise() - components_[static_cast<size_t>(c)].mean.transpose()).transpose();
    chol_[static_cast<size_t>(c)].triangularView<Eigen::Lower>().solveInPlace(ct);
    const double c0 = std::log(components_[static_cast<size_t>(c)].weight) +
                      log_norm_[static_cast<size_t>(c)];
    out.col(c) = (c0 - 0.5 * ct.colwise().squaredNorm().transpose().array()).matrix();
  }
  return out;
}

double GmmModel::log_density(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd lj = component_log_joint(x.transpose());
  const double mx = lj.row(0).maxCoeff();
  return mx + std::log((lj.row(0).array() - mx).exp().sum());
}

Eigen::VectorXd GmmModel::log_density_batch(const Eigen::MatrixXd& X) const {
  const Eigen::MatrixXd lj = component_log_joint(X);
  const Eigen::VectorXd mx = lj.rowwise().maxCoeff();
  return mx + (lj.colwise() - mx).array().exp().rowwise().sum().log().matrix();
}

Eigen::MatrixXd GmmModel::sample(int n, uint64_t seed) const {
  if (n < 0) throw NumericError("gmm sample: n must be >= 0");
  Eigen::MatrixXd out(n, dim_);
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double u = unif(rng);
    double acc = 0.0;
    int c = k() - 1;
    for (int j = 0; j < k(); ++j) {
      acc += components_[static_cast<size_t>(j)].weight;
      if (u < acc) {
        c = j;
        break;
      }
    }
    Eigen::VectorXd z(dim_);
    for (int j = 0; j < dim_; ++j) z[j] = normal(rng);
    out.row(i) = (components_[static_cast<size_t>(c)].mean +
                  chol_[static_cast<size_t>(c)] * z)
                     .transpose();
  }
  return out;
}

namespace {

// Farthest-point center seeding followed by a few Lloyd steps. Returns hard
// assignments.
std::vector<int> kmeans_init(const Eigen::MatrixXd& X, int k, int lloyd_steps, Rng& rng) {
  const auto n = X.rows();
  std::vector<Eigen::Index> centers;
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centers.push_back(pick(rng));
  Eigen::VectorXd dist2 =
      (X.rowwise() - X.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    Eigen::Index far = 0;
    dist2.maxCoeff(&far);
    centers.push_back(far);
    dist2 = dist2.cwiseMin((X.rowwise() - X.row(far)).rowwise().squaredNorm());
  }

  Eigen::MatrixXd mu(k, X.cols());
  for (int c = 0; c < k; ++c) mu.row(c) = X.row(centers[static_cast<size_t>(c)]);

  std::vector<int> assign(static_cast<size_t>(n), 0);
  for (int step = 0; step <= lloyd_steps; ++step) {
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bestd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (X.row(i) - mu.row(c)).squaredNorm();
        if (d < bestd) {
          bestd = d;
          best = c;
        }
      }
      assign[static_cast<size_t>(i)] = best;
    }
    if (step == lloyd_steps) break;
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, X.cols());
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<size_t>(i)]) += X.row(i);
      counts[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) {
        mu.row(c) = sums.row(c) / counts[static_cast<size_t>(c)];
      }
    }
  }
  return assign;
}

struct EmState {
  Eigen::VectorXd weights;             // K
  Eigen::MatrixXd means;               // K x d
  std::vector<Eigen::MatrixXd> covs;   // K of d x d
};

GmmModel to_model(const EmState& s) {
  std::vector<GaussianComponent> comps;
  for (int c = 0; c < s.weights.size(); ++c) {
    comps.push_back({s.weights[c], s.means.row(c).transpose(), s.covs[static_cast<size_t>(c)]});
  }
  return GmmModel(std::move(comps));
}

}  // namespace

std::pair<GmmModel, FitReport> fit_em(const Eigen::MatrixXd& X, int k, const EmOptions& opts,
                                      uint64_t seed) {
  const auto n = X.rows();
  const auto d = X.cols();
  if (n == 0) throw DataError("fit_em: empty data");
  if (k < 1) throw DataError("fit_em: k must be >= 1");
  if (n < k) {
    throw DataError("fit_em: n=" + std::to_string(n) + " < k=" + std::to_string(k));
  }
  if (opts.tol <= 0.0) throw DataError("fit_em: tol must be > 0");
  if (opts.reg < 0.0) throw DataError("fit_em: reg must be >= 0");

  const Eigen::RowVectorXd global_mean = X.colwise().mean();
  const Eigen::MatrixXd Xg = X.rowwise() - global_mean;
  const Eigen::MatrixXd global_cov =
      (Xg.transpose() * Xg) / static_cast<double>(n) +
      std::max(opts.reg, 1e-10) * Eigen::MatrixXd::Identity(d, d);

  Rng rng(seed);
  const auto assign = kmeans_init(X, k, opts.kmeans_steps, rng);

  EmState state;
  state.weights.resize(k);
  state.means.resize(k, d);
  state.covs.assign(static_cast<size_t>(k), Eigen::MatrixXd::Zero(d, d));
  for (int c = 0; c < k; ++c) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (assign[static_cast<size_t>(i)] == c) idx.push_back(i);
    }
    if (idx.empty()) {
      state.weights[c] = 1.0 / (2.0 * n);
      state.means.row(c) = global_mean;
      state.covs[static_cast<size_t>(c)] = global_cov;
      continue;
    }
    state.weights[c] = static_cast<double>(idx.size()) / static_cast<double>(n);
    Eigen::RowVectorXd mu = Eigen::RowVectorXd::Zero(d);
    for (auto i : idx) mu += X.row(i);
    mu /= static_cast<double>(idx.size());
    state.means.row(c) = mu;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (auto i : idx) {
      const Eigen::RowVectorXd r = X.row(i) - mu;
      cov += r.transpose() * r;
    }
    cov /= static_cast<double>(idx.size());
    cov += std::max(opts.reg, 1e-10) * Eigen::MatrixXd::Identity(d, d);
    state.covs[static_cast<size_t>(c)] = cov;
  }
  state.weights /= state.weights.sum();

  FitReport report;
  auto model = to_model(state);

  // log responsibilities + total log-likelihood of the current parameters
  auto e_step = [&](const GmmModel& m, Eigen::MatrixXd& resp) {
    const Eigen::MatrixXd lj = m.component_log_joint(X);
    const Eigen::VectorXd mx = lj.rowwise().maxCoeff();
    const Eigen::VectorXd lse =
        mx + (lj.colwise() - mx).array().exp().rowwise().sum().log().matrix();
    resp = (lj.colwise() - lse).array().exp().matrix();
    return lse.sum();
  };

  Eigen::MatrixXd resp;
  double ll = e_step(model, resp);
  report.trace.push_back(ll);

  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    // M-step
    Eigen::VectorXd nk = resp.colwise().sum();
    for (int c = 0; c < k; ++c) {
      if (nk[c] < 1e-10) {
        // collapsed component: restart it at the worst-fit point
        const Eigen::VectorXd ld = model.log_density_batch(X);
        Eigen::Index worst = 0;
        ld.minCoeff(&worst);
        state.means.row(c) = X.row(worst);
        state.covs[static_cast<size_t>(c)] = global_cov;
        state.weights[c] = 1.0 / k;
        state.weights /= state.weights.sum();
        continue;
      }
      state.weights[c] = nk[c] / static_cast<double>(n);
      const Eigen::RowVectorXd mu = (resp.col(c).transpose() * X) / nk[c];
      state.means.row(c) = mu;
      const Eigen::MatrixXd centered = X.rowwise() - mu;
      Eigen::MatrixXd cov =
          (centered.transpose() * (resp.col(c).asDiagonal() * centered)) / nk[c];
      cov += opts.reg * Eigen::MatrixXd::Identity(d, d);
      // guard against zero-reg degenerate clusters
      if (opts.reg == 0.0) {
        Eigen::LLT<Eigen::MatrixXd> probe(cov);
        if (probe.info() != Eigen::Success) {
          cov += 1e-10 * Eigen::MatrixXd::Identity(d, d);
        }
      }
      state.covs[static_cast<size_t>(c)] = cov;
    }
    state.weights /= state.weights.sum();

    model = to_model(state);
    const double ll_new = e_step(model, resp);
    report.trace.push_back(ll_new);
    report.iterations = iter;
    if (ll_new - ll < opts.tol) {
      report.converged = true;
      ll = ll_new;
      break;
    }
    ll = ll_new;
  }

  report.final_log_likelihood = ll;
  return {std::move(model), std::move(report)};
}

std::vector<std::pair<int, double>> scree(const Eigen::MatrixXd& X, const std::vector<int>& ks,
                                          const EmOptions& opts, uint64_t seed) {
  if (ks.empty()) throw DataError("scree: empty K range");
  std::vector<int> sorted = ks;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<int, double>> out;
  for (int k : sorted) {
    const auto [model, report] = fit_em(X, k, opts, derive_seed(seed, {static_cast<uint64_t>(k)}));
    out.emplace_back(k, report.final_log_likelihood);
  }
  return out;
}

int select_k_bic(const Eigen::MatrixXd& X, const std::vector<int>& ks, const EmOptions& opts,
                 uint64_t seed) {
  if (ks.empty()) throw DataError("select_k_bic: empty K range");
  const double n = static_cast<double>(X.rows());
  const double d = static_cast<double>(X.cols());
  double best_bic = std::numeric_limits<double>::infinity();
  int best_k = ks.front();
  for (int k : ks) {
    const auto [model, report] = fit_em(X, k, opts, derive_seed(seed, {static_cast<uint64_t>(k)}));
    const double params = (k - 1) + k * d + k * d * (d + 1) / 2.0;
    const double bic = -2.0 * report.final_log_likelihood + params * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best_k = k;
    }
  }
  return best_k;
}

}  // namespace emmc
