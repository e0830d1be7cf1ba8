#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

namespace emmc {

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// Gaussian mixture with full covariances. Cholesky factors are cached at
// construction so density evaluation and sampling never refactorize.
class GmmModel {
 public:
  explicit GmmModel(std::vector<GaussianComponent> components);

  int dim() const { return dim_; }
  int k() const { return static_cast<int>(components_.size()); }
  const std::vector<GaussianComponent>& components() const { return components_; }

  // log sum_k pi_k N(x; mu_k, Sigma_k), evaluated with log-sum-exp. Finite
  // for any finite x.
  double log_density(const Eigen::VectorXd& x) const;
  Eigen::VectorXd log_density_batch(const Eigen::MatrixXd& X) const;
  // Per-component log(pi_k) + log N(x; mu_k, Sigma_k), one row per sample.
  Eigen::MatrixXd component_log_joint(const Eigen::MatrixXd& X) const;

  Eigen::MatrixXd sample(int n, uint64_t seed) const;

 private:
  std::vector<GaussianComponent> components_;
  std::vector<Eigen::MatrixXd> chol_;   // lower-triangular factors
  std::vector<double> log_norm_;        // -d/2 log(2pi) - 1/2 log|Sigma_k|
  int dim_ = 0;
};

struct FitReport {
  double final_log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // total log-likelihood after each EM pass
};

struct EmOptions {
  int max_iter = 500;
  double tol = 1e-6;      // absolute log-likelihood gain
  double reg = 1e-6;      // added to covariance diagonals each M-step
  int kmeans_steps = 5;   // Lloyd refinement steps during initialization
};

// EM with farthest-point k-means seeding. Deterministic given seed.
std::pair<GmmModel, FitReport> fit_em(const Eigen::MatrixXd& X, int k,
                                      const EmOptions& opts = {}, uint64_t seed = 0);

// One fit per K (seed derived per K from `seed`), ordered by K.
std::vector<std::pair<int, double>> scree(const Eigen::MatrixXd& X, const std::vector<int>& ks,
                                          const EmOptions& opts = {}, uint64_t seed = 0);

// Optional BIC-based K selection over the same fits as scree().
int select_k_bic(const Eigen::MatrixXd& X, const std::vector<int>& ks,
                 const EmOptions& opts = {}, uint64_t seed = 0);

// Cholesky of an SPD matrix; throws NumericError (with `what` in the message)
// if the matrix is not SPD.
Eigen::MatrixXd cholesky_spd(const Eigen::MatrixXd& m, const std::string& what);

}  // namespace emmc
