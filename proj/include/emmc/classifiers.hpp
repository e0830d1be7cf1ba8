#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "emmc/dataset.hpp"

namespace emmc {

enum class ClassifierKind { Logistic, GaussianNB };

ClassifierKind classifier_kind_from_string(const std::string& name);
std::string to_string(ClassifierKind kind);

// Logistic parameters act on standardized features: p = sigmoid(w.(x-mu)/sigma + b).
struct LogisticModel {
  Eigen::VectorXd w;
  double b = 0.0;
  Eigen::VectorXd mu;     // per-feature training mean
  Eigen::VectorXd sigma;  // per-feature training std (floored)
};

struct GaussianNBModel {
  Eigen::VectorXd mean_a, var_a;
  Eigen::VectorXd mean_b, var_b;
  double prior_a = 0.5, prior_b = 0.5;
};

struct LogisticOptions {
  double lambda = 1e-4;      // L2 strength on w (intercept unregularized)
  int max_iter = 5000;
  double grad_tol = 1e-6;
  bool regularize_intercept = false;
};

struct ClassifierFitReport {
  int iterations = 0;
  bool converged = false;
  double final_grad_norm = 0.0;
  std::vector<double> loss_trace;
};

// Binary posterior over an ordered class pair (a, b); p_b = 1 - p_a exactly.
class BinaryClassifier {
 public:
  BinaryClassifier(std::pair<int, int> class_pair, LogisticModel model);
  BinaryClassifier(std::pair<int, int> class_pair, GaussianNBModel model);

  ClassifierKind kind() const;
  const std::pair<int, int>& class_pair() const { return class_pair_; }
  int dim() const;

  std::pair<double, double> predict_proba(const Eigen::VectorXd& x) const;
  // P(class == class_pair.first | x); the pair version derives from this.
  double proba_first(const Eigen::VectorXd& x) const;

  const LogisticModel& logistic() const;
  const GaussianNBModel& gaussian_nb() const;

 private:
  std::pair<int, int> class_pair_;
  std::variant<LogisticModel, GaussianNBModel> model_;
};

// Fit on data holding exactly the two classes of `pair` (order defines which
// class the sigmoid tracks). Seed is accepted for interface uniformity; both
// native fits are deterministic.
BinaryClassifier fit_binary(const Dataset& data, std::pair<int, int> pair, ClassifierKind kind,
                            const LogisticOptions& opts = {}, uint64_t seed = 0,
                            ClassifierFitReport* report = nullptr);

// Same, inferring the pair from the two labels present (ascending).
BinaryClassifier fit_binary(const Dataset& data, ClassifierKind kind,
                            const LogisticOptions& opts = {}, uint64_t seed = 0,
                            ClassifierFitReport* report = nullptr);

// Regularized mean binary cross-entropy and its gradient wrt (w, b) on
// already-standardized features. Exposed for gradient verification.
double logistic_loss_grad(const Eigen::MatrixXd& X, const std::vector<double>& y,
                          const Eigen::VectorXd& w, double b, const LogisticOptions& opts,
                          Eigen::VectorXd* grad_w = nullptr, double* grad_b = nullptr);

// Softmax-head multinomial regression, used as the pooled-data baseline.
class MultinomialLogistic {
 public:
  MultinomialLogistic(Eigen::MatrixXd W, Eigen::VectorXd b, Eigen::VectorXd mu,
                      Eigen::VectorXd sigma);

  int num_classes() const { return static_cast<int>(W_.rows()); }
  int dim() const { return static_cast<int>(W_.cols()); }
  Eigen::VectorXd predict_proba(const Eigen::VectorXd& x) const;
  int predict(const Eigen::VectorXd& x) const;
  std::vector<int> predict_batch(const Eigen::MatrixXd& X) const;

 private:
  Eigen::MatrixXd W_;
  Eigen::VectorXd b_;
  Eigen::VectorXd mu_, sigma_;
};

MultinomialLogistic fit_multinomial(const Dataset& data, const LogisticOptions& opts = {},
                                    uint64_t seed = 0, ClassifierFitReport* report = nullptr);

}  // namespace emmc
