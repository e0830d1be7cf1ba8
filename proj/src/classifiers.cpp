#include "emmc/classifiers.hpp"

#include <algorithm>
#include <cmath>

#include "emmc/errors.hpp"

namespace emmc {

ClassifierKind classifier_kind_from_string(const std::string& name) {
  if (name == "logistic") return ClassifierKind::Logistic;
  if (name == "gaussian_nb" || name == "gnb") return ClassifierKind::GaussianNB;
  throw ConfigError("unknown classifier '" + name + "' (expected logistic|gaussian_nb)");
}

std::string to_string(ClassifierKind kind) {
  return kind == ClassifierKind::Logistic ? "logistic" : "gaussian_nb";
}

BinaryClassifier::BinaryClassifier(std::pair<int, int> class_pair, LogisticModel model)
    : class_pair_(class_pair), model_(std::move(model)) {}

BinaryClassifier::BinaryClassifier(std::pair<int, int> class_pair, GaussianNBModel model)
    : class_pair_(class_pair), model_(std::move(model)) {}

ClassifierKind BinaryClassifier::kind() const {
  return std::holds_alternative<LogisticModel>(model_) ? ClassifierKind::Logistic
                                                       : ClassifierKind::GaussianNB;
}

int BinaryClassifier::dim() const {
  if (const auto* m = std::get_if<LogisticModel>(&model_)) return static_cast<int>(m->w.size());
  return static_cast<int>(std::get<GaussianNBModel>(model_).mean_a.size());
}

const LogisticModel& BinaryClassifier::logistic() const {
  if (const auto* m = std::get_if<LogisticModel>(&model_)) return *m;
  throw NumericError("classifier: not a logistic model");
}

const GaussianNBModel& BinaryClassifier::gaussian_nb() const {
  if (const auto* m = std::get_if<GaussianNBModel>(&model_)) return *m;
  throw NumericError("classifier: not a gaussian_nb model");
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// sum of per-feature log N(x_j; mean_j, var_j)
double diag_gauss_log_lik(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                          const Eigen::VectorXd& var) {
  constexpr double kLogTwoPi = 1.8378770664093454836;
  double acc = -0.5 * kLogTwoPi * static_cast<double>(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double d = x[j] - mean[j];
    acc += -0.5 * std::log(var[j]) - 0.5 * d * d / var[j];
  }
  return acc;
}

}  // namespace

double BinaryClassifier::proba_first(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw NumericError("classifier: query dim " + std::to_string(x.size()) + " != model dim " +
                       std::to_string(dim()));
  }
  if (const auto* m = std::get_if<LogisticModel>(&model_)) {
    const Eigen::VectorXd xs = (x - m->mu).cwiseQuotient(m->sigma);
    return sigmoid(m->w.dot(xs) + m->b);
  }
  const auto& m = std::get<GaussianNBModel>(model_);
  const double la = std::log(m.prior_a) + diag_gauss_log_lik(x, m.mean_a, m.var_a);
  const double lb = std::log(m.prior_b) + diag_gauss_log_lik(x, m.mean_b, m.var_b);
  return sigmoid(la - lb);
}

std::pair<double, double> BinaryClassifier::predict_proba(const Eigen::VectorXd& x) const {
  const double pa = proba_first(x);
  return {pa, 1.0 - pa};
}

double logistic_loss_grad(const Eigen::MatrixXd& X, const std::vector<double>& y,
                          const Eigen::VectorXd& w, double b, const LogisticOptions& opts,
                          Eigen::VectorXd* grad_w, double* grad_b) {
  const auto n = X.rows();
  const Eigen::VectorXd z = (X * w).array() + b;
  // mean of log(1+exp(-|z|)) + max(z,0) - y*z, numerically stable cross-entropy
  double loss = 0.0;
  Eigen::VectorXd p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = z[i];
    loss += std::log1p(std::exp(-std::abs(zi))) + std::max(zi, 0.0) -
            y[static_cast<size_t>(i)] * zi;
    p[i] = sigmoid(zi);
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * opts.lambda * w.squaredNorm();
  if (opts.regularize_intercept) loss += 0.5 * opts.lambda * b * b;

  if (grad_w != nullptr || grad_b != nullptr) {
    Eigen::VectorXd diff = p;
    for (Eigen::Index i = 0; i < n; ++i) diff[i] -= y[static_cast<size_t>(i)];
    if (grad_w != nullptr) {
      *grad_w = (X.transpose() * diff) / static_cast<double>(n) + opts.lambda * w;
    }
    if (grad_b != nullptr) {
      *grad_b = diff.mean() + (opts.regularize_intercept ? opts.lambda * b : 0.0);
    }
  }
  return loss;
}

namespace {

struct Standardization {
  Eigen::VectorXd mu, sigma;
};

Standardization standardize(const Eigen::MatrixXd& X, Eigen::MatrixXd& Xs) {
  Standardization s;
  s.mu = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - s.mu.transpose();
  s.sigma = (centered.array().square().colwise().mean()).sqrt().matrix();
  for (Eigen::Index j = 0; j < s.sigma.size(); ++j) {
    if (s.sigma[j] < 1e-12) s.sigma[j] = 1.0;  // constant feature: leave unscaled
  }
  Xs = centered.array().rowwise() / s.sigma.transpose().array();
  return s;
}

// Full-batch gradient descent with Armijo backtracking on the given loss.
// Loss must return the objective and fill gradients.
template <typename LossFn, typename Params>
ClassifierFitReport descend(LossFn&& loss_grad, Params& params, int max_iter, double grad_tol) {
  ClassifierFitReport report;
  double step = 1.0;
  auto [loss, grad] = loss_grad(params);
  report.loss_trace.push_back(loss);
  for (int iter = 1; iter <= max_iter; ++iter) {
    const double gnorm = std::sqrt(grad.squaredNorm());
    report.final_grad_norm = gnorm;
    if (gnorm <= grad_tol) {
      report.converged = true;
      break;
    }
    // Armijo: f(p - t g) <= f(p) - c t |g|^2
    constexpr double c = 1e-4;
    step = std::min(step * 2.0, 1e8);
    Params trial = params;
    double trial_loss = 0.0;
    decltype(grad) trial_grad;
    while (true) {
      trial = params;
      trial.axpy(-step, grad);
      std::tie(trial_loss, trial_grad) = loss_grad(trial);
      if (trial_loss <= loss - c * step * grad.squaredNorm()) break;
      step *= 0.5;
      if (step < 1e-18) {  // no representable step decreases the loss
        report.iterations = iter;
        return report;
      }
    }
    params = trial;
    loss = trial_loss;
    grad = trial_grad;
    report.iterations = iter;
    report.loss_trace.push_back(loss);
  }
  if (!report.converged) {
    report.final_grad_norm = std::sqrt(grad.squaredNorm());
  }
  return report;
}

struct WbParams {
  Eigen::VectorXd w;
  double b = 0.0;
  void axpy(double alpha, const Eigen::VectorXd& g) {
    w += alpha * g.head(w.size());
    b += alpha * g[w.size()];
  }
};

struct MatParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  void axpy(double alpha, const Eigen::VectorXd& g) {
    const auto rows = W.rows();
    const auto cols = W.cols();
    W += alpha * Eigen::Map<const Eigen::MatrixXd>(g.data(), rows, cols);
    b += alpha * g.tail(b.size());
  }
};

}  // namespace

BinaryClassifier fit_binary(const Dataset& data, std::pair<int, int> pair, ClassifierKind kind,
                            const LogisticOptions& opts, uint64_t seed,
                            ClassifierFitReport* report) {
  (void)seed;
  const auto present = data.present_classes();
  for (int cls : {pair.first, pair.second}) {
    if (present.find(cls) == present.end()) {
      throw DataError("fit_binary: class " + std::to_string(cls) + " absent from node data");
    }
  }
  if (present.size() != 2) {
    throw DataError("fit_binary: expected exactly 2 classes, found " +
                    std::to_string(present.size()));
  }
  if (!data.features().allFinite()) throw DataError("fit_binary: non-finite features");

  if (kind == ClassifierKind::GaussianNB) {
    const Eigen::MatrixXd Xa = data.features_of_class(pair.first);
    const Eigen::MatrixXd Xb = data.features_of_class(pair.second);
    GaussianNBModel m;
    auto moments = [](const Eigen::MatrixXd& X, Eigen::VectorXd& mean, Eigen::VectorXd& var) {
      mean = X.colwise().mean();
      var = (X.rowwise() - mean.transpose()).array().square().colwise().mean();
      var = var.cwiseMax(1e-9);  // variance floor for constant features
    };
    moments(Xa, m.mean_a, m.var_a);
    moments(Xb, m.mean_b, m.var_b);
    m.prior_a = static_cast<double>(Xa.rows()) / static_cast<double>(data.size());
    m.prior_b = 1.0 - m.prior_a;
    return BinaryClassifier(pair, std::move(m));
  }

  Eigen::MatrixXd Xs;
  const auto stand = standardize(data.features(), Xs);
  std::vector<double> y(static_cast<size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) {
    y[static_cast<size_t>(i)] = data.label(i) == pair.first ? 1.0 : 0.0;
  }

  WbParams params{Eigen::VectorXd::Zero(data.dim()), 0.0};
  auto loss_grad = [&](const WbParams& p) {
    Eigen::VectorXd gw;
    double gb = 0.0;
    const double loss = logistic_loss_grad(Xs, y, p.w, p.b, opts, &gw, &gb);
    Eigen::VectorXd g(p.w.size() + 1);
    g.head(p.w.size()) = gw;
    g[p.w.size()] = gb;
    return std::make_pair(loss, g);
  };
  auto rep = descend(loss_grad, params, opts.max_iter, opts.grad_tol);
  if (report != nullptr) *report = rep;

  LogisticModel m;
  m.w = params.w;
  m.b = params.b;
  m.mu = stand.mu;
  m.sigma = stand.sigma;
  return BinaryClassifier(pair, std::move(m));
}

BinaryClassifier fit_binary(const Dataset& data, ClassifierKind kind, const LogisticOptions& opts,
                            uint64_t seed, ClassifierFitReport* report) {
  const auto present = data.present_classes();
  if (present.size() != 2) {
    throw DataError("fit_binary: expected exactly 2 classes, found " +
                    std::to_string(present.size()));
  }
  auto it = present.begin();
  const int a = *it++;
  const int b = *it;
  return fit_binary(data, {a, b}, kind, opts, seed, report);
}

MultinomialLogistic::MultinomialLogistic(Eigen::MatrixXd W, Eigen::VectorXd b, Eigen::VectorXd mu,
                                         Eigen::VectorXd sigma)
    : W_(std::move(W)), b_(std::move(b)), mu_(std::move(mu)), sigma_(std::move(sigma)) {}

Eigen::VectorXd MultinomialLogistic::predict_proba(const Eigen::VectorXd& x) const {
  if (x.size() != dim()) {
    throw NumericError("multinomial: query dim " + std::to_string(x.size()) + " != " +
                       std::to_string(dim()));
  }
  const Eigen::VectorXd xs = (x - mu_).cwiseQuotient(sigma_);
  Eigen::VectorXd z = W_ * xs + b_;
  const double mx = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - mx).exp();
  return e / e.sum();
}

int MultinomialLogistic::predict(const Eigen::VectorXd& x) const {
  Eigen::Index best = 0;
  predict_proba(x).maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<int> MultinomialLogistic::predict_batch(const Eigen::MatrixXd& X) const {
  std::vector<int> out(static_cast<size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out[static_cast<size_t>(i)] = predict(X.row(i).transpose());
  }
  return out;
}

MultinomialLogistic fit_multinomial(const Dataset& data, const LogisticOptions& opts,
                                    uint64_t seed, ClassifierFitReport* report) {
  (void)seed;
  if (data.empty()) throw DataError("fit_multinomial: empty data");
  const int m = data.num_classes();
  const auto n = data.size();
  const auto d = data.dim();

  Eigen::MatrixXd Xs;
  const auto stand = standardize(data.features(), Xs);

  // one-hot truth
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, m);
  for (int i = 0; i < n; ++i) Y(i, data.label(i)) = 1.0;

  MatParams params{Eigen::MatrixXd::Zero(m, d), Eigen::VectorXd::Zero(m)};
  auto loss_grad = [&](const MatParams& p) {
    Eigen::MatrixXd Z = Xs * p.W.transpose();
    Z.rowwise() += p.b.transpose();
    const Eigen::VectorXd mx = Z.rowwise().maxCoeff();
    const Eigen::MatrixXd E = (Z.colwise() - mx).array().exp().matrix();
    const Eigen::VectorXd sums = E.rowwise().sum();
    // mean cross-entropy: -(1/n) sum log softmax(z)[label]
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      loss -= Z(i, data.label(i)) - mx[i] - std::log(sums[i]);
    }
    loss /= static_cast<double>(n);
    loss += 0.5 * opts.lambda * p.W.squaredNorm();
    if (opts.regularize_intercept) loss += 0.5 * opts.lambda * p.b.squaredNorm();

    const Eigen::MatrixXd P = E.array().colwise() / sums.array();
    const Eigen::MatrixXd D = (P - Y) / static_cast<double>(n);
    Eigen::MatrixXd gW = D.transpose() * Xs + opts.lambda * p.W;
    Eigen::VectorXd gb = D.colwise().sum();
    if (opts.regularize_intercept) gb += opts.lambda * p.b;

    Eigen::VectorXd g(m * d + m);
    Eigen::Map<Eigen::MatrixXd>(g.data(), m, d) = gW;
    g.tail(m) = gb;
    return std::make_pair(loss, g);
  };
  auto rep = descend(loss_grad, params, opts.max_iter, opts.grad_tol);
  if (report != nullptr) *report = rep;

  return MultinomialLogistic(params.W, params.b, stand.mu, stand.sigma);
}

}  // namespace emmc
