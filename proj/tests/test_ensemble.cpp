#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "emmc/ensemble.hpp"
#include "emmc/errors.hpp"
#include "helpers.hpp"

using namespace emmc;

namespace {

// A node whose classifier and density are exact for single-Gaussian classes
// with diagonal covariances: GaussianNB with the true parameters plus a
// two-component GMM with the true within-node class split.
NodeSummary analytic_node(int id, std::pair<int, int> classes,
                          const std::vector<Eigen::VectorXd>& class_means,
                          const std::vector<Eigen::VectorXd>& class_vars, double frac_first,
                          int n) {
  const int d = static_cast<int>(class_means.front().size());
  const auto& [a, b] = classes;
  GaussianNBModel nb;
  nb.mean_a = class_means[static_cast<size_t>(a)];
  nb.var_a = class_vars[static_cast<size_t>(a)];
  nb.mean_b = class_means[static_cast<size_t>(b)];
  nb.var_b = class_vars[static_cast<size_t>(b)];
  nb.prior_a = frac_first;
  nb.prior_b = 1.0 - frac_first;

  auto diag_cov = [&](int cls) {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    cov.diagonal() = class_vars[static_cast<size_t>(cls)];
    return cov;
  };
  GmmModel gmm({{frac_first, class_means[static_cast<size_t>(a)], diag_cov(a)},
                {1.0 - frac_first, class_means[static_cast<size_t>(b)], diag_cov(b)}});
  return NodeSummary{id, n, classes, BinaryClassifier(classes, nb), std::move(gmm), "{}"};
}

struct AnalyticSetup {
  std::vector<NodeSummary> summaries;
  std::vector<Eigen::VectorXd> class_means, class_vars;
  Eigen::VectorXd class_mass;  // unnormalized: sum_j n_j * P(class|j)
};

AnalyticSetup analytic_setup(TopologyKind kind, int num_classes, uint64_t seed) {
  std::mt19937_64 rng(seed);
  AnalyticSetup setup;
  for (int m = 0; m < num_classes; ++m) {
    setup.class_means.push_back(4.0 * test_helpers::random_matrix(2, 1, rng));
    Eigen::VectorXd var(2);
    var << 0.5 + 0.5 * std::abs(test_helpers::random_matrix(1, 1, rng)(0, 0)),
        0.5 + 0.5 * std::abs(test_helpers::random_matrix(1, 1, rng)(0, 0));
    setup.class_vars.push_back(var);
  }
  const Topology topo{kind, num_classes};
  const auto pairs = topo.node_class_pairs();
  std::uniform_int_distribution<int> size(100, 900);
  std::uniform_real_distribution<double> frac(0.25, 0.75);
  setup.class_mass = Eigen::VectorXd::Zero(num_classes);
  for (size_t j = 0; j < pairs.size(); ++j) {
    const int n = size(rng);
    const double f = frac(rng);
    setup.summaries.push_back(analytic_node(static_cast<int>(j), pairs[j], setup.class_means,
                                            setup.class_vars, f, n));
    setup.class_mass[pairs[j].first] += n * f;
    setup.class_mass[pairs[j].second] += n * (1.0 - f);
  }
  return setup;
}

// Global Bayes posterior for the generating mixture, computed independently.
Eigen::VectorXd bayes_posterior(const AnalyticSetup& setup, const Eigen::VectorXd& x) {
  const int m = static_cast<int>(setup.class_means.size());
  Eigen::VectorXd joint(m);
  for (int c = 0; c < m; ++c) {
    double log_lik = 0.0;
    for (Eigen::Index jj = 0; jj < x.size(); ++jj) {
      const double v = setup.class_vars[static_cast<size_t>(c)][jj];
      const double diff = x[jj] - setup.class_means[static_cast<size_t>(c)][jj];
      log_lik += -0.5 * std::log(2.0 * M_PI * v) - 0.5 * diff * diff / v;
    }
    joint[c] = setup.class_mass[c] / setup.class_mass.sum() * std::exp(log_lik);
  }
  return joint / joint.sum();
}

NodeSummary simple_node(int id, std::pair<int, int> classes, double mean_shift, int n) {
  std::vector<Eigen::VectorXd> means, vars;
  const int num_classes = std::max(classes.first, classes.second) + 1;
  for (int c = 0; c < num_classes; ++c) {
    means.push_back(Eigen::VectorXd::Constant(2, c * mean_shift));
    vars.push_back(Eigen::VectorXd::Ones(2));
  }
  return analytic_node(id, classes, means, vars, 0.5, n);
}

}  // namespace

TEST_CASE("build computes priors and enforces coverage") {
  std::vector<NodeSummary> two{simple_node(0, {0, 1}, 3.0, 100), simple_node(1, {0, 2}, 3.0, 300)};
  const auto model = EnsembleModel::build(two);
  CHECK(model.priors()[0] == doctest::Approx(0.25));
  CHECK(model.priors()[1] == doctest::Approx(0.75));
  CHECK(model.num_classes() == 3);

  const auto single = EnsembleModel::build({simple_node(0, {0, 1}, 3.0, 42)});
  CHECK(single.priors()[0] == doctest::Approx(1.0));

  std::vector<NodeSummary> star{simple_node(0, {0, 1}, 3.0, 100),
                                simple_node(1, {0, 2}, 3.0, 100),
                                simple_node(2, {0, 3}, 3.0, 100)};
  CHECK_NOTHROW(EnsembleModel::build(star, 4));
  star.pop_back();
  CHECK_THROWS_WITH_AS(EnsembleModel::build(star, 4), doctest::Contains("class 3 uncovered"),
                       DataError);
}

TEST_CASE("single-node posterior equals the local classifier") {
  const auto summary = simple_node(0, {0, 1}, 4.0, 50);
  const auto model = EnsembleModel::build({summary});
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 3.0);
    const auto res = model.posterior(x);
    const auto [pa, pb] = summary.classifier.predict_proba(x);
    CHECK(res.posterior[0] == doctest::Approx(pa).epsilon(1e-12));
    CHECK(res.posterior[1] == doctest::Approx(pb).epsilon(1e-12));
    CHECK(res.weights[0] == doctest::Approx(1.0));
  }
}

TEST_CASE("equal nodes share the weight equally") {
  // identical GMMs and counts; different class pairs
  auto a = simple_node(0, {0, 1}, 0.0, 200);  // mean shift 0: same density everywhere
  auto b = simple_node(1, {0, 2}, 0.0, 200);
  const auto model = EnsembleModel::build({a, b});
  std::mt19937_64 rng(5);
  for (int i = 0; i < 25; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 2.0);
    const auto res = model.posterior(x);
    CHECK(res.weights[0] == doctest::Approx(0.5).epsilon(1e-12));
    const auto pa0 = a.classifier.proba_first(x);
    const auto pa1 = b.classifier.proba_first(x);
    CHECK(res.posterior[0] == doctest::Approx(0.5 * pa0 + 0.5 * pa1).epsilon(1e-12));
  }
}

TEST_CASE("plug-in construction reproduces the global Bayes posterior") {
  for (const auto kind :
       {TopologyKind::Star, TopologyKind::Ring, TopologyKind::FullyConnected}) {
    const auto setup = analytic_setup(kind, 4, 17);
    const auto model = EnsembleModel::build(setup.summaries);
    std::mt19937_64 rng(101);
    for (int i = 0; i < 1000; ++i) {
      const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 4.0);
      const Eigen::VectorXd expected = bayes_posterior(setup, x);
      const Eigen::VectorXd actual = model.posterior(x).posterior;
      CHECK((expected - actual).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("posterior sums to one everywhere") {
  const auto setup = analytic_setup(TopologyKind::Ring, 4, 23);
  const auto model = EnsembleModel::build(setup.summaries);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 8.0);
    CHECK(std::abs(model.posterior(x).posterior.sum() - 1.0) <= 1e-9);
  }
}

TEST_CASE("weights ignore a common scaling of the node counts") {
  auto setup = analytic_setup(TopologyKind::Star, 4, 31);
  auto scaled = setup.summaries;
  for (auto& s : scaled) s.n *= 7;
  const auto base = EnsembleModel::build(setup.summaries);
  const auto big = EnsembleModel::build(scaled);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 4.0);
    CHECK((base.posterior(x).weights - big.posterior(x).weights).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax is shift invariant") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd v = test_helpers::random_matrix(5, 1, rng, 10.0);
    const Eigen::VectorXd shifted = v.array() + 123.456;
    CHECK((softmax(v) - softmax(shifted)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(softmax(v).sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  // extreme underflow territory
  Eigen::VectorXd tiny(3);
  tiny << -5000.0, -5003.0, -5001.0;
  const Eigen::VectorXd w = softmax(tiny);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w[0] > w[2]);
  CHECK(w[2] > w[1]);
}

TEST_CASE("posterior is invariant to node order") {
  auto setup = analytic_setup(TopologyKind::FullyConnected, 4, 43);
  auto shuffled = setup.summaries;
  std::mt19937_64 rng(9);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto a = EnsembleModel::build(setup.summaries);
  const auto b = EnsembleModel::build(shuffled);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 4.0);
    CHECK((a.posterior(x).posterior - b.posterior(x).posterior).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("predict takes the argmax with lowest-id ties") {
  const auto setup = analytic_setup(TopologyKind::Star, 4, 3);
  const auto model = EnsembleModel::build(setup.summaries);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 4.0);
    const auto post = model.posterior(x).posterior;
    Eigen::Index expected = 0;
    post.maxCoeff(&expected);
    CHECK(model.predict(x) == static_cast<int>(expected));
  }

  // symmetric two-node construction: classes 1 and 2 share identical geometry
  // around the query point, so their posteriors tie bit-for-bit
  Eigen::VectorXd far = Eigen::VectorXd::Zero(2);
  far[0] = 10.0;
  std::vector<Eigen::VectorXd> means{far, Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(2)};
  std::vector<Eigen::VectorXd> vars(3, Eigen::VectorXd::Ones(2));
  std::vector<NodeSummary> nodes{analytic_node(0, {0, 1}, means, vars, 0.5, 100),
                                 analytic_node(1, {0, 2}, means, vars, 0.5, 100)};
  const auto tie_model = EnsembleModel::build(nodes);
  const Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  const auto post = tie_model.posterior(origin).posterior;
  CHECK(post[1] == post[2]);
  CHECK(post[1] > post[0]);
  CHECK(tie_model.predict(origin) == 1);
}

TEST_CASE("predict_batch matches predict and parallelizes consistently") {
  const auto setup = analytic_setup(TopologyKind::Star, 4, 77);
  const auto model = EnsembleModel::build(setup.summaries);
  std::mt19937_64 rng(21);
  const Eigen::MatrixXd xs = test_helpers::random_matrix(64, 2, rng, 4.0);
  const auto serial = model.predict_batch(xs, 1);
  const auto parallel = model.predict_batch(xs, 4);
  CHECK(serial == parallel);
  for (int i = 0; i < xs.rows(); ++i) {
    CHECK(serial[static_cast<size_t>(i)] == model.predict(xs.row(i).transpose()));
  }
}

TEST_CASE("jensen condition diagnostic") {
  // single node: w = 1 >= c^0 / 1 = 1, never violated
  const auto single = EnsembleModel::build({simple_node(0, {0, 1}, 3.0, 10)});
  std::mt19937_64 rng(31);
  const Eigen::MatrixXd xs = test_helpers::random_matrix(100, 2, rng, 3.0);
  const auto report = single.jensen_condition_report(xs);
  CHECK(report.points == 100);
  CHECK(report.overall_rate == 0.0);
  for (const auto& cell : report.cells) CHECK(cell.violations == 0);

  // two identical nodes: w = 0.5 and c <= 1 so 0.5 >= c/2 holds with equality at c = 1
  const auto two =
      EnsembleModel::build({simple_node(0, {0, 1}, 0.0, 50), simple_node(1, {0, 2}, 0.0, 50)});
  const auto report2 = two.jensen_condition_report(xs);
  CHECK(report2.overall_rate == 0.0);
}

TEST_CASE("dimension mismatches are rejected") {
  const auto model = EnsembleModel::build({simple_node(0, {0, 1}, 3.0, 10)});
  CHECK_THROWS_AS(model.posterior(Eigen::VectorXd::Zero(3)), DataError);

  auto a = simple_node(0, {0, 1}, 3.0, 10);
  std::vector<Eigen::VectorXd> means{Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)};
  std::vector<Eigen::VectorXd> vars(2, Eigen::VectorXd::Ones(3));
  auto b = analytic_node(1, {0, 1}, means, vars, 0.5, 10);
  CHECK_THROWS_AS(EnsembleModel::build({a, b}), DataError);
}
