#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "emmc/dataset.hpp"
#include "emmc/errors.hpp"
#include "emmc/gmm.hpp"
#include "emmc/rng.hpp"
#include "helpers.hpp"

using namespace emmc;

namespace {

// High-precision direct mixture density, independent of the log-sum-exp path.
long double direct_log_density(const GmmModel& model, const Eigen::VectorXd& x) {
  constexpr long double kPi = 3.14159265358979323846264338327950288L;
  long double sum = 0.0L;
  const int d = model.dim();
  for (const auto& c : model.components()) {
    const Eigen::MatrixXd inv = c.cov.inverse();
    const long double det = static_cast<long double>(c.cov.determinant());
    const Eigen::VectorXd diff = x - c.mean;
    const long double quad = static_cast<long double>(diff.transpose() * inv * diff);
    const long double norm =
        std::pow(2.0L * kPi, -0.5L * d) * std::pow(det, -0.5L) * std::exp(-0.5L * quad);
    sum += static_cast<long double>(c.weight) * norm;
  }
  return std::log(sum);
}

Eigen::MatrixXd blob_data(int n, int d, int blobs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, blobs - 1);
  Eigen::MatrixXd centers = 4.0 * test_helpers::random_matrix(blobs, d, rng);
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    const int b = pick(rng);
    for (int j = 0; j < d; ++j) x(i, j) = centers(b, j) + noise(rng);
  }
  return x;
}

}  // namespace

TEST_CASE("K=1 EM reduces to the closed form") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = test_helpers::random_matrix(200, 3, rng, 2.0);
  EmOptions opts;
  const auto [model, report] = fit_em(x, 1, opts, 9);
  REQUIRE(model.k() == 1);
  const Eigen::VectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / x.rows() +
                              opts.reg * Eigen::MatrixXd::Identity(3, 3);
  CHECK((model.components()[0].mean - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((model.components()[0].cov - cov).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(model.components()[0].weight == doctest::Approx(1.0));
  CHECK(report.converged);
}

TEST_CASE("log_density of the standard normal at the mode") {
  GmmModel model({{1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}});
  CHECK(model.log_density(Eigen::Vector2d(0, 0)) ==
        doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("log_density symmetry for a mirrored two-component model") {
  Eigen::Vector2d mu(1.5, -2.0);
  GmmModel model({{0.5, mu, Eigen::Matrix2d::Identity()},
                  {0.5, -mu, Eigen::Matrix2d::Identity()}});
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 3.0);
    CHECK(model.log_density(x) == doctest::Approx(model.log_density(-x)).epsilon(1e-12));
  }
}

TEST_CASE("log_density matches a direct-summation oracle") {
  std::mt19937_64 rng(12);
  std::vector<GaussianComponent> comps;
  for (int k = 0; k < 3; ++k) {
    comps.push_back({k == 0 ? 0.5 : 0.25,
                     test_helpers::random_matrix(2, 1, rng, 2.0),
                     test_helpers::random_spd(2, rng)});
  }
  const GmmModel model(comps);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 3.0);
    const double expected = static_cast<double>(direct_log_density(model, x));
    CHECK(model.log_density(x) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("log_density is finite far from the mass and batched evaluation agrees") {
  GmmModel model({{1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}});
  const double far = model.log_density(Eigen::Vector2d(400.0, 0.0));
  CHECK(std::isfinite(far));
  CHECK(far < -1e4);

  std::mt19937_64 rng(5);
  const Eigen::MatrixXd xs = test_helpers::random_matrix(40, 2, rng, 5.0);
  const Eigen::VectorXd batch = model.log_density_batch(xs);
  for (int i = 0; i < xs.rows(); ++i) {
    CHECK(batch[i] == doctest::Approx(model.log_density(xs.row(i).transpose())).epsilon(1e-13));
  }
}

TEST_CASE("density is invariant to component permutation") {
  std::mt19937_64 rng(21);
  std::vector<GaussianComponent> comps;
  for (int k = 0; k < 4; ++k) {
    comps.push_back({0.25, test_helpers::random_matrix(3, 1, rng), test_helpers::random_spd(3, rng)});
  }
  const GmmModel a(comps);
  std::shuffle(comps.begin(), comps.end(), rng);
  const GmmModel b(comps);
  for (int i = 0; i < 30; ++i) {
    const Eigen::VectorXd x = test_helpers::random_matrix(3, 1, rng, 2.0);
    CHECK(a.log_density(x) == doctest::Approx(b.log_density(x)).epsilon(1e-12));
  }
}

TEST_CASE("sampling hits component fractions and moments (fixed seeds)") {
  GmmModel single({{1.0, Eigen::Vector2d(2.0, -1.0), Eigen::Matrix2d::Identity()}});
  CHECK(single.sample(0, 1).rows() == 0);
  const Eigen::MatrixXd draws = single.sample(100000, 31);
  CHECK(std::abs(draws.col(0).mean() - 2.0) < 0.02);
  CHECK(std::abs(draws.col(1).mean() + 1.0) < 0.02);

  GmmModel pair({{0.5, Eigen::Vector2d(-10, 0), Eigen::Matrix2d::Identity()},
                 {0.5, Eigen::Vector2d(10, 0), Eigen::Matrix2d::Identity()}});
  const Eigen::MatrixXd both = pair.sample(100000, 77);
  const double right = (both.col(0).array() > 0.0).count() / 100000.0;
  CHECK(std::abs(right - 0.5) < 0.01);
}

TEST_CASE("EM log-likelihood trace is monotone within slack") {
  for (uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    const Eigen::MatrixXd x = blob_data(300, 2, 3, seed);
    const auto [model, report] = fit_em(x, 3, {}, seed);
    for (size_t i = 1; i < report.trace.size(); ++i) {
      CHECK(report.trace[i] >= report.trace[i - 1] - 1e-8);
    }
    double wsum = 0.0;
    for (const auto& c : model.components()) wsum += c.weight;
    CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("EM is deterministic given the seed") {
  const Eigen::MatrixXd x = blob_data(400, 2, 3, 9);
  const auto [a, ra] = fit_em(x, 3, {}, 123);
  const auto [b, rb] = fit_em(x, 3, {}, 123);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.components()[static_cast<size_t>(k)].mean ==
          b.components()[static_cast<size_t>(k)].mean);
    CHECK(a.components()[static_cast<size_t>(k)].cov ==
          b.components()[static_cast<size_t>(k)].cov);
  }
  CHECK(ra.trace == rb.trace);
}

TEST_CASE("EM recovers the class-0 mixture components") {
  ClassMixtureSpec spec;
  spec.classes = {test_helpers::four_class_mixture().classes[0]};
  const Dataset data = generate_synthetic(spec, {10000}, 55);
  const auto [model, report] = fit_em(data.features(), 2, {}, 55);
  REQUIRE(model.k() == 2);
  const Eigen::Vector2d m0(-6, -1), m1(-8, 2);
  const auto& c0 = model.components()[0].mean;
  const auto& c1 = model.components()[1].mean;
  const double direct = (c0 - m0).norm() + (c1 - m1).norm();
  const double swapped = (c0 - m1).norm() + (c1 - m0).norm();
  CHECK(std::min(direct, swapped) < 0.2);  // each mean within 0.1 up to permutation
  const bool use_swap = swapped < direct;
  CHECK((use_swap ? (c0 - m1).norm() : (c0 - m0).norm()) < 0.1);
  CHECK((use_swap ? (c1 - m0).norm() : (c1 - m1).norm()) < 0.1);
}

TEST_CASE("exp(log_density) integrates to 1 (Monte Carlo box)") {
  std::mt19937_64 rng(2024);
  std::vector<GaussianComponent> comps;
  comps.push_back({0.4, Eigen::Vector2d(-1.5, 0.5), test_helpers::random_spd(2, rng) * 0.5});
  comps.push_back({0.35, Eigen::Vector2d(2.0, 1.0), test_helpers::random_spd(2, rng) * 0.5});
  comps.push_back({0.25, Eigen::Vector2d(0.0, -2.0), test_helpers::random_spd(2, rng) * 0.5});
  const GmmModel model(comps);

  const double lo = -14.0, hi = 14.0;
  const int n = 1000000;
  std::uniform_real_distribution<double> unif(lo, hi);
  Eigen::MatrixXd pts(n, 2);
  for (int i = 0; i < n; ++i) {
    pts(i, 0) = unif(rng);
    pts(i, 1) = unif(rng);
  }
  const Eigen::VectorXd ld = model.log_density_batch(pts);
  const double integral = ld.array().exp().mean() * (hi - lo) * (hi - lo);
  CHECK(integral == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("scree with a single K matches the closed form; elbow shows on separated data") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = test_helpers::random_matrix(300, 2, rng);
  const auto single = scree(x, {1}, {}, 3);
  REQUIRE(single.size() == 1);
  const auto [model, report] = fit_em(x, 1, {}, derive_seed(3, {1}));
  CHECK(single[0].second == doctest::Approx(report.final_log_likelihood));

  // three tight, far-apart blobs: the K=2->3 gain dwarfs the K=3->4 gain
  std::normal_distribution<double> noise(0.0, 0.3);
  Eigen::MatrixXd blobs(600, 2);
  const double centers[3][2] = {{0, 0}, {20, 0}, {0, 20}};
  for (int i = 0; i < 600; ++i) {
    const auto* c = centers[i % 3];
    blobs(i, 0) = c[0] + noise(rng);
    blobs(i, 1) = c[1] + noise(rng);
  }
  const auto result = scree(blobs, {2, 3, 4}, {}, 5);
  const double gain23 = result[1].second - result[0].second;
  const double gain34 = result[2].second - result[1].second;
  CHECK(gain23 > 0.0);
  CHECK(gain23 >= 5.0 * std::max(gain34, 1e-9));
}

TEST_CASE("scree on star nodes of the four-class mixture has its elbow at K=3") {
  const auto full = test_helpers::four_class_mixture();
  for (int attack = 1; attack <= 3; ++attack) {
    ClassMixtureSpec spec;
    spec.classes = {full.classes[0], full.classes[static_cast<size_t>(attack)]};
    const Dataset node = generate_synthetic(spec, {2000, 2000}, 88);
    const auto result = scree(node.features(), {1, 2, 3, 4, 5}, {}, 88);
    // operational elbow: last K whose gain is at least 5% of the K=1->2 gain
    const double g12 = result[1].second - result[0].second;
    int elbow = 2;
    for (size_t i = 2; i < result.size(); ++i) {
      if (result[i].second - result[i - 1].second >= 0.05 * g12) {
        elbow = result[i].first;
      }
    }
    CHECK(elbow == 3);
  }
}

TEST_CASE("BIC selection finds the generating component count") {
  const Eigen::MatrixXd x = blob_data(900, 2, 3, 14);
  CHECK(select_k_bic(x, {1, 2, 3, 4, 5}, {}, 7) == 3);
}

TEST_CASE("fit_em input validation") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = test_helpers::random_matrix(5, 2, rng);
  CHECK_THROWS_AS(fit_em(Eigen::MatrixXd(0, 2), 1, {}, 0), DataError);
  CHECK_THROWS_AS(fit_em(x, 6, {}, 0), DataError);
  CHECK_THROWS_AS(fit_em(x, 0, {}, 0), DataError);
  EmOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(fit_em(x, 1, bad, 0), DataError);
}

TEST_CASE("gmm model validation") {
  CHECK_THROWS_AS(GmmModel({}), NumericError);
  CHECK_THROWS_AS(GmmModel({{0.5, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}}),
                  NumericError);  // weights must sum to 1
  GmmModel ok({{1.0, Eigen::Vector2d::Zero(), Eigen::Matrix2d::Identity()}});
  CHECK_THROWS_AS(ok.log_density(Eigen::Vector3d::Zero()), NumericError);
}
