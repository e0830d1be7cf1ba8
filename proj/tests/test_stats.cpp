#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "emmc/assignment.hpp"
#include "emmc/errors.hpp"
#include "emmc/stats.hpp"
#include "helpers.hpp"

using namespace emmc;

TEST_CASE("kl estimate vanishes for matching samples and finds a known gap") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd a = test_helpers::random_matrix(5000, 2, rng);
  const Eigen::MatrixXd b = test_helpers::random_matrix(5000, 2, rng);
  CHECK(kl_estimate(a, b) <= 0.05);

  // N(0,1) vs N(1,1): analytic KL = 1/2
  const Eigen::MatrixXd x = test_helpers::random_matrix(10000, 1, rng);
  Eigen::MatrixXd y = test_helpers::random_matrix(10000, 1, rng);
  y.array() += 1.0;
  CHECK(kl_estimate(x, y) == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(kl_estimate(x, y) - 0.5) < 0.05);
}

TEST_CASE("kl estimate flags degenerate identical sets") {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd a = test_helpers::random_matrix(100, 2, rng);
  const auto detail = kl_estimate_detail(a, a);
  CHECK(detail.degenerate);
  CHECK(std::isfinite(detail.value));
  CHECK(detail.floored >= 100);
}

TEST_CASE("kl estimate input validation") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd a = test_helpers::random_matrix(10, 2, rng);
  CHECK_THROWS_AS(kl_estimate(a.topRows(1), a), DataError);
  CHECK_THROWS_AS(kl_estimate(a, a.topRows(0)), DataError);
  CHECK_THROWS_AS(kl_estimate(a, test_helpers::random_matrix(5, 3, rng)), DataError);
}

TEST_CASE("drift test separates a strong shift at the smallest p-value") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd train = test_helpers::random_matrix(1000, 2, rng);
  Eigen::MatrixXd test = test_helpers::random_matrix(1000, 2, rng);
  test.array() += 3.0;
  const auto result = drift_test(train, test, 100, 17, 2);
  CHECK(result.null_kls.size() == 100);
  CHECK(result.p_value == doctest::Approx(1.0 / 101.0));
  CHECK(result.kl_hat > 1.0);

  long ge = 0;
  for (double v : result.null_kls) {
    if (v >= result.kl_hat) ++ge;
  }
  CHECK(result.p_value ==
        doctest::Approx(static_cast<double>(ge + 1) / (result.null_kls.size() + 1)));
}

TEST_CASE("drift test is deterministic given the seed and jobs-independent") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd train = test_helpers::random_matrix(200, 2, rng);
  const Eigen::MatrixXd test = test_helpers::random_matrix(150, 2, rng);
  const auto a = drift_test(train, test, 50, 99, 1);
  const auto b = drift_test(train, test, 50, 99, 4);
  CHECK(a.null_kls == b.null_kls);
  CHECK(a.p_value == b.p_value);
}

TEST_CASE("wasserstein basic identities") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd a = test_helpers::random_matrix(20, 3, rng);
  CHECK(wasserstein(a, a) == doctest::Approx(0.0).epsilon(1e-12));

  Eigen::MatrixXd zero(1, 1), one(1, 1);
  zero << 0.0;
  one << 1.0;
  CHECK(wasserstein(zero, one) == doctest::Approx(1.0));

  CHECK_THROWS_AS(wasserstein(a, a.topRows(10)), DataError);
  CHECK_THROWS_AS(wasserstein(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)), DataError);
  CHECK_THROWS_WITH_AS(wasserstein(Eigen::MatrixXd::Zero(4097, 1), Eigen::MatrixXd::Zero(4097, 1)),
                       doctest::Contains("subsample"), DataError);
}

TEST_CASE("assignment solver agrees with brute force on 50 random instances") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 6);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = size(rng);
    const Eigen::MatrixXd cost =
        test_helpers::random_matrix(n, n, rng).array().abs().matrix() * 10.0;
    const auto solved = solve_assignment(cost);
    const auto [perm, best] = test_helpers::brute_force_assignment(cost);
    CHECK(solved.cost == doctest::Approx(best).epsilon(1e-9));

    // solution is a permutation
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (int i = 0; i < n; ++i) {
      CHECK(!used[static_cast<size_t>(solved.row_to_col[static_cast<size_t>(i)])]);
      used[static_cast<size_t>(solved.row_to_col[static_cast<size_t>(i)])] = true;
    }
  }
}

TEST_CASE("wasserstein matches brute force through the shared oracle") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd a = test_helpers::random_matrix(6, 2, rng, 2.0);
    const Eigen::MatrixXd b = test_helpers::random_matrix(6, 2, rng, 2.0);
    Eigen::MatrixXd cost(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    const auto [perm, best] = test_helpers::brute_force_assignment(cost);
    CHECK(wasserstein(a, b) == doctest::Approx(std::sqrt(best / 6.0)).epsilon(1e-9));
  }
}

TEST_CASE("wasserstein is a metric on equal-size multisets") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::MatrixXd a = test_helpers::random_matrix(8, 2, rng);
    const Eigen::MatrixXd b = test_helpers::random_matrix(8, 2, rng);
    const Eigen::MatrixXd c = test_helpers::random_matrix(8, 2, rng);
    const double ab = wasserstein(a, b);
    const double ba = wasserstein(b, a);
    const double ac = wasserstein(a, c);
    const double cb = wasserstein(c, b);
    CHECK(std::abs(ab - ba) < 1e-12);
    CHECK(ab <= ac + cb + 1e-9);
  }

  // zero iff multisets equal (same points, different order)
  std::mt19937_64 rng2(19);
  const Eigen::MatrixXd pts = test_helpers::random_matrix(10, 2, rng2);
  Eigen::MatrixXd shuffled = pts;
  for (int i = 0; i < 10; ++i) shuffled.row(i) = pts.row((i + 3) % 10);
  CHECK(wasserstein(pts, shuffled) == doctest::Approx(0.0).epsilon(1e-12));
  Eigen::MatrixXd moved = pts;
  moved(0, 0) += 0.5;
  CHECK(wasserstein(pts, moved) > 1e-3);
}

TEST_CASE("wasserstein is invariant under a shared orthogonal transform") {
  std::mt19937_64 rng(23);
  const Eigen::MatrixXd a = test_helpers::random_matrix(30, 3, rng);
  const Eigen::MatrixXd b = test_helpers::random_matrix(30, 3, rng);
  const Eigen::MatrixXd q =
      Eigen::HouseholderQR<Eigen::MatrixXd>(test_helpers::random_matrix(3, 3, rng))
          .householderQ();
  CHECK(wasserstein(a * q, b * q) == doctest::Approx(wasserstein(a, b)).epsilon(1e-9));
}

TEST_CASE("evaluate computes per-class precision and recall") {
  const std::vector<int> truth{0, 0, 1, 1, 2, 2};
  const auto perfect = evaluate(truth, truth, 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(*perfect.precision[static_cast<size_t>(c)] == 1.0);
    CHECK(*perfect.recall[static_cast<size_t>(c)] == 1.0);
  }

  // everything predicted as class 0 on a balanced two-class set
  const std::vector<int> all_zero{0, 0, 0, 0};
  const std::vector<int> half{0, 0, 1, 1};
  const auto skewed = evaluate(all_zero, half, 2);
  CHECK(*skewed.recall[0] == 1.0);
  CHECK(*skewed.precision[0] == 0.5);
  CHECK(*skewed.recall[1] == 0.0);
  CHECK_FALSE(skewed.precision[1].has_value());

  // confusion rows sum to per-class truth counts
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> cls(0, 3);
  std::vector<int> t(200), p(200);
  for (int i = 0; i < 200; ++i) {
    t[static_cast<size_t>(i)] = cls(rng);
    p[static_cast<size_t>(i)] = cls(rng);
  }
  const auto rep = evaluate(p, t, 4);
  std::vector<int> counts(4, 0);
  for (int v : t) counts[static_cast<size_t>(v)]++;
  for (int c = 0; c < 4; ++c) CHECK(rep.confusion.row(c).sum() == counts[static_cast<size_t>(c)]);

  CHECK_THROWS_AS(evaluate({0, 1}, {0}, 2), DataError);
}

TEST_CASE("replicate_summary reports mean and sample SD") {
  MetricsReport a, b;
  a.precision = {0.98};
  a.recall = {1.0};
  b.precision = {1.0};
  b.recall = {1.0};
  const auto summary = replicate_summary({a, b});
  CHECK(*summary.precision[0] == doctest::Approx(0.99));
  CHECK(*summary.precision_sd[0] == doctest::Approx(0.014142135623).epsilon(1e-6));
  CHECK(*summary.recall[0] == doctest::Approx(1.0));
  CHECK(*summary.recall_sd[0] == doctest::Approx(0.0));

  // absent cells are skipped, not treated as zero
  MetricsReport c;
  c.precision = {std::nullopt};
  c.recall = {0.5};
  const auto mixed = replicate_summary({a, c});
  CHECK(*mixed.precision[0] == doctest::Approx(0.98));
}
