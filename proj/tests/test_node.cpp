#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <nlohmann/json.hpp>
#include <random>

#include "emmc/errors.hpp"
#include "emmc/node.hpp"
#include "helpers.hpp"

using namespace emmc;
namespace fs = std::filesystem;

namespace {

Dataset star_node_data(int per_class, uint64_t seed) {
  ClassMixtureSpec spec;
  const auto full = test_helpers::four_class_mixture();
  spec.classes = {full.classes[0], full.classes[1]};
  return generate_synthetic(spec, {per_class, per_class}, seed);
}

}  // namespace

TEST_CASE("fit_node produces a valid summary for a star node") {
  const Dataset data = star_node_data(800, 3);
  NodeConfig cfg;
  cfg.k = 3;
  cfg.seed = 5;
  const NodeSummary summary = fit_node(0, data, cfg);
  CHECK(summary.classes == std::pair<int, int>{0, 1});
  CHECK(summary.gmm.k() == 3);
  CHECK(summary.n == 1600);
  CHECK(summary.classifier.kind() == ClassifierKind::Logistic);
  CHECK_NOTHROW(summary.validate());
}

TEST_CASE("balancing leaves an already-balanced node untouched") {
  const Dataset data = star_node_data(1000, 9);
  NodeConfig cfg;
  cfg.k = 2;
  cfg.balance = true;
  cfg.balance_cap = 1000;
  const NodeSummary summary = fit_node(1, data, cfg);
  CHECK(summary.n == 2000);
}

TEST_CASE("balancing caps the recorded count unless pre-balance priors are requested") {
  const Dataset data = star_node_data(1500, 9);
  NodeConfig cfg;
  cfg.k = 2;
  cfg.balance = true;
  cfg.balance_cap = 1000;
  CHECK(fit_node(1, data, cfg).n == 2000);
  cfg.prior_counts = PriorCounts::PreBalance;
  CHECK(fit_node(1, data, cfg).n == 3000);
}

TEST_CASE("fit_node rejects data with more than two classes") {
  const auto spec = test_helpers::four_class_mixture();
  const Dataset data = generate_synthetic(spec, {50, 50, 50, 0}, 4);
  NodeConfig cfg;
  CHECK_THROWS_AS(fit_node(0, data, cfg), DataError);
}

TEST_CASE("same data and seed give a byte-identical summary") {
  const Dataset data = star_node_data(600, 21);
  NodeConfig cfg;
  cfg.k = 3;
  cfg.seed = 99;
  const NodeSummary a = fit_node(2, data, cfg);
  const NodeSummary b = fit_node(2, data, cfg);
  CHECK(a.serialize() == b.serialize());
}

TEST_CASE("serialize/deserialize round trip preserves behavior") {
  const Dataset data = star_node_data(600, 33);
  for (const auto kind : {ClassifierKind::Logistic, ClassifierKind::GaussianNB}) {
    NodeConfig cfg;
    cfg.k = 2;
    cfg.classifier = kind;
    cfg.seed = 7;
    const NodeSummary original = fit_node(0, data, cfg);
    const NodeSummary restored = NodeSummary::deserialize(original.serialize());
    CHECK(restored.node_id == original.node_id);
    CHECK(restored.n == original.n);
    CHECK(restored.classes == original.classes);

    std::mt19937_64 rng(13);
    for (int i = 0; i < 100; ++i) {
      const Eigen::VectorXd x = test_helpers::random_matrix(2, 1, rng, 6.0);
      CHECK(restored.classifier.proba_first(x) == original.classifier.proba_first(x));
      CHECK(restored.gmm.log_density(x) == original.gmm.log_density(x));
    }
    // a second round trip is byte-stable
    CHECK(restored.serialize() == original.serialize());
  }
}

TEST_CASE("deserialize reports missing and invalid fields") {
  const Dataset data = star_node_data(200, 41);
  NodeConfig cfg;
  cfg.k = 1;
  const NodeSummary summary = fit_node(0, data, cfg);
  auto doc = nlohmann::json::parse(summary.serialize());

  auto without = [&](const std::string& field) {
    auto copy = doc;
    copy.erase(field);
    return copy.dump();
  };
  CHECK_THROWS_WITH_AS(NodeSummary::deserialize(without("gmm")), doctest::Contains("gmm"),
                       DataError);
  CHECK_THROWS_WITH_AS(NodeSummary::deserialize(without("classifier")),
                       doctest::Contains("classifier"), DataError);
  CHECK_THROWS_WITH_AS(NodeSummary::deserialize(without("classes")),
                       doctest::Contains("classes"), DataError);

  auto three_classes = doc;
  three_classes["classes"] = {0, 1, 2};
  CHECK_THROWS_WITH_AS(NodeSummary::deserialize(three_classes.dump()),
                       doctest::Contains("classes"), DataError);

  auto dup = doc;
  dup["classes"] = {1, 1};
  CHECK_THROWS_AS(NodeSummary::deserialize(dup.dump()), DataError);

  CHECK_THROWS_AS(NodeSummary::deserialize("{not json"), DataError);
}

TEST_CASE("node summary files round trip through disk") {
  const Dataset data = star_node_data(300, 55);
  NodeConfig cfg;
  cfg.k = 2;
  cfg.seed = 3;
  const NodeSummary summary = fit_node(4, data, cfg);
  const std::string path = (fs::temp_directory_path() / "emmc_node4.nodesum.json").string();
  write_node_summary(summary, path);
  const NodeSummary loaded = read_node_summary(path);
  CHECK(loaded.serialize() == summary.serialize());
  fs::remove(path);
}
