#include "emmc/node.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "emmc/errors.hpp"
#include "emmc/rng.hpp"

namespace emmc {

using nlohmann::json;

namespace {

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

const json& require(const json& doc, const std::string& field, const std::string& path) {
  const auto it = doc.find(field);
  if (it == doc.end()) {
    throw DataError("node summary: missing field '" + path + field + "'");
  }
  return *it;
}

Eigen::VectorXd vec_from_json(const json& a, const std::string& path) {
  if (!a.is_array()) throw DataError("node summary: '" + path + "' must be an array");
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw DataError("node summary: '" + path + "' has non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd mat_from_json(const json& a, const std::string& path) {
  if (!a.is_array() || a.empty()) {
    throw DataError("node summary: '" + path + "' must be a non-empty array of arrays");
  }
  const size_t cols = a[0].size();
  Eigen::MatrixXd m(a.size(), cols);
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != cols) {
      throw DataError("node summary: '" + path + "' row " + std::to_string(i) + " shape mismatch");
    }
    for (size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
    }
  }
  return m;
}

json classifier_to_json(const BinaryClassifier& clf) {
  json out;
  out["kind"] = to_string(clf.kind());
  if (clf.kind() == ClassifierKind::Logistic) {
    const auto& m = clf.logistic();
    out["params"] = {{"w", vec_to_json(m.w)},
                     {"b", m.b},
                     {"mu", vec_to_json(m.mu)},
                     {"sigma", vec_to_json(m.sigma)}};
  } else {
    const auto& m = clf.gaussian_nb();
    out["params"] = {
        {"per_class",
         json::array({json{{"means", vec_to_json(m.mean_a)},
                           {"vars", vec_to_json(m.var_a)},
                           {"prior", m.prior_a}},
                      json{{"means", vec_to_json(m.mean_b)},
                           {"vars", vec_to_json(m.var_b)},
                           {"prior", m.prior_b}}})}};
  }
  return out;
}

BinaryClassifier classifier_from_json(const json& doc, std::pair<int, int> pair) {
  const std::string kind = require(doc, "kind", "classifier.").get<std::string>();
  const json& params = require(doc, "params", "classifier.");
  if (kind == "logistic") {
    LogisticModel m;
    m.w = vec_from_json(require(params, "w", "classifier.params."), "classifier.params.w");
    m.b = require(params, "b", "classifier.params.").get<double>();
    m.mu = vec_from_json(require(params, "mu", "classifier.params."), "classifier.params.mu");
    m.sigma =
        vec_from_json(require(params, "sigma", "classifier.params."), "classifier.params.sigma");
    return BinaryClassifier(pair, std::move(m));
  }
  if (kind == "gaussian_nb") {
    const json& pc = require(params, "per_class", "classifier.params.");
    if (!pc.is_array() || pc.size() != 2) {
      throw DataError("node summary: classifier.params.per_class must have 2 entries");
    }
    GaussianNBModel m;
    m.mean_a = vec_from_json(require(pc[0], "means", "per_class[0]."), "per_class[0].means");
    m.var_a = vec_from_json(require(pc[0], "vars", "per_class[0]."), "per_class[0].vars");
    m.prior_a = require(pc[0], "prior", "per_class[0].").get<double>();
    m.mean_b = vec_from_json(require(pc[1], "means", "per_class[1]."), "per_class[1].means");
    m.var_b = vec_from_json(require(pc[1], "vars", "per_class[1]."), "per_class[1].vars");
    m.prior_b = require(pc[1], "prior", "per_class[1].").get<double>();
    return BinaryClassifier(pair, std::move(m));
  }
  throw DataError("node summary: unknown classifier kind '" + kind + "'");
}

json gmm_to_json(const GmmModel& gmm) {
  json weights = json::array();
  json means = json::array();
  json covs = json::array();
  for (const auto& c : gmm.components()) {
    weights.push_back(c.weight);
    means.push_back(vec_to_json(c.mean));
    covs.push_back(mat_to_json(c.cov));
  }
  return json{{"k", gmm.k()},
              {"dim", gmm.dim()},
              {"weights", std::move(weights)},
              {"means", std::move(means)},
              {"covariances", std::move(covs)}};
}

GmmModel gmm_from_json(const json& doc) {
  const int k = require(doc, "k", "gmm.").get<int>();
  const int dim = require(doc, "dim", "gmm.").get<int>();
  const json& weights = require(doc, "weights", "gmm.");
  const json& means = require(doc, "means", "gmm.");
  const json& covs = require(doc, "covariances", "gmm.");
  if (static_cast<int>(weights.size()) != k || static_cast<int>(means.size()) != k ||
      static_cast<int>(covs.size()) != k) {
    throw DataError("node summary: gmm arrays disagree with k=" + std::to_string(k));
  }
  std::vector<GaussianComponent> comps;
  for (int c = 0; c < k; ++c) {
    GaussianComponent comp;
    comp.weight = weights[static_cast<size_t>(c)].get<double>();
    comp.mean = vec_from_json(means[static_cast<size_t>(c)],
                              "gmm.means[" + std::to_string(c) + "]");
    comp.cov = mat_from_json(covs[static_cast<size_t>(c)],
                             "gmm.covariances[" + std::to_string(c) + "]");
    if (comp.mean.size() != dim || comp.cov.rows() != dim) {
      throw DataError("node summary: gmm component " + std::to_string(c) + " dim != " +
                      std::to_string(dim));
    }
    comps.push_back(std::move(comp));
  }
  return GmmModel(std::move(comps));
}

}  // namespace

void NodeSummary::validate() const {
  if (classes.first == classes.second) {
    throw DataError("node summary: class pair (" + std::to_string(classes.first) + "," +
                    std::to_string(classes.second) + ") must be distinct");
  }
  if (n < 2) throw DataError("node summary: n must be >= 2, got " + std::to_string(n));
  if (classifier.class_pair() != classes) {
    throw DataError("node summary: classifier pair differs from summary classes");
  }
  if (classifier.dim() != gmm.dim()) {
    throw DataError("node summary: classifier dim " + std::to_string(classifier.dim()) +
                    " != gmm dim " + std::to_string(gmm.dim()));
  }
}

json NodeSummary::to_json() const {
  json meta;
  try {
    meta = json::parse(meta_json);
  } catch (const json::parse_error&) {
    meta = json::object();
  }
  return json{{"node_id", node_id},
              {"n", n},
              {"classes", json::array({classes.first, classes.second})},
              {"classifier", classifier_to_json(classifier)},
              {"gmm", gmm_to_json(gmm)},
              {"meta", std::move(meta)}};
}

NodeSummary NodeSummary::from_json(const json& doc) {
  const json& classes = require(doc, "classes", "");
  if (!classes.is_array() || classes.size() != 2) {
    throw DataError("node summary: 'classes' must list exactly 2 class ids, got " +
                    std::to_string(classes.size()));
  }
  const std::pair<int, int> pair{classes[0].get<int>(), classes[1].get<int>()};
  NodeSummary summary{require(doc, "node_id", "").get<int>(),
                      require(doc, "n", "").get<int>(),
                      pair,
                      classifier_from_json(require(doc, "classifier", ""), pair),
                      gmm_from_json(require(doc, "gmm", "")),
                      doc.contains("meta") ? doc["meta"].dump() : "{}"};
  summary.validate();
  return summary;
}

std::string NodeSummary::serialize() const { return to_json().dump(); }

NodeSummary NodeSummary::deserialize(const std::string& bytes) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("node summary: malformed JSON: ") + e.what());
  }
  return from_json(doc);
}

NodeSummary fit_node(int node_id, const Dataset& data, const NodeConfig& config) {
  const auto present = data.present_classes();
  if (present.size() != 2) {
    throw DataError("fit_node: node " + std::to_string(node_id) + " holds " +
                    std::to_string(present.size()) + " classes, expected 2");
  }
  auto it = present.begin();
  const int a = *it++;
  const int b = *it;

  const int pre_n = data.size();
  Dataset fitted = data;
  if (config.balance) {
    fitted = balance(data, config.balance_cap, derive_seed(config.seed, {0}));
  }

  BinaryClassifier clf = fit_binary(fitted, {a, b}, config.classifier, config.logistic,
                                    derive_seed(config.seed, {1}));
  auto [gmm, report] =
      fit_em(fitted.features(), config.k, config.em, derive_seed(config.seed, {2}));

  const int n = config.prior_counts == PriorCounts::PostBalance ? fitted.size() : pre_n;

  json meta{{"seed", config.seed},
            {"classifier", to_string(config.classifier)},
            {"k", config.k},
            {"em", {{"max_iter", config.em.max_iter},
                    {"tol", config.em.tol},
                    {"reg", config.em.reg},
                    {"iterations", report.iterations},
                    {"converged", report.converged},
                    {"final_log_likelihood", report.final_log_likelihood}}},
            {"logistic", {{"lambda", config.logistic.lambda},
                          {"max_iter", config.logistic.max_iter},
                          {"grad_tol", config.logistic.grad_tol}}},
            {"balance", config.balance},
            {"balance_cap", config.balance_cap},
            {"pre_balance_n", pre_n},
            {"post_balance_n", fitted.size()},
            {"prior_counts",
             config.prior_counts == PriorCounts::PostBalance ? "post" : "pre"}};

  NodeSummary summary{node_id, n,    {a, b}, std::move(clf),
                      std::move(gmm), meta.dump()};
  summary.validate();
  return summary;
}

void write_node_summary(const NodeSummary& summary, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("node summary: cannot write '" + path + "'");
  out << summary.serialize() << '\n';
  if (!out) throw DataError("node summary: write failed for '" + path + "'");
}

NodeSummary read_node_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("node summary: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return NodeSummary::deserialize(buf.str());
}

}  // namespace emmc
