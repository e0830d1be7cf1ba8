#include "emmc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <thread>

#include "emmc/ensemble.hpp"
#include "emmc/errors.hpp"
#include "emmc/rng.hpp"
#include "emmc/toml.hpp"

namespace emmc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

Eigen::VectorXd json_to_vector(const json& a, const std::string& what) {
  if (!a.is_array() || a.empty()) throw ConfigError(what + " must be a non-empty array");
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ConfigError(what + " has a non-numeric entry");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd json_to_matrix(const json& a, const std::string& what) {
  if (!a.is_array() || a.empty()) throw ConfigError(what + " must be a non-empty array of rows");
  const size_t cols = a[0].is_array() ? a[0].size() : 0;
  if (cols == 0) throw ConfigError(what + " rows must be arrays");
  Eigen::MatrixXd m(a.size(), cols);
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_array() || a[i].size() != cols) throw ConfigError(what + " is ragged");
    for (size_t j = 0; j < cols; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j].get<double>();
    }
  }
  return m;
}

ClassMixtureSpec mixture_from_json(const json& classes) {
  if (!classes.is_array() || classes.empty()) {
    throw ConfigError("config: [[data.class]] blocks are required for synthetic data");
  }
  ClassMixtureSpec spec;
  for (size_t m = 0; m < classes.size(); ++m) {
    const json& cls = classes[m];
    const auto comps_it = cls.find("component");
    if (comps_it == cls.end() || !comps_it->is_array() || comps_it->empty()) {
      throw ConfigError("config: class " + std::to_string(m) +
                        " needs [[data.class.component]] blocks");
    }
    std::vector<MixtureComponent> comps;
    for (size_t k = 0; k < comps_it->size(); ++k) {
      const json& comp = (*comps_it)[k];
      const std::string where =
          "config: class " + std::to_string(m) + " component " + std::to_string(k);
      MixtureComponent mc;
      if (!comp.contains("mean")) throw ConfigError(where + ": missing mean");
      mc.mean = json_to_vector(comp["mean"], where + " mean");
      if (comp.contains("cov")) {
        mc.cov = json_to_matrix(comp["cov"], where + " cov");
      } else {
        mc.cov = Eigen::MatrixXd::Identity(mc.mean.size(), mc.mean.size());
      }
      mc.weight = comp.value("weight", 1.0);
      comps.push_back(std::move(mc));
    }
    // normalize weights so specs can give 4/15-style integers as ratios
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;
    if (wsum <= 0.0) throw ConfigError("config: class " + std::to_string(m) + " weights sum <= 0");
    for (auto& c : comps) c.weight /= wsum;
    spec.classes.push_back(std::move(comps));
  }
  spec.validate();
  return spec;
}

std::vector<int> json_to_int_list(const json& a, const std::string& what) {
  if (!a.is_array()) throw ConfigError(what + " must be an array");
  std::vector<int> out;
  for (const auto& v : a) {
    if (!v.is_number_integer()) throw ConfigError(what + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

int ExperimentConfig::k_for_node(int j) const {
  if (k_per_node.empty()) return 3;
  if (k_per_node.size() == 1) return k_per_node.front();
  return k_per_node[static_cast<size_t>(j)];
}

ExperimentConfig ExperimentConfig::from_toml_file(const std::string& path) {
  return from_json(toml::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig cfg;
  const json exp = doc.value("experiment", json::object());
  cfg.replicates = exp.value("replicates", 1);
  cfg.seed = exp.value("seed", static_cast<uint64_t>(0));
  cfg.jobs = exp.value("jobs", 1);
  cfg.out_dir = exp.value("out", "out");
  cfg.topology.kind = topology_kind_from_string(exp.value("topology", "star"));
  cfg.topology.num_classes = exp.value("classes", 0);
  cfg.classifier = classifier_kind_from_string(exp.value("classifier", "logistic"));
  if (exp.contains("k")) {
    if (exp["k"].is_array()) {
      cfg.k_per_node = json_to_int_list(exp["k"], "config: experiment.k");
    } else {
      cfg.k_per_node = {exp["k"].get<int>()};
    }
  }
  cfg.balance_cap = exp.value("balance_cap", 0);
  cfg.balance = cfg.balance_cap > 0;
  cfg.test_fraction = exp.value("test_fraction", 0.25);
  cfg.run_baseline = exp.value("baseline", true);
  cfg.prior_counts =
      exp.value("prior_counts", "post") == "pre" ? PriorCounts::PreBalance
                                                 : PriorCounts::PostBalance;
  cfg.aggregate_from_files = exp.value("aggregation", "files") != "in-process";

  const json lo = exp.value("logistic", json::object());
  cfg.logistic.lambda = lo.value("lambda", 1e-4);
  cfg.logistic.max_iter = lo.value("max_iter", 5000);
  cfg.logistic.grad_tol = lo.value("tol", 1e-6);
  const json bo = exp.value("baseline_opts", json::object());
  cfg.baseline_opts.lambda = bo.value("lambda", cfg.logistic.lambda);
  cfg.baseline_opts.max_iter = bo.value("max_iter", cfg.logistic.max_iter);
  cfg.baseline_opts.grad_tol = bo.value("tol", cfg.logistic.grad_tol);
  const json em = exp.value("em", json::object());
  cfg.em.max_iter = em.value("max_iter", 500);
  cfg.em.tol = em.value("tol", 1e-6);
  cfg.em.reg = em.value("reg", 1e-6);

  const json data = doc.value("data", json::object());
  const std::string source = data.value("source", "synthetic");
  if (source == "synthetic") {
    cfg.synthetic = true;
    cfg.synth.mixture = mixture_from_json(data.value("class", json::array()));
    if (cfg.topology.num_classes == 0) {
      cfg.topology.num_classes = cfg.synth.mixture.num_classes();
    }
    cfg.synth.per_node_generation = data.value("generation", "per-node") != "partition";
    if (data.contains("node_counts")) {
      const json& nc = data["node_counts"];
      if (!nc.is_array()) throw ConfigError("config: data.node_counts must be an array");
      for (const auto& entry : nc) {
        if (entry.is_array() && entry.size() == 2) {
          cfg.synth.node_counts.emplace_back(entry[0].get<int>(), entry[1].get<int>());
        } else if (entry.is_number_integer()) {
          const int total = entry.get<int>();
          cfg.synth.node_counts.emplace_back(total / 2, total - total / 2);
        } else {
          throw ConfigError("config: data.node_counts entries must be [na, nb] or a total");
        }
      }
    }
    if (data.contains("class_counts")) {
      cfg.synth.class_counts = json_to_int_list(data["class_counts"], "config: data.class_counts");
    }
    if (data.contains("test_counts")) {
      cfg.synth.test_counts = json_to_int_list(data["test_counts"], "config: data.test_counts");
    }
  } else if (source == "csv") {
    cfg.synthetic = false;
    const json csv = doc.value("csv", json::object());
    cfg.csv.train_path = csv.value("train", "");
    cfg.csv.test_path = csv.value("test", "");
    cfg.csv.label_column = csv.value("label_column", "label");
    if (csv.contains("feature_columns")) {
      for (const auto& c : csv["feature_columns"]) {
        cfg.csv.feature_columns.push_back(c.get<std::string>());
      }
    }
  } else {
    throw ConfigError("config: data.source must be synthetic|csv, got '" + source + "'");
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (replicates < 1) throw ConfigError("config: replicates must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("config: test_fraction must be in (0,1)");
  }
  if (topology.num_classes < 2) throw ConfigError("config: need at least 2 classes");
  const int nodes = topology.num_nodes();
  if (!k_per_node.empty() && k_per_node.size() != 1 &&
      static_cast<int>(k_per_node.size()) != nodes) {
    throw ConfigError("config: experiment.k has " + std::to_string(k_per_node.size()) +
                      " entries for " + std::to_string(nodes) + " nodes");
  }
  for (int j = 0; j < nodes; ++j) {
    if (k_for_node(j) < 1) throw ConfigError("config: K must be >= 1");
  }
  if (synthetic) {
    if (synth.mixture.num_classes() != topology.num_classes) {
      throw ConfigError("config: mixture has " + std::to_string(synth.mixture.num_classes()) +
                        " classes, topology expects " + std::to_string(topology.num_classes));
    }
    if (synth.test_counts.empty()) {
      throw ConfigError("config: data.test_counts is required for synthetic data");
    }
    if (static_cast<int>(synth.test_counts.size()) != topology.num_classes) {
      throw ConfigError("config: data.test_counts size != classes");
    }
    if (synth.per_node_generation) {
      if (synth.node_counts.empty()) {
        throw ConfigError("config: data.node_counts is required for per-node generation");
      }
      if (static_cast<int>(synth.node_counts.size()) != nodes) {
        throw ConfigError("config: data.node_counts has " +
                          std::to_string(synth.node_counts.size()) + " entries for " +
                          std::to_string(nodes) + " nodes");
      }
    } else if (static_cast<int>(synth.class_counts.size()) != topology.num_classes) {
      throw ConfigError("config: data.class_counts size != classes for partition generation");
    }
  } else {
    if (csv.train_path.empty()) throw ConfigError("config: csv.train is required");
    if (!fs::exists(csv.train_path)) {
      throw ConfigError("config: csv.train '" + csv.train_path + "' does not exist");
    }
    if (!csv.test_path.empty() && !fs::exists(csv.test_path)) {
      throw ConfigError("config: csv.test '" + csv.test_path + "' does not exist");
    }
  }
}

json ExperimentConfig::to_json() const {
  json exp{{"replicates", replicates},
           {"seed", seed},
           {"jobs", jobs},
           {"out", out_dir},
           {"topology", to_string(topology.kind)},
           {"classes", topology.num_classes},
           {"classifier", to_string(classifier)},
           {"balance_cap", balance_cap},
           {"test_fraction", test_fraction},
           {"baseline", run_baseline},
           {"prior_counts", prior_counts == PriorCounts::PostBalance ? "post" : "pre"},
           {"aggregation", aggregate_from_files ? "files" : "in-process"},
           {"seed_scheme",
            "derive_seed(master,{replicate,stage[,node]}); stages: generate=1 test=2 "
            "assign=3 split=4 node_fit=5 baseline=6"},
           {"logistic", {{"lambda", logistic.lambda},
                         {"max_iter", logistic.max_iter},
                         {"tol", logistic.grad_tol}}},
           {"baseline_opts", {{"lambda", baseline_opts.lambda},
                              {"max_iter", baseline_opts.max_iter},
                              {"tol", baseline_opts.grad_tol}}},
           {"em", {{"max_iter", em.max_iter}, {"tol", em.tol}, {"reg", em.reg}}}};
  json ks = json::array();
  for (int j = 0; j < num_nodes(); ++j) ks.push_back(k_for_node(j));
  exp["k"] = std::move(ks);

  json data;
  if (synthetic) {
    data["source"] = "synthetic";
    data["generation"] = synth.per_node_generation ? "per-node" : "partition";
    if (!synth.node_counts.empty()) {
      json nc = json::array();
      for (const auto& [a, b] : synth.node_counts) nc.push_back(json::array({a, b}));
      data["node_counts"] = std::move(nc);
    }
    if (!synth.class_counts.empty()) data["class_counts"] = synth.class_counts;
    data["test_counts"] = synth.test_counts;
  } else {
    data["source"] = "csv";
    data["train"] = csv.train_path;
    data["test"] = csv.test_path;
    data["label_column"] = csv.label_column;
  }
  return json{{"experiment", std::move(exp)}, {"data", std::move(data)}};
}

namespace {

struct ReplicateData {
  std::vector<NodeData> nodes;
  Dataset pooled_train;
  Dataset test;
};

ReplicateData build_replicate_data(const ExperimentConfig& cfg, const Dataset* csv_train,
                                   const Dataset* csv_test, int r) {
  ReplicateData out;
  const auto pairs = cfg.topology.node_class_pairs();
  const auto rr = static_cast<uint64_t>(r);

  if (cfg.synthetic) {
    if (cfg.synth.per_node_generation) {
      for (size_t j = 0; j < pairs.size(); ++j) {
        std::vector<int> counts(static_cast<size_t>(cfg.topology.num_classes), 0);
        counts[static_cast<size_t>(pairs[j].first)] = cfg.synth.node_counts[j].first;
        counts[static_cast<size_t>(pairs[j].second)] = cfg.synth.node_counts[j].second;
        Dataset node_data = generate_synthetic(
            cfg.synth.mixture, counts,
            derive_seed(cfg.seed, {rr, stage::kGenerate, static_cast<uint64_t>(j)}));
        out.pooled_train.append(node_data);
        out.nodes.push_back({static_cast<int>(j), std::move(node_data), pairs[j]});
      }
    } else {
      out.pooled_train = generate_synthetic(cfg.synth.mixture, cfg.synth.class_counts,
                                            derive_seed(cfg.seed, {rr, stage::kGenerate}));
      out.nodes = assign_to_nodes(out.pooled_train, cfg.topology,
                                  derive_seed(cfg.seed, {rr, stage::kAssign}));
    }
    out.test = generate_synthetic(cfg.synth.mixture, cfg.synth.test_counts,
                                  derive_seed(cfg.seed, {rr, stage::kTestSet}));
  } else {
    Dataset train;
    if (csv_test != nullptr) {
      train = *csv_train;
      out.test = *csv_test;
    } else {
      std::tie(train, out.test) = train_test_split(
          *csv_train, cfg.test_fraction, derive_seed(cfg.seed, {rr, stage::kSplit}));
    }
    out.pooled_train = train;
    out.nodes =
        assign_to_nodes(train, cfg.topology, derive_seed(cfg.seed, {rr, stage::kAssign}));
  }
  return out;
}

std::string replicate_dir(const ExperimentConfig& cfg, int r) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "rep_%03d", r);
  return (fs::path(cfg.out_dir) / "replicates" / buf).string();
}

std::string node_summary_path(const std::string& dir, int node_id) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "node_%02d.nodesum.json", node_id);
  return (fs::path(dir) / buf).string();
}

ReplicateOutcome run_replicate(const ExperimentConfig& cfg, const Dataset* csv_train,
                               const Dataset* csv_test, int r) {
  ReplicateOutcome outcome;
  outcome.replicate = r;
  const auto data = build_replicate_data(cfg, csv_train, csv_test, r);
  const std::string dir = replicate_dir(cfg, r);
  fs::create_directories(dir);

  std::vector<NodeSummary> summaries;
  for (const auto& node : data.nodes) {
    NodeConfig node_cfg;
    node_cfg.classifier = cfg.classifier;
    node_cfg.k = cfg.k_for_node(node.node_id);
    node_cfg.em = cfg.em;
    node_cfg.logistic = cfg.logistic;
    node_cfg.balance = cfg.balance;
    node_cfg.balance_cap = cfg.balance_cap;
    node_cfg.prior_counts = cfg.prior_counts;
    node_cfg.seed = derive_seed(
        cfg.seed, {static_cast<uint64_t>(r), stage::kNodeFit, static_cast<uint64_t>(node.node_id)});
    NodeSummary summary = fit_node(node.node_id, node.data, node_cfg);
    write_node_summary(summary, node_summary_path(dir, node.node_id));
    summaries.push_back(std::move(summary));
  }

  // The one-shot protocol: by default the coordinator sees only the files.
  if (cfg.aggregate_from_files) {
    summaries.clear();
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().string().ends_with(".nodesum.json")) {
        paths.push_back(entry.path().string());
      }
    }
    std::sort(paths.begin(), paths.end());
    for (const auto& p : paths) summaries.push_back(read_node_summary(p));
  }

  const EnsembleModel model = EnsembleModel::build(std::move(summaries), cfg.topology.num_classes);
  const std::vector<int> predictions = model.predict_batch(data.test.features());
  outcome.ensemble = evaluate(predictions, data.test.labels(), cfg.topology.num_classes);

  if (cfg.run_baseline) {
    const MultinomialLogistic full =
        fit_multinomial(data.pooled_train, cfg.baseline_opts,
                        derive_seed(cfg.seed, {static_cast<uint64_t>(r), stage::kBaseline}));
    outcome.baseline =
        evaluate(full.predict_batch(data.test.features()), data.test.labels(),
                 cfg.topology.num_classes);
  }
  outcome.ok = true;
  return outcome;
}

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string cell(const std::optional<double>& v) { return v ? format_g17(*v) : ""; }

}  // namespace

RunReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(config.out_dir);

  Dataset csv_train, csv_test;
  const Dataset* train_ptr = nullptr;
  const Dataset* test_ptr = nullptr;
  if (!config.synthetic) {
    csv_train = load_csv(config.csv.train_path, config.csv.label_column,
                         config.csv.feature_columns);
    train_ptr = &csv_train;
    if (!config.csv.test_path.empty()) {
      csv_test = load_csv(config.csv.test_path, config.csv.label_column,
                          config.csv.feature_columns);
      test_ptr = &csv_test;
    }
  }

  RunReport report;
  report.has_baseline = config.run_baseline;
  report.replicates.resize(static_cast<size_t>(config.replicates));

  std::atomic<int> next{0};
  auto worker = [&] {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= config.replicates) return;
      auto& outcome = report.replicates[static_cast<size_t>(r)];
      try {
        outcome = run_replicate(config, train_ptr, test_ptr, r);
      } catch (const std::exception& e) {
        outcome.replicate = r;
        outcome.ok = false;
        outcome.error = e.what();
      }
    }
  };
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1 || config.replicates == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }

  std::vector<MetricsReport> ensemble_reports, baseline_reports;
  for (const auto& outcome : report.replicates) {
    if (!outcome.ok) {
      report.failed++;
      continue;
    }
    ensemble_reports.push_back(outcome.ensemble);
    if (config.run_baseline) baseline_reports.push_back(outcome.baseline);
  }
  if (ensemble_reports.empty()) {
    throw NumericError("run_experiment: every replicate failed; first error: " +
                       (report.replicates.empty() ? std::string("none")
                                                  : report.replicates.front().error));
  }
  report.ensemble_summary = replicate_summary(ensemble_reports);
  if (config.run_baseline) report.baseline_summary = replicate_summary(baseline_reports);
  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_metrics_csv(report, (fs::path(config.out_dir) / "metrics.csv").string());
  write_summary_csv(report, (fs::path(config.out_dir) / "summary.csv").string());

  json manifest{{"config", config.to_json()},
                {"elapsed_seconds", report.elapsed_seconds},
                {"failed_replicates", report.failed}};
  json rep_status = json::array();
  for (const auto& outcome : report.replicates) {
    rep_status.push_back(json{{"replicate", outcome.replicate},
                              {"ok", outcome.ok},
                              {"error", outcome.error}});
  }
  manifest["replicates"] = std::move(rep_status);
  std::ofstream mf(fs::path(config.out_dir) / "manifest.json");
  mf << manifest.dump(2) << '\n';

  return report;
}

void write_metrics_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "replicate,method,class,precision,recall\n";
  for (const auto& outcome : report.replicates) {
    if (!outcome.ok) continue;
    for (int c = 0; c < outcome.ensemble.num_classes(); ++c) {
      out << outcome.replicate << ",ensemble," << c << ','
          << cell(outcome.ensemble.precision[static_cast<size_t>(c)]) << ','
          << cell(outcome.ensemble.recall[static_cast<size_t>(c)]) << '\n';
    }
    if (report.has_baseline) {
      for (int c = 0; c < outcome.baseline.num_classes(); ++c) {
        out << outcome.replicate << ",full_data," << c << ','
            << cell(outcome.baseline.precision[static_cast<size_t>(c)]) << ','
            << cell(outcome.baseline.recall[static_cast<size_t>(c)]) << '\n';
      }
    }
  }
}

void write_summary_csv(const RunReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "method,class,metric,mean,sd\n";
  auto emit = [&](const std::string& method, const MetricsReport& summary) {
    for (int c = 0; c < summary.num_classes(); ++c) {
      out << method << ',' << c << ",precision,"
          << cell(summary.precision[static_cast<size_t>(c)]) << ','
          << cell(summary.precision_sd[static_cast<size_t>(c)]) << '\n';
      out << method << ',' << c << ",recall," << cell(summary.recall[static_cast<size_t>(c)])
          << ',' << cell(summary.recall_sd[static_cast<size_t>(c)]) << '\n';
    }
  };
  emit("ensemble", report.ensemble_summary);
  if (report.has_baseline) emit("full_data", report.baseline_summary);
}

}  // namespace emmc
