// emmc: one-shot ensemble multi-class classification over censored data nodes.
// Subcommands wrap the library operations for standalone use; `run` drives the
// full replicated experiment from a TOML manifest.
#include <CLI11.hpp>
#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "emmc/classifiers.hpp"
#include "emmc/dataset.hpp"
#include "emmc/ensemble.hpp"
#include "emmc/errors.hpp"
#include "emmc/experiment.hpp"
#include "emmc/gmm.hpp"
#include "emmc/node.hpp"
#include "emmc/potd.hpp"
#include "emmc/rng.hpp"
#include "emmc/stats.hpp"
#include "emmc/toml.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Feature matrix from a CSV; a label column (if present) is split out.
struct LoadedMatrix {
  Eigen::MatrixXd X;
  std::vector<int> labels;  // empty when no label column
};

LoadedMatrix load_matrix_csv(const std::string& path, const std::string& label_column) {
  std::ifstream probe(path);
  if (!probe) throw emmc::DataError("csv: cannot open '" + path + "'");
  std::string header;
  if (!std::getline(probe, header)) throw emmc::DataError("csv: '" + path + "' is empty");
  probe.close();
  if (!header.empty() && header.back() == '\r') header.pop_back();

  bool has_label = false;
  {
    std::stringstream ss(header);
    std::string cellstr;
    while (std::getline(ss, cellstr, ',')) {
      if (cellstr == label_column) has_label = true;
    }
  }
  LoadedMatrix out;
  if (has_label) {
    const emmc::Dataset data = emmc::load_csv(path, label_column);
    out.X = data.features();
    out.labels = data.labels();
    return out;
  }
  // no label column: parse every column as a feature via a synthetic label
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  int expected = -1;
  int row_num = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_num;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cellstr;
    while (std::getline(ss, cellstr, ',')) {
      try {
        row.push_back(std::stod(cellstr));
      } catch (const std::exception&) {
        throw emmc::DataError("csv: non-numeric cell '" + cellstr + "' at data row " +
                              std::to_string(row_num));
      }
    }
    if (expected < 0) expected = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != expected) {
      throw emmc::DataError("csv: inconsistent width at data row " + std::to_string(row_num));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw emmc::DataError("csv: '" + path + "' has no data rows");
  out.X.resize(static_cast<Eigen::Index>(rows.size()), expected);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < expected; ++j) out.X(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
  }
  return out;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::string& path,
                      const std::string& col_prefix) {
  std::ofstream out(path);
  if (!out) throw emmc::DataError("cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    out << col_prefix << j << (j + 1 < m.cols() ? "," : "\n");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out << g17(m(i, j)) << (j + 1 < m.cols() ? "," : "\n");
    }
  }
}

json ensemble_manifest(const emmc::EnsembleModel& model) {
  json nodes = json::array();
  for (const auto& s : model.summaries()) nodes.push_back(s.to_json());
  json priors = json::array();
  for (Eigen::Index j = 0; j < model.priors().size(); ++j) priors.push_back(model.priors()[j]);
  return json{{"num_classes", model.num_classes()},
              {"dim", model.dim()},
              {"priors", std::move(priors)},
              {"nodes", std::move(nodes)}};
}

emmc::EnsembleModel ensemble_from_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw emmc::DataError("cannot open ensemble manifest '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw emmc::DataError(std::string("ensemble manifest: malformed JSON: ") + e.what());
  }
  if (!doc.contains("nodes") || !doc["nodes"].is_array()) {
    throw emmc::DataError("ensemble manifest: missing 'nodes' array");
  }
  std::vector<emmc::NodeSummary> summaries;
  for (const auto& n : doc["nodes"]) summaries.push_back(emmc::NodeSummary::from_json(n));
  return emmc::EnsembleModel::build(std::move(summaries));
}

struct CliOptions {
  std::string config_path, csv_path, out_path;
  std::string label_column = "label";
  uint64_t seed = 0;
  int jobs = 1;
};

int cmd_run(const CliOptions& opt, std::optional<uint64_t> seed_override,
            std::optional<int> jobs_override, const std::string& out_override) {
  emmc::ExperimentConfig cfg = emmc::ExperimentConfig::from_toml_file(opt.config_path);
  if (seed_override) cfg.seed = *seed_override;
  if (jobs_override) cfg.jobs = *jobs_override;
  if (!out_override.empty()) cfg.out_dir = out_override;
  const emmc::RunReport report = emmc::run_experiment(cfg);
  std::cout << "replicates: " << report.replicates.size() - static_cast<size_t>(report.failed)
            << " ok, " << report.failed << " failed\n";
  const auto& s = report.ensemble_summary;
  for (int c = 0; c < s.num_classes(); ++c) {
    std::cout << "class " << c << ": precision ";
    if (s.precision[static_cast<size_t>(c)]) {
      std::cout << *s.precision[static_cast<size_t>(c)] * 100.0 << "% ("
                << *s.precision_sd[static_cast<size_t>(c)] * 100.0 << "%)";
    } else {
      std::cout << "n/a";
    }
    std::cout << ", recall ";
    if (s.recall[static_cast<size_t>(c)]) {
      std::cout << *s.recall[static_cast<size_t>(c)] * 100.0 << "% ("
                << *s.recall_sd[static_cast<size_t>(c)] * 100.0 << "%)";
    } else {
      std::cout << "n/a";
    }
    std::cout << '\n';
  }
  std::cout << "outputs in " << cfg.out_dir << " (metrics.csv, summary.csv, manifest.json)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"one-shot ensemble multi-node multi-class classification"};
  app.require_subcommand(1);

  std::optional<uint64_t> seed_opt;
  std::optional<int> jobs_opt;

  // run
  auto* run = app.add_subcommand("run", "run a replicated experiment from a TOML manifest");
  std::string run_config, run_out;
  run->add_option("--config", run_config, "experiment manifest (TOML)")->required();
  run->add_option("--seed", seed_opt, "master seed override");
  run->add_option("--jobs", jobs_opt, "parallel replicate workers");
  run->add_option("--out", run_out, "output directory override");

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate synthetic train/test CSVs from a manifest");
  std::string gen_config, gen_out = "data";
  uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config, "experiment manifest (TOML)")->required();
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--out", gen_out, "output directory");

  // scree
  auto* scree_cmd = app.add_subcommand("scree", "per-K GMM log-likelihoods for an elbow plot");
  std::string scree_csv, scree_out = "scree.csv", scree_label = "label";
  int kmin = 1, kmax = 8;
  uint64_t scree_seed = 0;
  double scree_reg = 1e-6;
  scree_cmd->add_option("--csv", scree_csv, "input CSV")->required();
  scree_cmd->add_option("--label-column", scree_label, "label column to drop if present");
  scree_cmd->add_option("--kmin", kmin, "smallest K");
  scree_cmd->add_option("--kmax", kmax, "largest K");
  scree_cmd->add_option("--reg", scree_reg, "covariance regularization");
  scree_cmd->add_option("--seed", scree_seed, "seed");
  scree_cmd->add_option("--out", scree_out, "output CSV");

  // fit-node
  auto* fit = app.add_subcommand("fit-node", "fit one node and write its .nodesum.json");
  std::string fit_csv, fit_out = "node.nodesum.json", fit_clf = "logistic",
              fit_label = "label";
  int fit_node_id = 0, fit_k = 3, fit_cap = 0;
  uint64_t fit_seed = 0;
  fit->add_option("--csv", fit_csv, "two-class labeled CSV")->required();
  fit->add_option("--node-id", fit_node_id, "node id");
  fit->add_option("--k", fit_k, "GMM components");
  fit->add_option("--classifier", fit_clf, "logistic|gaussian_nb");
  fit->add_option("--balance-cap", fit_cap, "per-class cap (0 = no balancing)");
  fit->add_option("--label-column", fit_label, "label column");
  fit->add_option("--seed", fit_seed, "seed");
  fit->add_option("--out", fit_out, "output file");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "combine *.nodesum.json into an ensemble manifest");
  std::string agg_in, agg_out = "ensemble.json";
  agg->add_option("--in", agg_in, "directory of .nodesum.json files")->required();
  agg->add_option("--out", agg_out, "output manifest");

  // predict
  auto* pred = app.add_subcommand("predict", "classify a feature CSV with an ensemble manifest");
  std::string pred_model, pred_csv, pred_out = "pred.csv", pred_label = "label";
  int pred_jobs = 1;
  pred->add_option("--model", pred_model, "ensemble manifest")->required();
  pred->add_option("--csv", pred_csv, "feature CSV (label column ignored if present)")->required();
  pred->add_option("--label-column", pred_label, "label column to ignore");
  pred->add_option("--jobs", pred_jobs, "parallel workers");
  pred->add_option("--out", pred_out, "output CSV");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "per-class precision/recall of predictions");
  std::string eval_pred, eval_truth, eval_out = "metrics.csv", eval_label = "label";
  eval->add_option("--pred", eval_pred, "prediction CSV (column 'pred')")->required();
  eval->add_option("--truth", eval_truth, "labeled CSV with ground truth")->required();
  eval->add_option("--label-column", eval_label, "truth label column");
  eval->add_option("--out", eval_out, "output CSV");

  // drift-test
  auto* drift = app.add_subcommand("drift-test", "KL permutation test between two samples");
  std::string drift_train, drift_test_path, drift_out = "drift.json", drift_label = "label";
  int drift_perms = 100, drift_jobs = 1;
  bool drift_per_class = false;
  uint64_t drift_seed = 0;
  drift->add_option("--train", drift_train, "training CSV")->required();
  drift->add_option("--test", drift_test_path, "test CSV")->required();
  drift->add_option("--permutations", drift_perms, "null re-splits");
  drift->add_flag("--per-class", drift_per_class, "also test each class separately");
  drift->add_option("--label-column", drift_label, "label column");
  drift->add_option("--jobs", drift_jobs, "parallel workers");
  drift->add_option("--seed", drift_seed, "seed");
  drift->add_option("--out", drift_out, "output JSON report");

  // potd
  auto* potd_cmd = app.add_subcommand("potd", "principal optimal transport directions");
  std::string potd_attack, potd_normal, potd_data, potd_out = "potd", potd_label = "label";
  int potd_r = 4, potd_nsub = 1000, potd_reps = 100, potd_jobs = 1;
  bool potd_center = false, potd_specificity = false;
  uint64_t potd_seed = 0;
  potd_cmd->add_option("--attack", potd_attack, "attack samples CSV");
  potd_cmd->add_option("--normal", potd_normal, "normal samples CSV");
  potd_cmd->add_option("--data", potd_data, "labeled CSV (class 0 = normal) for --specificity");
  potd_cmd->add_option("--r", potd_r, "subspace dimension");
  potd_cmd->add_flag("--center", potd_center, "center displacement rows before PCA");
  potd_cmd->add_flag("--specificity", potd_specificity, "run the subspace specificity experiment");
  potd_cmd->add_option("--nsub", potd_nsub, "subsample size per group");
  potd_cmd->add_option("--reps", potd_reps, "specificity repetitions");
  potd_cmd->add_option("--label-column", potd_label, "label column");
  potd_cmd->add_option("--jobs", potd_jobs, "parallel workers");
  potd_cmd->add_option("--seed", potd_seed, "seed");
  potd_cmd->add_option("--out", potd_out, "output directory");

  // pca
  auto* pca_cmd = app.add_subcommand("pca", "PCA dimension reduction");
  std::string pca_csv, pca_out = "pca", pca_label = "label";
  int pca_r = 4;
  pca_cmd->add_option("--csv", pca_csv, "input CSV")->required();
  pca_cmd->add_option("--r", pca_r, "target dimension")->required();
  pca_cmd->add_option("--label-column", pca_label, "label column carried through if present");
  pca_cmd->add_option("--out", pca_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      CliOptions opt;
      opt.config_path = run_config;
      return cmd_run(opt, seed_opt, jobs_opt, run_out);
    }

    if (gen->parsed()) {
      emmc::ExperimentConfig cfg = emmc::ExperimentConfig::from_toml_file(gen_config);
      if (!cfg.synthetic) throw emmc::ConfigError("gen-data: manifest must use synthetic data");
      std::vector<int> counts = cfg.synth.class_counts;
      if (counts.empty()) {
        counts.assign(static_cast<size_t>(cfg.topology.num_classes), 0);
        const auto pairs = cfg.topology.node_class_pairs();
        for (size_t j = 0; j < pairs.size(); ++j) {
          counts[static_cast<size_t>(pairs[j].first)] += cfg.synth.node_counts[j].first;
          counts[static_cast<size_t>(pairs[j].second)] += cfg.synth.node_counts[j].second;
        }
      }
      fs::create_directories(gen_out);
      const auto train = emmc::generate_synthetic(cfg.synth.mixture, counts,
                                                  emmc::derive_seed(gen_seed, {1}));
      const auto test = emmc::generate_synthetic(cfg.synth.mixture, cfg.synth.test_counts,
                                                 emmc::derive_seed(gen_seed, {2}));
      emmc::save_csv(train, (fs::path(gen_out) / "train.csv").string());
      emmc::save_csv(test, (fs::path(gen_out) / "test.csv").string());
      std::cout << "wrote " << gen_out << "/train.csv (" << train.size() << " rows), "
                << gen_out << "/test.csv (" << test.size() << " rows)\n";
      return 0;
    }

    if (scree_cmd->parsed()) {
      const auto loaded = load_matrix_csv(scree_csv, scree_label);
      if (kmin < 1 || kmax < kmin) throw emmc::ConfigError("scree: bad K range");
      std::vector<int> ks;
      for (int k = kmin; k <= kmax; ++k) ks.push_back(k);
      emmc::EmOptions opts;
      opts.reg = scree_reg;
      const auto result = emmc::scree(loaded.X, ks, opts, scree_seed);
      std::ofstream out(scree_out);
      if (!out) throw emmc::DataError("cannot write '" + scree_out + "'");
      out << "k,log_likelihood\n";
      for (const auto& [k, ll] : result) out << k << ',' << g17(ll) << '\n';
      std::cout << "wrote " << scree_out << '\n';
      return 0;
    }

    if (fit->parsed()) {
      const emmc::Dataset data = emmc::load_csv(fit_csv, fit_label);
      emmc::NodeConfig cfg;
      cfg.classifier = emmc::classifier_kind_from_string(fit_clf);
      cfg.k = fit_k;
      cfg.balance = fit_cap > 0;
      cfg.balance_cap = fit_cap > 0 ? fit_cap : 1000;
      cfg.seed = fit_seed;
      const auto summary = emmc::fit_node(fit_node_id, data, cfg);
      emmc::write_node_summary(summary, fit_out);
      std::cout << "wrote " << fit_out << '\n';
      return 0;
    }

    if (agg->parsed()) {
      std::vector<std::string> paths;
      for (const auto& entry : fs::directory_iterator(agg_in)) {
        if (entry.path().string().ends_with(".nodesum.json")) {
          paths.push_back(entry.path().string());
        }
      }
      std::sort(paths.begin(), paths.end());
      if (paths.empty()) {
        throw emmc::DataError("aggregate: no .nodesum.json files in '" + agg_in + "'");
      }
      std::vector<emmc::NodeSummary> summaries;
      for (const auto& p : paths) summaries.push_back(emmc::read_node_summary(p));
      const auto model = emmc::EnsembleModel::build(std::move(summaries));
      std::ofstream out(agg_out);
      if (!out) throw emmc::DataError("cannot write '" + agg_out + "'");
      out << ensemble_manifest(model).dump(2) << '\n';
      std::cout << "wrote " << agg_out << " (" << model.num_nodes() << " nodes, "
                << model.num_classes() << " classes)\n";
      return 0;
    }

    if (pred->parsed()) {
      const auto model = ensemble_from_manifest(pred_model);
      const auto loaded = load_matrix_csv(pred_csv, pred_label);
      std::ofstream out(pred_out);
      if (!out) throw emmc::DataError("cannot write '" + pred_out + "'");
      out << "pred";
      for (int c = 0; c < model.num_classes(); ++c) out << ",post_" << c;
      for (int j = 0; j < model.num_nodes(); ++j) out << ",w_" << j;
      out << '\n';
      for (Eigen::Index i = 0; i < loaded.X.rows(); ++i) {
        const auto res = model.posterior(loaded.X.row(i).transpose());
        int best = 0;
        for (int c = 1; c < model.num_classes(); ++c) {
          if (res.posterior[c] > res.posterior[best]) best = c;
        }
        out << best;
        for (int c = 0; c < model.num_classes(); ++c) out << ',' << g17(res.posterior[c]);
        for (int j = 0; j < model.num_nodes(); ++j) out << ',' << g17(res.weights[j]);
        out << '\n';
      }
      std::cout << "wrote " << pred_out << '\n';
      return 0;
    }

    if (eval->parsed()) {
      const emmc::Dataset truth = emmc::load_csv(eval_truth, eval_label);
      const emmc::Dataset preds = emmc::load_csv(eval_pred, "pred", {"pred"});
      std::vector<int> predicted = preds.labels();
      const int num_classes =
          std::max(truth.num_classes(),
                   1 + *std::max_element(predicted.begin(), predicted.end()));
      const auto report = emmc::evaluate(predicted, truth.labels(), num_classes);
      std::ofstream out(eval_out);
      if (!out) throw emmc::DataError("cannot write '" + eval_out + "'");
      out << "class,precision,recall\n";
      for (int c = 0; c < num_classes; ++c) {
        out << c << ',';
        if (report.precision[static_cast<size_t>(c)]) out << g17(*report.precision[static_cast<size_t>(c)]);
        out << ',';
        if (report.recall[static_cast<size_t>(c)]) out << g17(*report.recall[static_cast<size_t>(c)]);
        out << '\n';
      }
      std::cout << "wrote " << eval_out << '\n';
      return 0;
    }

    if (drift->parsed()) {
      const emmc::Dataset train = emmc::load_csv(drift_train, drift_label);
      const emmc::Dataset test = emmc::load_csv(drift_test_path, drift_label);
      const auto overall = emmc::drift_test(train, test, drift_perms, drift_seed, drift_jobs);
      json report{{"kl_hat", overall.kl_hat},
                  {"p_value", overall.p_value},
                  {"permutations", drift_perms},
                  {"degenerate", overall.degenerate}};
      if (drift_per_class) {
        json per_class = json::object();
        for (int c = 0; c < std::max(train.num_classes(), test.num_classes()); ++c) {
          const auto tr = train.features_of_class(c);
          const auto te = test.features_of_class(c);
          if (tr.rows() < 2 || te.rows() < 1) continue;
          const auto r = emmc::drift_test(tr, te, drift_perms,
                                          emmc::derive_seed(drift_seed, {static_cast<uint64_t>(c)}),
                                          drift_jobs);
          per_class[std::to_string(c)] = r.p_value;
        }
        report["per_class"] = std::move(per_class);
      }
      std::ofstream out(drift_out);
      if (!out) throw emmc::DataError("cannot write '" + drift_out + "'");
      out << report.dump(2) << '\n';
      std::cout << "kl_hat=" << overall.kl_hat << " p=" << overall.p_value << " -> " << drift_out
                << '\n';
      return 0;
    }

    if (potd_cmd->parsed()) {
      fs::create_directories(potd_out);
      if (potd_specificity) {
        if (potd_data.empty()) {
          throw emmc::ConfigError("potd --specificity needs --data (labeled CSV)");
        }
        const emmc::Dataset data = emmc::load_csv(potd_data, potd_label);
        const Eigen::MatrixXd normal = data.features_of_class(0);
        const int attacks = data.num_classes() - 1;
        if (attacks < 1) throw emmc::DataError("potd: no attack classes in '" + potd_data + "'");
        std::vector<std::pair<Eigen::MatrixXd, Eigen::MatrixXd>> binary;
        std::vector<emmc::DirectionMatrix> dirs;
        for (int m = 1; m <= attacks; ++m) {
          Eigen::MatrixXd attack = data.features_of_class(m);
          const int n = static_cast<int>(std::min(attack.rows(), normal.rows()));
          if (n < 1) throw emmc::DataError("potd: class " + std::to_string(m) + " is empty");
          const auto disp =
              emmc::displacement(attack.topRows(n), normal.topRows(n));
          dirs.push_back(emmc::potd_directions(disp, potd_r, potd_center));
          write_matrix_csv(dirs.back().columns,
                           (fs::path(potd_out) / ("directions_" + std::to_string(m) + ".csv"))
                               .string(),
                           "dir_");
          binary.emplace_back(std::move(attack), normal);
        }
        const auto result =
            emmc::specificity_experiment(binary, dirs, potd_nsub, potd_reps, potd_seed, potd_jobs);
        std::ofstream out(fs::path(potd_out) / "specificity.csv");
        out << "subspace,attack,rep,distance\n";
        for (size_t m = 0; m < result.distances.size(); ++m) {
          for (size_t s = 0; s < result.distances[m].size(); ++s) {
            for (size_t rep = 0; rep < result.distances[m][s].size(); ++rep) {
              out << s + 1 << ',' << m + 1 << ',' << rep << ','
                  << g17(result.distances[m][s][rep]) << '\n';
            }
          }
        }
        std::cout << "wrote " << potd_out << "/specificity.csv and direction matrices\n";
        return 0;
      }
      if (potd_attack.empty() || potd_normal.empty()) {
        throw emmc::ConfigError("potd needs --attack and --normal (or --specificity --data)");
      }
      const auto attack = load_matrix_csv(potd_attack, potd_label);
      const auto normal = load_matrix_csv(potd_normal, potd_label);
      const int n = static_cast<int>(std::min(attack.X.rows(), normal.X.rows()));
      const auto disp = emmc::displacement(attack.X.topRows(n), normal.X.topRows(n));
      const auto dirs = emmc::potd_directions(disp, potd_r, potd_center);
      write_matrix_csv(dirs.columns, (fs::path(potd_out) / "directions.csv").string(), "dir_");
      std::ofstream out(fs::path(potd_out) / "scree.csv");
      out << "component,explained_variance_ratio\n";
      for (Eigen::Index i = 0; i < dirs.spectrum.size(); ++i) {
        out << i + 1 << ',' << g17(dirs.spectrum[i]) << '\n';
      }
      std::cout << "wrote " << potd_out << "/directions.csv and scree.csv\n";
      return 0;
    }

    if (pca_cmd->parsed()) {
      fs::create_directories(pca_out);
      const auto loaded = load_matrix_csv(pca_csv, pca_label);
      const auto [reduced, model] = emmc::pca_reduce(loaded.X, pca_r);
      write_matrix_csv(model.dirs.columns, (fs::path(pca_out) / "directions.csv").string(),
                       "dir_");
      std::ofstream ratios(fs::path(pca_out) / "ratios.csv");
      ratios << "component,explained_variance_ratio\n";
      for (Eigen::Index i = 0; i < model.dirs.spectrum.size(); ++i) {
        ratios << i + 1 << ',' << g17(model.dirs.spectrum[i]) << '\n';
      }
      std::ofstream out(fs::path(pca_out) / "reduced.csv");
      if (!out) throw emmc::DataError("cannot write reduced.csv");
      const bool with_labels = !loaded.labels.empty();
      for (Eigen::Index j = 0; j < reduced.cols(); ++j) {
        out << 'f' << j;
        if (j + 1 < reduced.cols() || with_labels) out << ',';
      }
      if (with_labels) out << "label";
      out << '\n';
      for (Eigen::Index i = 0; i < reduced.rows(); ++i) {
        for (Eigen::Index j = 0; j < reduced.cols(); ++j) {
          out << g17(reduced(i, j));
          if (j + 1 < reduced.cols() || with_labels) out << ',';
        }
        if (with_labels) out << loaded.labels[static_cast<size_t>(i)];
        out << '\n';
      }
      std::cout << "wrote " << pca_out << "/reduced.csv, directions.csv, ratios.csv\n";
      return 0;
    }
  } catch (const emmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const emmc::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const emmc::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
