#include "emmc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "emmc/errors.hpp"
#include "emmc/gmm.hpp"
#include "emmc/rng.hpp"

namespace emmc {

Dataset::Dataset(Eigen::MatrixXd features, std::vector<int> labels, int num_classes)
    : features_(std::move(features)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (static_cast<size_t>(features_.rows()) != labels_.size()) {
    throw DataError("dataset: feature rows (" + std::to_string(features_.rows()) +
                    ") != labels (" + std::to_string(labels_.size()) + ")");
  }
  if (!features_.allFinite()) {
    throw DataError("dataset: non-finite feature value");
  }
  for (size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw DataError("dataset: label " + std::to_string(labels_[i]) + " at row " +
                      std::to_string(i) + " outside 0.." + std::to_string(num_classes_ - 1));
    }
  }
}

Dataset Dataset::from_samples(const std::vector<LabeledSample>& samples, int num_classes) {
  if (samples.empty()) {
    return Dataset(Eigen::MatrixXd(0, 0), {}, num_classes);
  }
  const auto d = samples.front().features.size();
  Eigen::MatrixXd X(samples.size(), d);
  std::vector<int> y(samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != d) {
      throw DataError("dataset: sample " + std::to_string(i) + " has dim " +
                      std::to_string(samples[i].features.size()) + ", expected " +
                      std::to_string(d));
    }
    X.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
    y[i] = samples[i].label;
  }
  return Dataset(std::move(X), std::move(y), num_classes);
}

std::vector<int> Dataset::class_counts() const {
  std::vector<int> counts(static_cast<size_t>(num_classes_), 0);
  for (int l : labels_) counts[static_cast<size_t>(l)]++;
  return counts;
}

std::set<int> Dataset::present_classes() const {
  return std::set<int>(labels_.begin(), labels_.end());
}

std::vector<int> Dataset::indices_of_class(int cls) const {
  std::vector<int> idx;
  for (int i = 0; i < size(); ++i) {
    if (labels_[static_cast<size_t>(i)] == cls) idx.push_back(i);
  }
  return idx;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
  Eigen::MatrixXd X(indices.size(), dim());
  std::vector<int> y(indices.size());
  for (size_t i = 0; i < indices.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = features_.row(indices[i]);
    y[i] = labels_[static_cast<size_t>(indices[i])];
  }
  return Dataset(std::move(X), std::move(y), num_classes_);
}

Eigen::MatrixXd Dataset::features_of_class(int cls) const {
  const auto idx = indices_of_class(cls);
  Eigen::MatrixXd X(idx.size(), dim());
  for (size_t i = 0; i < idx.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = features_.row(idx[i]);
  }
  return X;
}

void Dataset::append(const Dataset& other) {
  if (other.empty()) return;
  if (empty()) {
    *this = other;
    return;
  }
  if (other.dim() != dim()) {
    throw DataError("dataset append: dim mismatch " + std::to_string(other.dim()) + " vs " +
                    std::to_string(dim()));
  }
  Eigen::MatrixXd X(size() + other.size(), dim());
  X.topRows(size()) = features_;
  X.bottomRows(other.size()) = other.features_;
  features_ = std::move(X);
  labels_.insert(labels_.end(), other.labels_.begin(), other.labels_.end());
  num_classes_ = std::max(num_classes_, other.num_classes_);
}

TopologyKind topology_kind_from_string(const std::string& name) {
  if (name == "star") return TopologyKind::Star;
  if (name == "ring") return TopologyKind::Ring;
  if (name == "full" || name == "fully-connected") return TopologyKind::FullyConnected;
  throw ConfigError("unknown topology '" + name + "' (expected star|ring|full)");
}

std::string to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::Star: return "star";
    case TopologyKind::Ring: return "ring";
    case TopologyKind::FullyConnected: return "full";
  }
  return "?";
}

std::vector<std::pair<int, int>> Topology::node_class_pairs() const {
  if (num_classes < 2) {
    throw ConfigError("topology: need at least 2 classes, got " + std::to_string(num_classes));
  }
  const int m = num_classes - 1;
  std::vector<std::pair<int, int>> pairs;
  switch (kind) {
    case TopologyKind::Star:
      for (int j = 1; j <= m; ++j) pairs.emplace_back(0, j);
      break;
    case TopologyKind::Ring:
      for (int j = 1; j <= m + 1; ++j) pairs.emplace_back(j - 1, j % (m + 1));
      break;
    case TopologyKind::FullyConnected:
      for (int a = 0; a <= m; ++a)
        for (int b = a + 1; b <= m; ++b) pairs.emplace_back(a, b);
      break;
  }
  return pairs;
}

int ClassMixtureSpec::dim() const {
  for (const auto& cls : classes) {
    if (!cls.empty()) return static_cast<int>(cls.front().mean.size());
  }
  return 0;
}

void ClassMixtureSpec::validate() const {
  if (classes.empty()) throw DataError("mixture spec: no classes");
  const int d = dim();
  for (size_t m = 0; m < classes.size(); ++m) {
    const auto& comps = classes[m];
    if (comps.empty()) {
      throw DataError("mixture spec: class " + std::to_string(m) + " has no components");
    }
    double wsum = 0.0;
    for (size_t k = 0; k < comps.size(); ++k) {
      const auto& c = comps[k];
      const std::string where =
          "class " + std::to_string(m) + " component " + std::to_string(k);
      if (c.mean.size() != d || c.cov.rows() != d || c.cov.cols() != d) {
        throw DataError("mixture spec: " + where + " dim mismatch");
      }
      if (c.weight <= 0.0) throw DataError("mixture spec: " + where + " weight must be > 0");
      if (!c.cov.isApprox(c.cov.transpose(), 1e-12)) {
        throw DataError("mixture spec: " + where + " covariance not symmetric");
      }
      cholesky_spd(c.cov, "mixture spec: " + where + " covariance");
      wsum += c.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw DataError("mixture spec: class " + std::to_string(m) + " weights sum to " +
                      std::to_string(wsum) + ", expected 1");
    }
  }
}

Dataset generate_synthetic(const ClassMixtureSpec& spec, const std::vector<int>& counts,
                           uint64_t seed) {
  spec.validate();
  if (static_cast<int>(counts.size()) != spec.num_classes()) {
    throw DataError("generate_synthetic: counts size " + std::to_string(counts.size()) +
                    " != classes " + std::to_string(spec.num_classes()));
  }
  for (int c : counts) {
    if (c < 0) throw DataError("generate_synthetic: negative count");
  }
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  Eigen::MatrixXd X(total, spec.dim());
  std::vector<int> y(static_cast<size_t>(total));
  int row = 0;
  for (int m = 0; m < spec.num_classes(); ++m) {
    if (counts[static_cast<size_t>(m)] == 0) continue;
    std::vector<GaussianComponent> comps;
    for (const auto& c : spec.classes[static_cast<size_t>(m)]) {
      comps.push_back({c.weight, c.mean, c.cov});
    }
    GmmModel model(std::move(comps));
    const Eigen::MatrixXd draws =
        model.sample(counts[static_cast<size_t>(m)], derive_seed(seed, {static_cast<uint64_t>(m)}));
    X.middleRows(row, draws.rows()) = draws;
    std::fill_n(y.begin() + row, draws.rows(), m);
    row += static_cast<int>(draws.rows());
  }
  return Dataset(std::move(X), std::move(y), spec.num_classes());
}

namespace {

// Largest-remainder allocation of `total` items proportional to `shares`.
std::vector<int> proportional_allocation(int total, const std::vector<double>& shares) {
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<int> alloc(shares.size(), 0);
  std::vector<std::pair<double, size_t>> rema;
  int assigned = 0;
  for (size_t i = 0; i < shares.size(); ++i) {
    const double exact = total * shares[i] / sum;
    alloc[i] = static_cast<int>(std::floor(exact));
    assigned += alloc[i];
    rema.emplace_back(exact - std::floor(exact), i);
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int i = 0; i < total - assigned; ++i) {
    alloc[rema[static_cast<size_t>(i)].second]++;
  }
  return alloc;
}

}  // namespace

std::vector<NodeData> assign_to_nodes(const Dataset& data, const Topology& topo, uint64_t seed) {
  if (topo.num_classes != data.num_classes()) {
    throw DataError("assign_to_nodes: topology classes " + std::to_string(topo.num_classes) +
                    " != dataset classes " + std::to_string(data.num_classes()));
  }
  const auto pairs = topo.node_class_pairs();
  const auto counts = data.class_counts();

  // nodes_of_class[c] = node indices that hold class c
  std::vector<std::vector<int>> nodes_of_class(static_cast<size_t>(topo.num_classes));
  for (size_t j = 0; j < pairs.size(); ++j) {
    nodes_of_class[static_cast<size_t>(pairs[j].first)].push_back(static_cast<int>(j));
    nodes_of_class[static_cast<size_t>(pairs[j].second)].push_back(static_cast<int>(j));
  }

  std::vector<std::vector<int>> node_indices(pairs.size());
  for (int c = 0; c < topo.num_classes; ++c) {
    const auto& holders = nodes_of_class[static_cast<size_t>(c)];
    if (holders.empty()) continue;
    auto idx = data.indices_of_class(c);
    Rng rng(derive_seed(seed, {static_cast<uint64_t>(c)}));
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<int> sizes;
    if (topo.kind == TopologyKind::Star && c == 0) {
      // Normals are allotted in proportion to each node's attack count.
      std::vector<double> shares;
      for (int j : holders) {
        shares.push_back(static_cast<double>(counts[static_cast<size_t>(pairs[j].second)]));
      }
      if (std::accumulate(shares.begin(), shares.end(), 0.0) <= 0.0) {
        shares.assign(holders.size(), 1.0);
      }
      sizes = proportional_allocation(static_cast<int>(idx.size()), shares);
    } else {
      sizes = proportional_allocation(static_cast<int>(idx.size()),
                                      std::vector<double>(holders.size(), 1.0));
    }

    size_t off = 0;
    for (size_t h = 0; h < holders.size(); ++h) {
      auto& dst = node_indices[static_cast<size_t>(holders[h])];
      dst.insert(dst.end(), idx.begin() + static_cast<long>(off),
                 idx.begin() + static_cast<long>(off + static_cast<size_t>(sizes[h])));
      off += static_cast<size_t>(sizes[h]);
    }
  }

  std::vector<NodeData> nodes;
  for (size_t j = 0; j < pairs.size(); ++j) {
    auto idx = node_indices[j];
    std::sort(idx.begin(), idx.end());  // keep original sample order within the node
    Dataset node_data = data.subset(idx);
    std::string missing;
    for (int c : {pairs[j].first, pairs[j].second}) {
      if (node_data.indices_of_class(c).empty()) {
        missing += (missing.empty() ? "" : ", ") + ("class " + std::to_string(c));
      }
    }
    if (!missing.empty()) {
      throw DataError("assign_to_nodes: node " + std::to_string(j) + " has zero samples of " +
                      missing);
    }
    nodes.push_back({static_cast<int>(j), std::move(node_data), pairs[j]});
  }
  return nodes;
}

Dataset balance(const Dataset& data, int cap, uint64_t seed) {
  if (cap < 1) throw DataError("balance: cap must be >= 1, got " + std::to_string(cap));
  std::vector<int> keep;
  keep.reserve(static_cast<size_t>(data.size()));
  for (int c = 0; c < data.num_classes(); ++c) {
    auto idx = data.indices_of_class(c);
    if (static_cast<int>(idx.size()) > cap) {
      Rng rng(derive_seed(seed, {static_cast<uint64_t>(c)}));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(static_cast<size_t>(cap));
      std::sort(idx.begin(), idx.end());
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  if (static_cast<int>(keep.size()) == data.size()) return data;  // untouched, order preserved
  return data.subset(keep);
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, double test_fraction,
                                             uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw DataError("train_test_split: test_fraction must be in (0,1)");
  }
  std::vector<int> train_idx, test_idx;
  for (int c = 0; c < data.num_classes(); ++c) {
    auto idx = data.indices_of_class(c);
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw DataError("train_test_split: class " + std::to_string(c) +
                      " has fewer than 2 samples");
    }
    Rng rng(derive_seed(seed, {static_cast<uint64_t>(c)}));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<long>(n_test), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_double(const std::string& s, int row, const std::string& col) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError("csv: non-numeric cell '" + s + "' in column '" + col + "' at data row " +
                    std::to_string(row));
  }
  return value;
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::vector<std::string>& feature_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return static_cast<int>(i);
    }
    throw DataError("csv: missing column '" + name + "' in '" + path + "'");
  };

  const int label_col = column_of(label_column);
  std::vector<int> feat_cols;
  std::vector<std::string> feat_names;
  if (feature_columns.empty()) {
    for (size_t i = 0; i < header.size(); ++i) {
      if (static_cast<int>(i) != label_col) {
        feat_cols.push_back(static_cast<int>(i));
        feat_names.push_back(header[i]);
      }
    }
  } else {
    for (const auto& name : feature_columns) {
      feat_cols.push_back(column_of(name));
      feat_names.push_back(name);
    }
  }
  if (feat_cols.empty()) throw DataError("csv: no feature columns in '" + path + "'");

  std::vector<Eigen::VectorXd> rows;
  std::vector<int> labels;
  int row_num = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_num;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("csv: row " + std::to_string(row_num) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()));
    }
    Eigen::VectorXd x(feat_cols.size());
    for (size_t i = 0; i < feat_cols.size(); ++i) {
      x[static_cast<Eigen::Index>(i)] =
          parse_double(cells[static_cast<size_t>(feat_cols[i])], row_num, feat_names[i]);
    }
    const double raw_label =
        parse_double(cells[static_cast<size_t>(label_col)], row_num, label_column);
    const int lab = static_cast<int>(std::llround(raw_label));
    if (std::abs(raw_label - lab) > 1e-9 || lab < 0) {
      throw DataError("csv: label '" + cells[static_cast<size_t>(label_col)] + "' at data row " +
                      std::to_string(row_num) + " is not a non-negative integer");
    }
    rows.push_back(std::move(x));
    labels.push_back(lab);
  }
  if (rows.empty()) throw DataError("csv: '" + path + "' has no data rows");

  Eigen::MatrixXd X(rows.size(), rows.front().size());
  for (size_t i = 0; i < rows.size(); ++i) {
    X.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  }
  const int num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  return Dataset(std::move(X), std::move(labels), num_classes);
}

void save_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("csv: cannot write '" + path + "'");
  for (int j = 0; j < data.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  char buf[64];
  for (int i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features()(i, j));
      out << buf << ',';
    }
    out << data.label(i) << '\n';
  }
  if (!out) throw DataError("csv: write failed for '" + path + "'");
}

}  // namespace emmc
