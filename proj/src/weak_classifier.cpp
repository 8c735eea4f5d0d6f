// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/weak_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_set>

namespace snapseg {
namespace {

template <typename T>
void fisher_yates(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

}  // namespace

LinearSvm fit_svm(const FeatureMatrix& features, std::span<const int> labels, int n_classes,
                  const SvmOptions& options) {
  const Eigen::Index n = features.rows();
  const Eigen::Index f = features.cols();
  if (n < 1) throw std::invalid_argument("fit_svm: empty training set");
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw std::invalid_argument("fit_svm: " + std::to_string(n) + " feature rows but " +
                                std::to_string(labels.size()) + " labels");
  }
  if (n_classes < 2) throw std::invalid_argument("fit_svm: need at least 2 classes");
  if (!(options.C > 0.0) || !std::isfinite(options.C)) throw std::invalid_argument("fit_svm: C must be > 0");
  if (options.epochs < 1) throw std::invalid_argument("fit_svm: epochs must be >= 1");

  std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes), 0);
  for (int l : labels) {
    if (l < 0 || l >= n_classes) throw std::invalid_argument("fit_svm: label " + std::to_string(l) + " out of range");
    ++counts[static_cast<std::size_t>(l)];
  }
  const auto n_present = std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (n_present < 2) {
    std::string missing;
    for (int c = 0; c < n_classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
    }
    throw std::invalid_argument("fit_svm: only one class in the training set; missing classes: " + missing);
  }

  Eigen::RowVectorXd mean = features.colwise().mean();
  Eigen::RowVectorXd scale(f);
  for (Eigen::Index j = 0; j < f; ++j) {
    const double var = (features.col(j).array() - mean[j]).square().mean();
    scale[j] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  FeatureMatrix z(n, f + 1);
  z.leftCols(f) = (features.rowwise() - mean).array().rowwise() / scale.array();
  z.col(f).setOnes();  // bias as a regularised weight

  const double lambda = 1.0 / (options.C * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  LinearSvm svm;
  svm.weights = Eigen::MatrixXd::Zero(n_classes, f);
  svm.biases = Eigen::VectorXd::Zero(n_classes);
  svm.active.assign(static_cast<std::size_t>(n_classes), false);
  svm.C = options.C;
  svm.seed = options.seed;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (int c = 0; c < n_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) continue;
    svm.active[static_cast<std::size_t>(c)] = true;
    Rng rng(derive_seed(options.seed, static_cast<std::uint64_t>(c)));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(f + 1);
    double t = 0.0;
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
      fisher_yates(order, rng);
      for (Eigen::Index i : order) {
        t += 1.0;
        const double eta = 1.0 / (lambda * t);
        const double y = labels[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
        const double margin = y * w.dot(z.row(i));
        w *= 1.0 - eta * lambda;
        if (margin < 1.0) w.noalias() += (eta * y) * z.row(i);
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
      }
    }
    const Eigen::RowVectorXd raw = w.head(f).array() / scale.array();
    svm.weights.row(c) = raw;
    svm.biases[c] = w[f] - raw.dot(mean);
  }
  if (!svm.weights.allFinite() || !svm.biases.allFinite()) throw Error("fit_svm: non-finite parameters");
  return svm;
}

int predict_one(const LinearSvm& svm, const Eigen::Ref<const Eigen::RowVectorXd>& feature) {
  if (feature.size() != svm.dim()) {
    throw std::invalid_argument("predict: feature has " + std::to_string(feature.size()) +
                                " entries, model expects " + std::to_string(svm.dim()));
  }
  int best = -1;
  double best_score = 0.0;
  for (int c = 0; c < svm.n_classes(); ++c) {
    if (!svm.active[static_cast<std::size_t>(c)]) continue;
    const double s = svm.weights.row(c).dot(feature) + svm.biases[c];
    if (best < 0 || s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best < 0 ? 0 : best;
}

std::vector<int> predict(const LinearSvm& svm, const FeatureMatrix& features) {
  if (features.cols() != svm.dim()) {
    throw std::invalid_argument("predict: features have " + std::to_string(features.cols()) +
                                " columns, model expects " + std::to_string(svm.dim()));
  }
  std::vector<int> out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_one(svm, features.row(i));
  return out;
}

std::size_t WeakTrainingSet::n_true() const {
  return static_cast<std::size_t>(std::count(is_pseudo.begin(), is_pseudo.end(), false));
}

WeakTrainingSet build_weak_training_set(const FeatureMatrix& all_features,
                                        std::span<const int> true_labels, int n_classes,
                                        const LabelBudget& budget,
                                        const PseudoLabelSet* pseudo, std::uint64_t seed) {
  if (static_cast<std::size_t>(all_features.rows()) != true_labels.size()) {
    throw std::invalid_argument("build_weak_training_set: features and labels differ in length");
  }
  if (budget.fraction.has_value() == budget.per_class.has_value()) {
    throw std::invalid_argument("build_weak_training_set: give exactly one of fraction or per-class count");
  }
  WeakTrainingSet out;
  Rng rng(seed);
  std::vector<std::size_t> chosen;

  if (budget.fraction) {
    const double frac = *budget.fraction;
    if (!(frac > 0.0 && frac <= 1.0)) throw std::invalid_argument("build_weak_training_set: fraction must be in (0, 1]");
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
      if (true_labels[i] != kUnlabeled) pool.push_back(i);
    }
    if (frac >= 1.0) {
      chosen = pool;
    } else {
      const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(pool.size()))));
      fisher_yates(pool, rng);
      chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(std::min(m, pool.size())));
    }
  } else {
    const int per = *budget.per_class;
    if (per < 1) throw std::invalid_argument("build_weak_training_set: per-class count must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
      const int l = true_labels[i];
      if (l >= 0 && l < n_classes) by_class[static_cast<std::size_t>(l)].push_back(i);
    }
    for (int c = 0; c < n_classes; ++c) {
      auto& members = by_class[static_cast<std::size_t>(c)];
      if (members.size() < static_cast<std::size_t>(per)) {
        out.warnings.push_back("class " + std::to_string(c) + ": requested " + std::to_string(per) +
                               " labels, only " + std::to_string(members.size()) + " available");
      }
      fisher_yates(members, rng);
      const std::size_t take = std::min(members.size(), static_cast<std::size_t>(per));
      chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<std::pair<std::size_t, int>> pseudo_rows;
  if (pseudo) {
    const std::unordered_set<std::size_t> taken(chosen.begin(), chosen.end());
    std::unordered_set<std::size_t> seen;
    for (std::size_t k = 0; k < pseudo->size(); ++k) {
      const std::size_t id = pseudo->sample_ids[k];
      if (id >= true_labels.size()) throw std::invalid_argument("build_weak_training_set: pseudo sample id out of range");
      if (taken.count(id) || !seen.insert(id).second) continue;
      pseudo_rows.emplace_back(id, pseudo->class_ids[k]);
    }
  }

  const std::size_t total = chosen.size() + pseudo_rows.size();
  out.features.resize(static_cast<Eigen::Index>(total), all_features.cols());
  out.labels.reserve(total);
  out.sample_ids.reserve(total);
  out.is_pseudo.reserve(total);
  Eigen::Index row = 0;
  for (std::size_t id : chosen) {
    out.features.row(row++) = all_features.row(static_cast<Eigen::Index>(id));
    out.labels.push_back(true_labels[id]);
    out.sample_ids.push_back(id);
    out.is_pseudo.push_back(false);
  }
  for (const auto& [id, cls] : pseudo_rows) {
    out.features.row(row++) = all_features.row(static_cast<Eigen::Index>(id));
    out.labels.push_back(cls);
    out.sample_ids.push_back(id);
    out.is_pseudo.push_back(true);
  }
  return out;
}

void save_svm(const LinearSvm& svm, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", svm.C);
  out << "snapseg-svm v1\nn_classes " << svm.n_classes() << "\nfeature_dim " << svm.dim() << "\nC " << buf
      << "\nseed " << svm.seed << "\nactive";
  for (bool a : svm.active) out << ' ' << (a ? 1 : 0);
  out << '\n';
  for (int c = 0; c < svm.n_classes(); ++c) {
    for (int j = 0; j < svm.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", svm.weights(c, j));
      out << (j ? " " : "") << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", svm.biases[c]);
    out << ' ' << buf << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

LinearSvm load_svm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic, version, key;
  int k = 0;
  int f = 0;
  LinearSvm svm;
  in >> magic >> version;
  if (magic != "snapseg-svm") throw ParseError("not an svm model file", 1);
  in >> key >> k >> key >> f >> key >> svm.C >> key >> svm.seed >> key;
  if (!in || k < 2 || f < 1 || key != "active") throw ParseError("bad svm header", 2);
  svm.active.resize(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    int a = 0;
    if (!(in >> a)) throw ParseError("truncated active list", 6);
    svm.active[static_cast<std::size_t>(c)] = a != 0;
  }
  svm.weights.resize(k, f);
  svm.biases.resize(k);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < f; ++j) {
      if (!(in >> svm.weights(c, j))) throw ParseError("truncated weights", 7 + static_cast<std::size_t>(c));
    }
    if (!(in >> svm.biases[c])) throw ParseError("truncated biases", 7 + static_cast<std::size_t>(c));
  }
  return svm;
}

}  // namespace snapseg
