// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace snapseg {
namespace {

double sq_dist(const FeatureMatrix& a, Eigen::Index i, const FeatureMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

/// Nearest centre for every row, ties by smallest id. Returns the inertia.
double assign_rows(const FeatureMatrix& x, const FeatureMatrix& centers, std::vector<int>& ids,
                   std::vector<double>& d2) {
  const Eigen::Index n = x.rows();
  ids.assign(static_cast<std::size_t>(n), 0);
  d2.assign(static_cast<std::size_t>(n), 0.0);
  double inertia = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = sq_dist(x, i, centers, 0);
    for (Eigen::Index c = 1; c < centers.rows(); ++c) {
      const double d = sq_dist(x, i, centers, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    ids[static_cast<std::size_t>(i)] = best;
    d2[static_cast<std::size_t>(i)] = best_d;
    inertia += best_d;
  }
  return inertia;
}

FeatureMatrix kmeanspp_seed(const FeatureMatrix& x, int k, Rng& rng) {
  const Eigen::Index n = x.rows();
  FeatureMatrix centers(k, x.cols());
  std::vector<bool> taken(static_cast<std::size_t>(n), false);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  Eigen::Index pick = first(rng);
  centers.row(0) = x.row(pick);
  taken[static_cast<std::size_t>(pick)] = true;

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) d2[static_cast<std::size_t>(i)] = sq_dist(x, i, centers, 0);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      // D^2 sampling
      const double target = unit(rng) * total;
      double acc = 0.0;
      pick = -1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (d2[static_cast<std::size_t>(i)] > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n - 1; i >= 0; --i) {
          if (d2[static_cast<std::size_t>(i)] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // every sample coincides with a centre; take the first unused one
      pick = 0;
      while (pick < n - 1 && taken[static_cast<std::size_t>(pick)]) ++pick;
    }
    centers.row(c) = x.row(pick);
    taken[static_cast<std::size_t>(pick)] = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[static_cast<std::size_t>(i)] = std::min(d2[static_cast<std::size_t>(i)], sq_dist(x, i, centers, c));
    }
  }
  return centers;
}

/// Moves each empty cluster's centre onto the sample farthest from its own
/// centre. Returns true if anything changed.
bool repair_empty(const FeatureMatrix& x, FeatureMatrix& centers, std::vector<int>& ids,
                  std::vector<double>& d2) {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(centers.rows()), 0);
  for (int id : ids) ++sizes[static_cast<std::size_t>(id)];
  bool changed = false;
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    if (sizes[static_cast<std::size_t>(c)] != 0) continue;
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < d2.size(); ++i) {
      // never strip the last member of another cluster
      if (d2[i] > far_d && sizes[static_cast<std::size_t>(ids[i])] > 1) {
        far_d = d2[i];
        far = i;
      }
    }
    if (far_d < 0.0) break;
    --sizes[static_cast<std::size_t>(ids[far])];
    centers.row(c) = x.row(static_cast<Eigen::Index>(far));
    ids[far] = static_cast<int>(c);
    d2[far] = 0.0;
    ++sizes[static_cast<std::size_t>(c)];
    changed = true;
  }
  return changed;
}

}  // namespace

KMeansModel fit_kmeans(const FeatureMatrix& features, int n_clusters, std::uint64_t seed,
                       int max_iters, double tol) {
  const Eigen::Index n = features.rows();
  if (n_clusters < 1) throw std::invalid_argument("n_clusters must be >= 1");
  if (n < n_clusters) {
    throw std::invalid_argument("cannot fit " + std::to_string(n_clusters) + " clusters to " +
                                std::to_string(n) + " samples");
  }
  Rng rng(seed);
  KMeansModel model;
  model.seed = seed;
  model.centers = kmeanspp_seed(features, n_clusters, rng);

  std::vector<int> ids;
  std::vector<double> d2;
  std::vector<double> counts(static_cast<std::size_t>(n_clusters));
  FeatureMatrix sums(n_clusters, features.cols());

  for (int iter = 0; iter < max_iters; ++iter) {
    double inertia = assign_rows(features, model.centers, ids, d2);
    if (repair_empty(features, model.centers, ids, d2)) {
      inertia = std::accumulate(d2.begin(), d2.end(), 0.0);
    }
    model.inertia_trace.push_back(inertia);
    model.n_iters_run = iter + 1;

    sums.setZero();
    std::fill(counts.begin(), counts.end(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(ids[static_cast<std::size_t>(i)]);
      sums.row(static_cast<Eigen::Index>(c)) += features.row(i);
      counts[c] += 1.0;
    }
    double max_shift = 0.0;
    for (Eigen::Index c = 0; c < n_clusters; ++c) {
      const Eigen::RowVectorXd updated = sums.row(c) / counts[static_cast<std::size_t>(c)];
      max_shift = std::max(max_shift, (updated - model.centers.row(c)).norm());
      model.centers.row(c) = updated;
    }
    if (max_shift <= tol) break;
  }

  model.inertia = assign_rows(features, model.centers, ids, d2);
  while (repair_empty(features, model.centers, ids, d2)) {
    model.inertia = assign_rows(features, model.centers, ids, d2);
  }
  model.assignment = std::move(ids);
  return model;
}

std::vector<int> assign(const KMeansModel& model, const FeatureMatrix& features) {
  if (features.rows() > 0 && features.cols() != model.centers.cols()) {
    throw std::invalid_argument("feature dimension " + std::to_string(features.cols()) +
                                " does not match model dimension " +
                                std::to_string(model.centers.cols()));
  }
  std::vector<int> ids;
  std::vector<double> d2;
  if (features.rows() == 0) return ids;
  assign_rows(features, model.centers, ids, d2);
  return ids;
}

PseudoLabelSet cluster_pseudo_label(const KMeansModel& model, const FeatureMatrix& features,
                                    std::span<const int> cluster_subset,
                                    const std::map<int, int>& center_labels, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("threshold must lie in (0, 1]");
  }
  for (int c : cluster_subset) {
    if (!center_labels.contains(c)) {
      throw std::invalid_argument("cluster " + std::to_string(c) + " has no centre label");
    }
  }
  const auto ids = assign(model, features);
  std::vector<double> dist(ids.size());
  std::vector<double> max_dist(static_cast<std::size_t>(model.n_clusters()), 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    dist[i] = std::sqrt(sq_dist(features, static_cast<Eigen::Index>(i), model.centers, ids[i]));
    max_dist[static_cast<std::size_t>(ids[i])] = std::max(max_dist[static_cast<std::size_t>(ids[i])], dist[i]);
  }

  std::vector<bool> selected(static_cast<std::size_t>(model.n_clusters()), false);
  for (int c : cluster_subset) selected.at(static_cast<std::size_t>(c)) = true;

  PseudoLabelSet out;
  // slack keeps samples exactly on the cut-off (e.g. 0.1 vs 1 - 0.9) admitted
  const double admit = 1.0 - threshold + 1e-12;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto c = static_cast<std::size_t>(ids[i]);
    if (!selected[c]) continue;
    const double norm = max_dist[c] > 0.0 ? dist[i] / max_dist[c] : 0.0;
    if (norm <= admit) {
      out.sample_ids.push_back(i);
      out.cluster_ids.push_back(ids[i]);
      out.class_ids.push_back(center_labels.at(ids[i]));
      out.normalized_distances.push_back(norm);
    }
  }
  return out;
}

std::map<int, int> center_labels_from_truth(const KMeansModel& model,
                                            const FeatureMatrix& features,
                                            std::span<const int> truth,
                                            std::span<const int> clusters) {
  if (truth.size() != static_cast<std::size_t>(features.rows())) {
    throw std::invalid_argument("truth length does not match feature rows");
  }
  const auto ids = assign(model, features);
  std::vector<double> best_d(static_cast<std::size_t>(model.n_clusters()),
                             std::numeric_limits<double>::infinity());
  std::vector<int> best_label(static_cast<std::size_t>(model.n_clusters()), kUnlabeled);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (truth[i] == kUnlabeled) continue;
    const auto c = static_cast<std::size_t>(ids[i]);
    const double d = sq_dist(features, static_cast<Eigen::Index>(i), model.centers, ids[i]);
    if (d < best_d[c]) {
      best_d[c] = d;
      best_label[c] = truth[i];
    }
  }
  std::map<int, int> out;
  for (int c : clusters) {
    const int l = best_label.at(static_cast<std::size_t>(c));
    if (l != kUnlabeled) out[c] = l;
  }
  return out;
}

std::vector<int> select_random_clusters(int n_clusters, int m, std::uint64_t seed) {
  if (m < 0 || m > n_clusters) {
    throw std::invalid_argument("cannot select " + std::to_string(m) + " of " +
                                std::to_string(n_clusters) + " clusters");
  }
  std::vector<int> ids(static_cast<std::size_t>(n_clusters));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, n_clusters - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

void save_kmeans(const KMeansModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "snapseg-kmeans v1\nn_clusters " << model.n_clusters() << "\nfeature_dim "
      << model.dim() << "\nseed " << model.seed << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < model.centers.rows(); ++r) {
    for (Eigen::Index c = 0; c < model.centers.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", model.centers(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

KMeansModel load_kmeans(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic, version, key;
  int k = 0;
  int f = 0;
  KMeansModel model;
  in >> magic >> version;
  if (magic != "snapseg-kmeans") throw ParseError("not a kmeans model file", 1);
  in >> key >> k >> key >> f >> key >> model.seed;
  if (!in || k < 1 || f < 1) throw ParseError("bad kmeans header", 2);
  model.centers.resize(k, f);
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < f; ++c) {
      if (!(in >> model.centers(r, c))) throw ParseError("truncated centres", 5 + static_cast<std::size_t>(r));
    }
  }
  return model;
}

void save_pseudo_labels(const PseudoLabelSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "sample_id,cluster_id,class_id,normalized_distance\n";
  char buf[40];
  for (std::size_t i = 0; i < set.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", set.normalized_distances[i]);
    out << set.sample_ids[i] << ',' << set.cluster_ids[i] << ',' << set.class_ids[i] << ','
        << buf << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

PseudoLabelSet load_pseudo_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  PseudoLabelSet set;
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::size_t id = 0;
    int cluster = 0;
    int cls = 0;
    double nd = 0.0;
    if (!(ss >> id >> cluster >> cls >> nd)) throw ParseError("bad pseudo-label row", line_no);
    set.sample_ids.push_back(id);
    set.cluster_ids.push_back(cluster);
    set.class_ids.push_back(cls);
    set.normalized_distances.push_back(nd);
  }
  return set;
}

}  // namespace snapseg
