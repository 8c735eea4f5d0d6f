// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_CLUSTERING_HPP
#define SNAPSEG_CLUSTERING_HPP

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "snapseg/common.hpp"

namespace snapseg {

struct KMeansModel {
  FeatureMatrix centers;  // n_clusters x F
  int n_iters_run = 0;
  double inertia = 0.0;
  /// Inertia after each assignment step, in iteration order.
  std::vector<double> inertia_trace;
  /// Final assignment of the fitted samples.
  std::vector<int> assignment;
  std::uint64_t seed = 0;

  int n_clusters() const { return static_cast<int>(centers.rows()); }
  int dim() const { return static_cast<int>(centers.cols()); }
};

/// KMeans++ seeding followed by Lloyd iterations. Stops when no centre moves
/// more than `tol` or after `max_iters`. An empty cluster is re-seeded at the
/// sample farthest from its own centre.
KMeansModel fit_kmeans(const FeatureMatrix& features, int n_clusters, std::uint64_t seed,
                       int max_iters = 300, double tol = 1e-8);

/// Nearest centre per row; ties go to the smallest centre id.
std::vector<int> assign(const KMeansModel& model, const FeatureMatrix& features);

/// Samples that inherit the semantic label of their cluster's centre.
struct PseudoLabelSet {
  std::vector<std::size_t> sample_ids;
  std::vector<int> class_ids;
  std::vector<int> cluster_ids;
  std::vector<double> normalized_distances;

  std::size_t size() const { return sample_ids.size(); }
};

/// Labels the members of each cluster in `cluster_subset` with that cluster's
/// entry in `center_labels`, admitting members whose distance to the centre,
/// divided by the largest member distance in the cluster, is at most
/// 1 - threshold. A larger threshold therefore admits fewer samples.
PseudoLabelSet cluster_pseudo_label(const KMeansModel& model, const FeatureMatrix& features,
                                    std::span<const int> cluster_subset,
                                    const std::map<int, int>& center_labels, double threshold);

/// One annotation per cluster: the true label of the member nearest to its
/// centre. Clusters without members (for `features`) are skipped.
std::map<int, int> center_labels_from_truth(const KMeansModel& model,
                                            const FeatureMatrix& features,
                                            std::span<const int> truth,
                                            std::span<const int> clusters);

/// m distinct ids drawn uniformly from [0, n_clusters), ascending.
std::vector<int> select_random_clusters(int n_clusters, int m, std::uint64_t seed);

void save_kmeans(const KMeansModel& model, const std::string& path);
KMeansModel load_kmeans(const std::string& path);

/// CSV "sample_id,cluster_id,class_id,normalized_distance".
void save_pseudo_labels(const PseudoLabelSet& set, const std::string& path);
PseudoLabelSet load_pseudo_labels(const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_CLUSTERING_HPP
