// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_SNAPSHOT_HPP
#define SNAPSEG_SNAPSHOT_HPP

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snapseg/common.hpp"
#include "snapseg/scene_io.hpp"
#include "snapseg/spatial_index.hpp"

namespace snapseg {

/// An anchor-centred kNN neighbourhood at one field of view.
///
/// `presampled` holds the K * fov_scale nearest neighbours of the anchor in
/// distance order with the anchor first; `downsampled` is the K-point
/// network input drawn from it, always containing the anchor.
struct Snapshot {
  PointIndex anchor = 0;
  int fov_scale = 1;
  std::vector<PointIndex> presampled;
  std::vector<PointIndex> downsampled;
};

/// Views of one anchor ordered by ascending fov_scale. Presampled sets are
/// prefixes of one kNN list, hence nested.
struct MultiFovSnapshot {
  PointIndex anchor = 0;
  std::vector<Snapshot> views;
};

struct SnapshotLabel {
  int class_id = kUnlabeled;
  double purity = 0.0;
};

/// The n nearest neighbours of `anchor`, with the anchor moved to the front.
/// Coincident points can push the anchor out of its own neighbourhood; it
/// then replaces the farthest entry.
std::vector<PointIndex> anchored_neighborhood(const KdTree& tree, const PointCloud& cloud,
                                              PointIndex anchor, std::size_t n);

/// Uniform K-subset of `presampled` that keeps the anchor, in presample order.
std::vector<PointIndex> downsample(std::span<const PointIndex> presampled, std::size_t K,
                                   PointIndex anchor, Rng& rng);

Snapshot sample_single_fov(const KdTree& tree, const PointCloud& cloud, PointIndex anchor,
                           std::size_t K, int presample_factor, Rng& rng);

/// One kNN query at the largest scale; every view takes a prefix of it.
/// `fov_scales` must be strictly increasing and start at 1.
MultiFovSnapshot sample_multi_fov(const KdTree& tree, const PointCloud& cloud,
                                  PointIndex anchor, std::size_t K,
                                  std::span<const int> fov_scales, Rng& rng);

void validate_fov_scales(std::span<const int> fov_scales);

/// Majority class and purity of a member list. Ties go to
/// the smallest class id; purity is the winner's share of all members.
SnapshotLabel vote_label(std::span<const int> member_labels);

/// vote_label over the down-sampled members of `snapshot`.
SnapshotLabel label_snapshot(const PointCloud& cloud, const Snapshot& snapshot);

struct ClassPurity {
  bool present = false;  // false: no snapshot voted this class
  double mean_purity = 0.0;
  double std_purity = 0.0;
  double mean_count = 0.0;  // snapshots per run
};

struct PurityReport {
  std::vector<ClassPurity> per_class;
  double overall_mean = 0.0;
  double overall_std = 0.0;
  std::size_t n_samples = 0;
};

/// Aggregates labels collected over `n_runs` independent sampling runs.
PurityReport purity_report(std::span<const SnapshotLabel> samples, int n_classes,
                           std::size_t n_runs = 1);

/// Mean squared distance of the points to their centroid.
double presample_variance(const PointCloud& cloud, std::span<const PointIndex> presampled);

/// Picks a field of view from the spread of a largest-FOV pre-sample.
///
/// Variances are collected over the run; once `warmup_min` have been seen a
/// 1-D KMeans with one cluster per scale is fit (and refit every
/// `refit_interval` new samples). Clusters sorted by centre map onto scales
/// sorted ascending, so a tight pre-sample gets a small field of view.
class AdaptiveFovSelector {
 public:
  AdaptiveFovSelector(std::vector<int> fov_scales, std::size_t warmup_min = 256,
                      std::size_t refit_interval = 512, std::uint64_t seed = 0);

  /// Records `variance` and returns the scale to use for it.
  int select(double variance);

  /// Scale the current model would pick, without recording anything.
  int lookup(double variance) const;

  bool warmed_up() const { return !centers_.empty(); }
  const std::vector<double>& centers() const { return centers_; }
  const std::vector<double>& history() const { return history_; }
  const std::vector<int>& fov_scales() const { return fov_scales_; }

 private:
  void refit();

  std::vector<int> fov_scales_;  // ascending
  std::size_t warmup_min_;
  std::size_t refit_interval_;
  std::uint64_t seed_;
  std::vector<double> history_;
  std::vector<double> centers_;  // ascending, one per scale once fit
  std::size_t fitted_at_ = 0;
};

int select_fov(AdaptiveFovSelector& selector, double presample_variance);

// Snapshot set files: a three-line header ("K <n>", "fov_scales <s...>",
// "seed <n>") followed by one "anchor fov_scale idx..." line per view.

struct SnapshotSetHeader {
  std::size_t K = 0;
  std::vector<int> fov_scales;
  std::uint64_t seed = 0;
};

void save_snapshot_set(const std::string& path, const SnapshotSetHeader& header,
                       std::span<const MultiFovSnapshot> snapshots);

/// Views are regrouped per anchor; presampled lists are not stored and come
/// back empty.
std::pair<SnapshotSetHeader, std::vector<MultiFovSnapshot>> load_snapshot_set(
    const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_SNAPSHOT_HPP
