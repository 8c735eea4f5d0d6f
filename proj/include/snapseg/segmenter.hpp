// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_SEGMENTER_HPP
#define SNAPSEG_SEGMENTER_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "snapseg/clustering.hpp"
#include "snapseg/contrastive.hpp"
#include "snapseg/encoder.hpp"
#include "snapseg/scene_io.hpp"
#include "snapseg/snapshot.hpp"
#include "snapseg/spatial_index.hpp"
#include "snapseg/weak_classifier.hpp"

namespace snapseg {

/// Dense per-point, per-class vote counters.
class VoteTable {
 public:
  VoteTable(std::size_t n_points, int n_classes);

  /// One vote for `class_id` on every listed point.
  void add(std::span<const PointIndex> points, int class_id);

  std::size_t n_points() const { return n_points_; }
  int n_classes() const { return n_classes_; }
  std::uint32_t count(PointIndex p, int c) const {
    return counts_[static_cast<std::size_t>(p) * static_cast<std::size_t>(n_classes_) + static_cast<std::size_t>(c)];
  }
  std::uint64_t total(PointIndex p) const;
  bool covered(PointIndex p) const { return totals_[p] > 0; }
  std::size_t n_covered() const { return n_covered_; }
  double coverage() const;
  /// Sum of all counters.
  std::uint64_t total_votes() const { return total_votes_; }

  /// Class with the most votes, ties to the smallest id; kUnlabeled when
  /// the point has no votes.
  int argmax(PointIndex p) const;
  /// Number of classes sharing the top count (0 when uncovered).
  int top_multiplicity(PointIndex p) const;

  void save(const std::string& path) const;
  static VoteTable load(const std::string& path);

 private:
  std::size_t n_points_;
  int n_classes_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> totals_;
  std::size_t n_covered_ = 0;
  std::uint64_t total_votes_ = 0;
};

/// Class of a captured snapshot (at the FOV chosen for it).
using SnapshotClassifier = std::function<int(const Snapshot&)>;

/// gather -> normalize -> encoder features -> SVM.
SnapshotClassifier make_snapshot_classifier(const PointCloud& cloud, const EncoderModel& model,
                                            const LinearSvm& svm);

struct SegmentConfig {
  std::size_t K = 512;
  std::vector<int> fov_scales{1, 2, 10};
  double coverage_stop = 0.9995;
  /// 0 means 200 * N / K.
  std::size_t max_iters = 0;
  std::uint64_t seed = 0;
  /// When non-empty, colored PLYs "<prefix>_<pct>.ply" are written as
  /// coverage crosses 25, 50, 75 and 100% (of coverage_stop).
  std::string progress_prefix;

  void validate() const;
};

struct CaptureRecord {
  std::size_t iter = 0;
  PointIndex anchor = 0;
  int fov_scale = 1;
  int predicted_class = 0;
  std::size_t presample_size = 0;
};

struct SegmentRun {
  VoteTable votes;
  std::size_t iterations = 0;
  double coverage = 0.0;
  /// False when max_iters ran out before coverage_stop was reached.
  bool complete = false;
  /// Covered point count after each iteration.
  std::vector<std::size_t> covered_trace;
  std::vector<CaptureRecord> captures;
};

/// Capture-predict-assign loop: random anchor, largest-FOV pre-sample,
/// variance, FOV choice, down-sample, predict, one vote on every point of the
/// chosen FOV's pre-sample. Stops at coverage_stop or max_iters.
SegmentRun segment(const PointCloud& cloud, const KdTree& tree, const SnapshotClassifier& classify,
                   AdaptiveFovSelector& selector, const SegmentConfig& cfg);

struct Resolution {
  std::vector<int> labels;
  std::size_t ties_resolved = 0;
  /// Uncovered points that took their nearest covered neighbour's label.
  std::size_t inherited = 0;
};

/// Argmax of each point's votes. Tied points get one extra vote for the
/// majority of their knn_k nearest neighbours' current argmax labels; what is
/// still tied goes to the smallest class id.
Resolution resolve_votes(const VoteTable& votes, const KdTree& tree, const PointCloud& cloud,
                         std::size_t knn_k = 5);

/// CSV "iter,anchor,fov_scale,predicted_class".
void save_capture_log(std::span<const CaptureRecord> captures, const std::string& path);
std::vector<CaptureRecord> load_capture_log(const std::string& path);

struct FineTuneResult {
  EncoderModel model;
  std::vector<EpochStats> trace;
  /// Cluster pseudo-labels of the fine-tune samples.
  std::vector<int> cluster_ids;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

/// Labels the first n_finetune new-scene sets with the frozen KMeans (on
/// ContrastNet features) and continues ClusterNet training on them.
/// n_finetune = 0 returns the ClusterNet unchanged.
FineTuneResult fine_tune_for_scene(const EncoderModel& clusternet, const EncoderModel& contrastnet,
                                   const KMeansModel& kmeans, std::span<const NormalizedSet> new_sets,
                                   std::size_t n_finetune, const TrainConfig& cfg);

}  // namespace snapseg

#endif  // SNAPSEG_SEGMENTER_HPP
