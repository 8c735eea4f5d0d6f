// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_CONTRASTIVE_HPP
#define SNAPSEG_CONTRASTIVE_HPP

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapseg/common.hpp"
#include "snapseg/scene_io.hpp"

namespace snapseg {

/// A network input: one point per column.
using PointSet = Eigen::Matrix3Xd;

/// A point set centred on its centroid and scaled to unit max radius.
/// `scale` is the radius that was divided out (the optional side channel).
struct NormalizedSet {
  PointSet points;
  double scale = 1.0;
};

PointSet gather(const PointCloud& cloud, std::span<const PointIndex> indices);
NormalizedSet normalize(const PointSet& points);

enum class PretextMode { kPart, kScale, kMultiFov };

std::string to_string(PretextMode mode);
PretextMode parse_pretext_mode(const std::string& name);

/// Where one side of a pair came from. `half` is -1 for a whole view.
struct PairSource {
  std::size_t snapshot = 0;
  std::size_t view = 0;
  int half = -1;
};

struct ContrastPair {
  NormalizedSet a;
  NormalizedSet b;
  int label = 0;  // 1: same source, 0: different sources
  PretextMode mode = PretextMode::kPart;
  PairSource source_a;
  PairSource source_b;
};

/// Two halves of a snapshot split by a random plane through its centroid.
/// `*_members` are column indices into the source (a partition of it);
/// `left` / `right` are those members re-sampled to K/2 points each.
struct HalfCut {
  PointSet left;
  PointSet right;
  std::vector<Eigen::Index> left_members;
  std::vector<Eigen::Index> right_members;
};

/// Up to ten random normals are tried before falling back to a median split
/// along the last drawn normal, so both sides are never empty. Requires at
/// least 4 points.
HalfCut random_half_cut(const PointSet& points, Rng& rng);

/// Views of one anchor, ascending field of view (raw coordinates).
using ViewSet = std::vector<PointSet>;

/// Per snapshot and repetition: its two halves (positive) and one of its
/// halves against a half of another snapshot (negative). Shuffled.
std::vector<ContrastPair> make_part_pairs(std::span<const PointSet> snapshots,
                                          std::size_t pairs_per_snapshot, Rng& rng);

/// Positive: two different views of the same anchor. Negative: views of
/// two different anchors. Balanced, shuffled.
std::vector<ContrastPair> make_scale_pairs(std::span<const ViewSet> multi_snapshots,
                                           std::size_t pairs_per_snapshot, Rng& rng);

/// Every view is half-cut. Positive: two halves of the same anchor, from
/// the same view or two different views with equal probability. Negative:
/// halves of different anchors. Balanced, shuffled.
std::vector<ContrastPair> make_multifov_pairs(std::span<const ViewSet> multi_snapshots,
                                              std::size_t pairs_per_snapshot, Rng& rng);

}  // namespace snapseg

#endif  // SNAPSEG_CONTRASTIVE_HPP
