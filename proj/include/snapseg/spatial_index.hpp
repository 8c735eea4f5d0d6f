// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_SPATIAL_INDEX_HPP
#define SNAPSEG_SPATIAL_INDEX_HPP

#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "snapseg/common.hpp"
#include "snapseg/scene_io.hpp"

namespace snapseg {

struct Neighbor {
  PointIndex index;
  double distance;
};

/// Immutable kd-tree for exact k-nearest-neighbour queries.
///
/// Nodes split at the median of the axis with the widest extent. Points are
/// copied into leaf order so a leaf scan touches contiguous memory. Queries
/// are const and safe to run concurrently.
class KdTree {
 public:
  struct Node {
    int axis = -1;  // -1 for leaves
    double split = 0.0;
    std::uint32_t begin = 0;  // range into indices()
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    Eigen::Vector3d box_min;
    Eigen::Vector3d box_max;

    bool is_leaf() const { return axis < 0; }
  };

  KdTree(std::span<const Eigen::Vector3d> positions, std::size_t leaf_size = 16);

  /// Exactly k neighbours, nondecreasing distance, ties by ascending index.
  std::vector<Neighbor> knn(const Eigen::Vector3d& query, std::size_t k) const;

  /// Same as knn() but reuses `out` to avoid reallocation in hot loops.
  void knn_into(const Eigen::Vector3d& query, std::size_t k, std::vector<Neighbor>& out) const;

  std::size_t size() const { return indices_.size(); }
  std::size_t leaf_size() const { return leaf_size_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  /// Point indices in leaf order; node ranges index into this.
  const std::vector<PointIndex>& indices() const { return indices_; }
  /// Number of node levels (a single leaf has depth 1).
  int depth() const;

 private:
  std::int32_t build(std::uint32_t begin, std::uint32_t end);

  std::size_t leaf_size_;
  std::vector<Node> nodes_;
  std::vector<PointIndex> indices_;
  std::vector<Eigen::Vector3d> points_;  // positions in leaf order
};

KdTree build_kdtree(const PointCloud& cloud, std::size_t leaf_size = 16);

/// Uniform index in [0, n).
PointIndex random_anchor(Rng& rng, std::size_t n);

}  // namespace snapseg

#endif  // SNAPSEG_SPATIAL_INDEX_HPP
