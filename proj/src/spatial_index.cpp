// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace snapseg {
namespace {

struct Candidate {
  double d2;
  PointIndex index;
  bool operator<(const Candidate& o) const {
    return d2 < o.d2 || (d2 == o.d2 && index < o.index);
  }
};

double box_distance2(const KdTree::Node& node, const Eigen::Vector3d& q) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (q[a] < node.box_min[a]) {
      d = node.box_min[a] - q[a];
    } else if (q[a] > node.box_max[a]) {
      d = q[a] - node.box_max[a];
    }
    d2 += d * d;
  }
  return d2;
}

class Search {
 public:
  Search(const std::vector<KdTree::Node>& nodes, const std::vector<Eigen::Vector3d>& points,
         const std::vector<PointIndex>& indices, const Eigen::Vector3d& q, std::size_t k)
      : nodes_(nodes), points_(points), indices_(indices), q_(q), k_(k) {
    heap_.reserve(k);
  }

  void visit(std::int32_t id) {
    const auto& node = nodes_[static_cast<std::size_t>(id)];
    if (full() && box_distance2(node, q_) > heap_.front().d2) return;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) offer({(points_[i] - q_).squaredNorm(), indices_[i]});
      return;
    }
    const bool go_left = q_[node.axis] <= node.split;
    visit(go_left ? node.left : node.right);
    visit(go_left ? node.right : node.left);
  }

  std::vector<Candidate>& heap() { return heap_; }

 private:
  bool full() const { return heap_.size() == k_; }

  void offer(const Candidate& c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  const std::vector<KdTree::Node>& nodes_;
  const std::vector<Eigen::Vector3d>& points_;
  const std::vector<PointIndex>& indices_;
  const Eigen::Vector3d& q_;
  std::size_t k_;
  std::vector<Candidate> heap_;
};

}  // namespace

KdTree::KdTree(std::span<const Eigen::Vector3d> positions, std::size_t leaf_size)
    : leaf_size_(leaf_size) {
  if (positions.empty()) throw std::invalid_argument("cannot build a kd-tree over zero points");
  if (leaf_size == 0) throw std::invalid_argument("leaf_size must be at least 1");
  indices_.resize(positions.size());
  std::iota(indices_.begin(), indices_.end(), PointIndex{0});
  points_.assign(positions.begin(), positions.end());
  nodes_.reserve(2 * positions.size() / leaf_size + 1);
  build(0, static_cast<std::uint32_t>(positions.size()));
  // points_ was indexed by original id during build; reorder to leaf order
  std::vector<Eigen::Vector3d> ordered(points_.size());
  for (std::size_t i = 0; i < indices_.size(); ++i) ordered[i] = points_[indices_[i]];
  points_ = std::move(ordered);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  node.box_min.setConstant(std::numeric_limits<double>::infinity());
  node.box_max.setConstant(-std::numeric_limits<double>::infinity());
  for (std::uint32_t i = begin; i < end; ++i) {
    node.box_min = node.box_min.cwiseMin(points_[indices_[i]]);
    node.box_max = node.box_max.cwiseMax(points_[indices_[i]]);
  }

  if (end - begin > leaf_size_) {
    Eigen::Index axis = 0;
    (node.box_max - node.box_min).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    const auto& pts = points_;
    const int a = static_cast<int>(axis);
    std::nth_element(indices_.begin() + begin, indices_.begin() + mid, indices_.begin() + end,
                     [&pts, a](PointIndex l, PointIndex r) {
                       return pts[l][a] < pts[r][a] || (pts[l][a] == pts[r][a] && l < r);
                     });
    node.axis = a;
    node.split = points_[indices_[mid]][a];
    node.left = build(begin, mid);
    node.right = build(mid, end);
  }
  nodes_[static_cast<std::size_t>(id)] = node;
  return id;
}

int KdTree::depth() const {
  std::vector<std::pair<std::int32_t, int>> stack{{0, 1}};
  int best = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.is_leaf()) {
      stack.push_back({n.left, d + 1});
      stack.push_back({n.right, d + 1});
    }
  }
  return best;
}

void KdTree::knn_into(const Eigen::Vector3d& query, std::size_t k,
                      std::vector<Neighbor>& out) const {
  if (k == 0 || k > size()) {
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(size()) + "]");
  }
  Search search(nodes_, points_, indices_, query, k);
  search.visit(0);
  auto& heap = search.heap();
  std::sort_heap(heap.begin(), heap.end());
  out.resize(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) out[i] = {heap[i].index, std::sqrt(heap[i].d2)};
}

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& query, std::size_t k) const {
  std::vector<Neighbor> out;
  knn_into(query, k, out);
  return out;
}

KdTree build_kdtree(const PointCloud& cloud, std::size_t leaf_size) {
  return KdTree(cloud.positions, leaf_size);
}

PointIndex random_anchor(Rng& rng, std::size_t n) {
  if (n == 0) throw std::invalid_argument("random_anchor: n must be at least 1");
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  return static_cast<PointIndex>(pick(rng));
}

}  // namespace snapseg
