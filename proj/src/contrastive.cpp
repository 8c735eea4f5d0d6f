// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/contrastive.hpp"

#include <algorithm>
#include <numeric>

namespace snapseg {
namespace {

Eigen::Vector3d random_unit(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

/// Exactly `target` columns drawn from `members`: a random subset when there
/// are enough, otherwise all of them plus draws with replacement.
PointSet resample(const PointSet& src, const std::vector<Eigen::Index>& members,
                  Eigen::Index target, Rng& rng) {
  PointSet out(3, target);
  const auto m = static_cast<Eigen::Index>(members.size());
  if (m >= target) {
    std::vector<Eigen::Index> pool = members;
    for (Eigen::Index i = 0; i < target; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), pool.size() - 1);
      std::swap(pool[static_cast<std::size_t>(i)], pool[pick(rng)]);
      out.col(i) = src.col(pool[static_cast<std::size_t>(i)]);
    }
  } else {
    for (Eigen::Index i = 0; i < m; ++i) out.col(i) = src.col(members[static_cast<std::size_t>(i)]);
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    for (Eigen::Index i = m; i < target; ++i) out.col(i) = src.col(members[pick(rng)]);
  }
  return out;
}

std::size_t other_index(std::size_t i, std::size_t n, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  std::size_t j = pick(rng);
  return j >= i ? j + 1 : j;
}

bool coin(Rng& rng) { return std::uniform_int_distribution<int>(0, 1)(rng) == 1; }

const PointSet& half_of(const HalfCut& cut, int half) { return half == 0 ? cut.left : cut.right; }

ContrastPair make_pair(const PointSet& a, PairSource sa, const PointSet& b, PairSource sb,
                       int label, PretextMode mode, Rng& rng) {
  ContrastPair p;
  p.label = label;
  p.mode = mode;
  if (coin(rng)) {
    p.a = normalize(b);
    p.b = normalize(a);
    p.source_a = sb;
    p.source_b = sa;
  } else {
    p.a = normalize(a);
    p.b = normalize(b);
    p.source_a = sa;
    p.source_b = sb;
  }
  return p;
}

void shuffle_pairs(std::vector<ContrastPair>& pairs, Rng& rng) {
  for (std::size_t i = pairs.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(pairs[i - 1], pairs[pick(rng)]);
  }
}

template <typename T>
void require_two(std::span<const T> items, const char* what) {
  if (items.size() < 2) throw std::invalid_argument(std::string(what) + ": need at least 2 snapshots");
}

}  // namespace

PointSet gather(const PointCloud& cloud, std::span<const PointIndex> indices) {
  PointSet out(3, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t i = 0; i < indices.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = cloud.positions[indices[i]];
  return out;
}

NormalizedSet normalize(const PointSet& points) {
  NormalizedSet out;
  if (points.cols() == 0) return out;
  const Eigen::Vector3d centroid = points.rowwise().mean();
  out.points = points.colwise() - centroid;
  const double radius = out.points.colwise().norm().maxCoeff();
  if (radius > 0.0) {
    out.points /= radius;
    out.scale = radius;
  } else {
    out.scale = 0.0;
  }
  return out;
}

std::string to_string(PretextMode mode) {
  switch (mode) {
    case PretextMode::kPart:
      return "part";
    case PretextMode::kScale:
      return "scale";
    case PretextMode::kMultiFov:
      return "multi_fov";
  }
  return "?";
}

PretextMode parse_pretext_mode(const std::string& name) {
  if (name == "part") return PretextMode::kPart;
  if (name == "scale") return PretextMode::kScale;
  if (name == "multi_fov") return PretextMode::kMultiFov;
  throw std::invalid_argument("unknown pretext mode '" + name + "'");
}

HalfCut random_half_cut(const PointSet& points, Rng& rng) {
  const Eigen::Index k = points.cols();
  if (k < 4) throw std::invalid_argument("random_half_cut: need at least 4 points");
  const Eigen::Vector3d centroid = points.rowwise().mean();

  HalfCut cut;
  Eigen::Vector3d normal;
  for (int attempt = 0; attempt < 10; ++attempt) {
    normal = random_unit(rng);
    cut.left_members.clear();
    cut.right_members.clear();
    for (Eigen::Index i = 0; i < k; ++i) {
      if ((points.col(i) - centroid).dot(normal) > 0.0) {
        cut.right_members.push_back(i);
      } else {
        cut.left_members.push_back(i);
      }
    }
    if (!cut.left_members.empty() && !cut.right_members.empty()) break;
  }
  if (cut.left_members.empty() || cut.right_members.empty()) {
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::VectorXd proj = (points.colwise() - centroid).transpose() * normal;
    std::stable_sort(order.begin(), order.end(),
                     [&proj](Eigen::Index a, Eigen::Index b) { return proj[a] < proj[b]; });
    const auto mid = order.begin() + k / 2;
    cut.left_members.assign(order.begin(), mid);
    cut.right_members.assign(mid, order.end());
    std::sort(cut.left_members.begin(), cut.left_members.end());
    std::sort(cut.right_members.begin(), cut.right_members.end());
  }
  const Eigen::Index half = k / 2;
  cut.left = resample(points, cut.left_members, half, rng);
  cut.right = resample(points, cut.right_members, half, rng);
  return cut;
}

std::vector<ContrastPair> make_part_pairs(std::span<const PointSet> snapshots,
                                          std::size_t pairs_per_snapshot, Rng& rng) {
  require_two(snapshots, "make_part_pairs");
  std::vector<ContrastPair> pairs;
  pairs.reserve(2 * snapshots.size() * pairs_per_snapshot);
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    for (std::size_t r = 0; r < pairs_per_snapshot; ++r) {
      const HalfCut own = random_half_cut(snapshots[i], rng);
      pairs.push_back(make_pair(own.left, {i, 0, 0}, own.right, {i, 0, 1}, 1, PretextMode::kPart, rng));

      const std::size_t j = other_index(i, snapshots.size(), rng);
      const HalfCut other = random_half_cut(snapshots[j], rng);
      const int hi = coin(rng) ? 1 : 0;
      const int hj = coin(rng) ? 1 : 0;
      pairs.push_back(make_pair(half_of(own, hi), {i, 0, hi}, half_of(other, hj), {j, 0, hj}, 0,
                                PretextMode::kPart, rng));
    }
  }
  shuffle_pairs(pairs, rng);
  return pairs;
}

std::vector<ContrastPair> make_scale_pairs(std::span<const ViewSet> multi_snapshots,
                                           std::size_t pairs_per_snapshot, Rng& rng) {
  require_two(multi_snapshots, "make_scale_pairs");
  for (const auto& m : multi_snapshots) {
    if (m.size() < 2) throw std::invalid_argument("make_scale_pairs: need at least 2 views per anchor");
  }
  std::vector<ContrastPair> pairs;
  pairs.reserve(2 * multi_snapshots.size() * pairs_per_snapshot);
  for (std::size_t i = 0; i < multi_snapshots.size(); ++i) {
    const auto& views = multi_snapshots[i];
    for (std::size_t r = 0; r < pairs_per_snapshot; ++r) {
      std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);
      std::size_t u = pick_view(rng);
      std::size_t v = other_index(u, views.size(), rng);
      if (u > v) std::swap(u, v);
      pairs.push_back(make_pair(views[u], {i, u, -1}, views[v], {i, v, -1}, 1, PretextMode::kScale, rng));

      const std::size_t j = other_index(i, multi_snapshots.size(), rng);
      const auto& others = multi_snapshots[j];
      const std::size_t vi = pick_view(rng);
      const std::size_t vj = std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng);
      pairs.push_back(make_pair(views[vi], {i, vi, -1}, others[vj], {j, vj, -1}, 0, PretextMode::kScale, rng));
    }
  }
  shuffle_pairs(pairs, rng);
  return pairs;
}

std::vector<ContrastPair> make_multifov_pairs(std::span<const ViewSet> multi_snapshots,
                                              std::size_t pairs_per_snapshot, Rng& rng) {
  require_two(multi_snapshots, "make_multifov_pairs");
  for (const auto& m : multi_snapshots) {
    if (m.size() < 2) throw std::invalid_argument("make_multifov_pairs: need at least 2 views per anchor");
  }
  std::vector<ContrastPair> pairs;
  pairs.reserve(2 * multi_snapshots.size() * pairs_per_snapshot);
  for (std::size_t i = 0; i < multi_snapshots.size(); ++i) {
    const auto& views = multi_snapshots[i];
    std::uniform_int_distribution<std::size_t> pick_view(0, views.size() - 1);
    for (std::size_t r = 0; r < pairs_per_snapshot; ++r) {
      std::vector<HalfCut> cuts;
      cuts.reserve(views.size());
      for (const auto& v : views) cuts.push_back(random_half_cut(v, rng));

      if (coin(rng)) {
        const std::size_t v = pick_view(rng);
        pairs.push_back(make_pair(cuts[v].left, {i, v, 0}, cuts[v].right, {i, v, 1}, 1,
                                  PretextMode::kMultiFov, rng));
      } else {
        std::size_t u = pick_view(rng);
        std::size_t v = other_index(u, views.size(), rng);
        if (u > v) std::swap(u, v);
        const int hu = coin(rng) ? 1 : 0;
        const int hv = coin(rng) ? 1 : 0;
        pairs.push_back(make_pair(half_of(cuts[u], hu), {i, u, hu}, half_of(cuts[v], hv), {i, v, hv},
                                  1, PretextMode::kMultiFov, rng));
      }

      const std::size_t j = other_index(i, multi_snapshots.size(), rng);
      const auto& others = multi_snapshots[j];
      const std::size_t vi = pick_view(rng);
      const std::size_t vj = std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng);
      const HalfCut other = random_half_cut(others[vj], rng);
      const int hi = coin(rng) ? 1 : 0;
      const int hj = coin(rng) ? 1 : 0;
      pairs.push_back(make_pair(half_of(cuts[vi], hi), {i, vi, hi}, half_of(other, hj), {j, vj, hj}, 0,
                                PretextMode::kMultiFov, rng));
    }
  }
  shuffle_pairs(pairs, rng);
  return pairs;
}

}  // namespace snapseg
