// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "oracles.hpp"
#include "snapseg/contrastive.hpp"

using namespace snapseg;

namespace {

PointSet random_set(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  const auto pts = snapseg::testing::random_points(static_cast<std::size_t>(n), seed, scale);
  PointSet s(3, n);
  for (Eigen::Index i = 0; i < n; ++i) s.col(i) = pts[static_cast<std::size_t>(i)];
  return s;
}

std::vector<ViewSet> random_views(std::size_t n, std::uint64_t seed) {
  std::vector<ViewSet> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({random_set(32, seed + 10 * i, 1.0), random_set(32, seed + 10 * i + 1, 2.0),
                   random_set(32, seed + 10 * i + 2, 10.0)});
  }
  return out;
}

}  // namespace

TEST_CASE("normalize centres on the centroid and scales to unit max radius") {
  const PointSet s = random_set(100, 1, 7.0).array() + 50.0;
  const auto n = normalize(s);
  CHECK(n.points.rowwise().mean().norm() < 1e-12);
  CHECK(n.points.colwise().norm().maxCoeff() == doctest::Approx(1.0));
  // scale undoes the normalisation
  const Eigen::Vector3d c = s.rowwise().mean();
  CHECK(((n.points * n.scale).colwise() + c - s).cwiseAbs().maxCoeff() < 1e-9);

  PointSet same(3, 4);
  same.setConstant(2.0);
  const auto z = normalize(same);
  CHECK(z.scale == 0.0);
  CHECK(z.points.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gather copies positions in index order") {
  const auto cloud = snapseg::testing::make_cloud({{0, 0, 0}, {1, 2, 3}, {4, 5, 6}});
  const std::vector<PointIndex> idx{2, 0};
  const PointSet g = gather(cloud, idx);
  CHECK(g.col(0) == Eigen::Vector3d(4, 5, 6));
  CHECK(g.col(1) == Eigen::Vector3d(0, 0, 0));
}

TEST_CASE("half cut partitions the source and resamples each side to K/2") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const PointSet s = random_set(33, 100 + t);
    const auto cut = random_half_cut(s, rng);
    std::set<Eigen::Index> all(cut.left_members.begin(), cut.left_members.end());
    for (auto i : cut.right_members) CHECK(all.insert(i).second);
    CHECK(all.size() == 33);
    CHECK_FALSE(cut.left_members.empty());
    CHECK_FALSE(cut.right_members.empty());
    CHECK(cut.left.cols() == 16);
    CHECK(cut.right.cols() == 16);
    // every resampled column comes from its own side
    for (Eigen::Index c = 0; c < cut.left.cols(); ++c) {
      bool found = false;
      for (auto i : cut.left_members) found = found || (s.col(i) == cut.left.col(c));
      CHECK(found);
    }
  }
  CHECK_THROWS(random_half_cut(random_set(3, 1), rng));
}

TEST_CASE("half cut of fully coincident points falls back to a median split") {
  PointSet s(3, 8);
  s.setZero();
  Rng rng(1);
  const auto cut = random_half_cut(s, rng);
  CHECK(cut.left_members.size() == 4);
  CHECK(cut.right_members.size() == 4);
}

TEST_CASE("part pairs: balanced, positives share a source, negatives do not") {
  std::vector<PointSet> snaps;
  for (int i = 0; i < 20; ++i) snaps.push_back(random_set(32, 200 + i));
  Rng rng(2);
  const auto pairs = make_part_pairs(snaps, 3, rng);
  CHECK(pairs.size() == 120);
  int pos = 0;
  for (const auto& p : pairs) {
    CHECK(p.mode == PretextMode::kPart);
    CHECK(p.a.points.cols() == 16);
    if (p.label == 1) {
      ++pos;
      CHECK(p.source_a.snapshot == p.source_b.snapshot);
      CHECK(p.source_a.half != p.source_b.half);
    } else {
      CHECK(p.source_a.snapshot != p.source_b.snapshot);
    }
  }
  CHECK(pos == 60);
}

TEST_CASE("scale pairs compare whole views of one or two anchors") {
  const auto views = random_views(10, 7);
  Rng rng(3);
  const auto pairs = make_scale_pairs(views, 2, rng);
  CHECK(pairs.size() == 40);
  int pos = 0;
  for (const auto& p : pairs) {
    CHECK(p.source_a.half == -1);
    CHECK(p.a.points.cols() == 32);
    if (p.label == 1) {
      ++pos;
      CHECK(p.source_a.snapshot == p.source_b.snapshot);
      CHECK(p.source_a.view != p.source_b.view);
    } else {
      CHECK(p.source_a.snapshot != p.source_b.snapshot);
    }
  }
  CHECK(pos == 20);
  const std::vector<ViewSet> single{{random_set(8, 1)}, {random_set(8, 2)}};
  CHECK_THROWS(make_scale_pairs(single, 1, rng));
}

TEST_CASE("multi-FOV pairs mix within-view and cross-view positives") {
  const auto views = random_views(30, 9);
  Rng rng(4);
  const auto pairs = make_multifov_pairs(views, 4, rng);
  CHECK(pairs.size() == 240);
  int pos = 0;
  int cross = 0;
  for (const auto& p : pairs) {
    CHECK(p.source_a.half >= 0);
    CHECK(p.a.points.cols() == 16);
    if (p.label == 1) {
      ++pos;
      CHECK(p.source_a.snapshot == p.source_b.snapshot);
      if (p.source_a.view != p.source_b.view) {
        ++cross;
      } else {
        CHECK(p.source_a.half != p.source_b.half);
      }
    } else {
      CHECK(p.source_a.snapshot != p.source_b.snapshot);
    }
  }
  CHECK(pos == 120);
  CHECK(cross > 30);
  CHECK(cross < 90);
}

TEST_CASE("pair generation is deterministic for a seed") {
  const auto views = random_views(5, 1);
  Rng a(8);
  Rng b(8);
  const auto pa = make_multifov_pairs(views, 1, a);
  const auto pb = make_multifov_pairs(views, 1, b);
  REQUIRE(pa.size() == pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].label == pb[i].label);
    CHECK(pa[i].a.points == pb[i].a.points);
  }
  CHECK(parse_pretext_mode(to_string(PretextMode::kScale)) == PretextMode::kScale);
  CHECK_THROWS(parse_pretext_mode("nope"));
}
