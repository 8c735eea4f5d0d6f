// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <vector>

#include "oracles.hpp"
#include "snapseg/spatial_index.hpp"

using namespace snapseg;
using snapseg::testing::brute_knn;
using snapseg::testing::random_points;

namespace {

void check_against_brute(const std::vector<Eigen::Vector3d>& pts, const KdTree& tree,
                         const Eigen::Vector3d& q, std::size_t k) {
  const auto got = tree.knn(q, k);
  const auto want = brute_knn(pts, q, k);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].index == want[i].index);
    CHECK(got[i].distance == want[i].distance);
  }
}

}  // namespace

TEST_CASE("kNN matches brute force on random points for several leaf sizes") {
  const auto pts = random_points(2000, 7);
  const auto queries = random_points(50, 8, 12.0);
  for (std::size_t leaf : {1u, 4u, 16u, 64u}) {
    const KdTree tree(pts, leaf);
    for (const auto& q : queries) {
      for (std::size_t k : {1u, 5u, 64u}) check_against_brute(pts, tree, q, k);
    }
  }
}

TEST_CASE("ties are broken by ascending index") {
  // A lattice puts many points at identical distances from its centre.
  std::vector<Eigen::Vector3d> pts;
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y)
      for (int z = -2; z <= 2; ++z) pts.emplace_back(x, y, z);
  // duplicates at the origin
  pts.emplace_back(0, 0, 0);
  pts.emplace_back(0, 0, 0);
  const KdTree tree(pts, 3);
  for (std::size_t k : {1u, 3u, 7u, 20u, 50u, 127u}) check_against_brute(pts, tree, {0, 0, 0}, k);
  check_against_brute(pts, tree, {0.5, 0.5, 0.5}, 30);
}

TEST_CASE("every point appears in exactly one leaf and boxes contain their points") {
  const auto pts = random_points(1000, 3);
  const KdTree tree(pts, 8);
  std::multiset<PointIndex> seen(tree.indices().begin(), tree.indices().end());
  CHECK(seen.size() == pts.size());
  for (PointIndex i = 0; i < pts.size(); ++i) CHECK(seen.count(i) == 1);
  for (const auto& node : tree.nodes()) {
    for (auto j = node.begin; j < node.end; ++j) {
      const auto& p = pts[tree.indices()[j]];
      CHECK((p.array() >= node.box_min.array()).all());
      CHECK((p.array() <= node.box_max.array()).all());
    }
    if (node.is_leaf()) CHECK(node.end - node.begin <= 8);
  }
  CHECK(tree.depth() >= 7);
}

TEST_CASE("k = n returns the whole cloud sorted; invalid k is rejected") {
  const auto pts = random_points(40, 11);
  const KdTree tree(pts);
  check_against_brute(pts, tree, {5, 5, 5}, 40);
  CHECK_THROWS_AS(tree.knn({0, 0, 0}, 0), std::invalid_argument);
  CHECK_THROWS_AS(tree.knn({0, 0, 0}, 41), std::invalid_argument);
  CHECK_THROWS_AS(KdTree(std::vector<Eigen::Vector3d>{}), std::invalid_argument);
}

TEST_CASE("knn_into reuses its buffer and agrees with knn") {
  const auto pts = random_points(500, 5);
  const KdTree tree(pts);
  std::vector<Neighbor> buf;
  for (const auto& q : random_points(20, 6)) {
    tree.knn_into(q, 9, buf);
    const auto ref = tree.knn(q, 9);
    REQUIRE(buf.size() == ref.size());
    for (std::size_t i = 0; i < buf.size(); ++i) CHECK(buf[i].index == ref[i].index);
  }
}

TEST_CASE("random_anchor stays in range and is seed-deterministic") {
  Rng a(42);
  Rng b(42);
  for (int i = 0; i < 1000; ++i) {
    const PointIndex x = random_anchor(a, 17);
    CHECK(x < 17);
    CHECK(x == random_anchor(b, 17));
  }
  CHECK_THROWS(random_anchor(a, 0));
}
