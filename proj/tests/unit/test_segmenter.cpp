// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <vector>

#include "oracles.hpp"
#include "snapseg/segmenter.hpp"

using namespace snapseg;
using snapseg::testing::brute_knn;
using snapseg::testing::make_cloud;
using snapseg::testing::random_points;

namespace {

/// Labels by x coordinate: three slabs.
PointCloud slab_cloud(std::size_t n, std::uint64_t seed) {
  auto pts = random_points(n, seed, 30.0);
  std::vector<int> labels;
  for (const auto& p : pts) labels.push_back(p.x() < 10 ? 0 : p.x() < 20 ? 1 : 2);
  return make_cloud(std::move(pts), std::move(labels), 3);
}

SnapshotClassifier truth_classifier(const PointCloud& cloud) {
  return [&cloud](const Snapshot& s) { return label_snapshot(cloud, s).class_id; };
}

}  // namespace

TEST_CASE("vote table counts, argmax with ties, and coverage") {
  VoteTable v(5, 3);
  CHECK(v.coverage() == 0.0);
  CHECK(v.argmax(0) == kUnlabeled);
  CHECK(v.top_multiplicity(0) == 0);
  v.add(std::vector<PointIndex>{0, 1, 2}, 2);
  v.add(std::vector<PointIndex>{1, 2}, 0);
  v.add(std::vector<PointIndex>{2}, 0);
  CHECK(v.count(1, 0) == 1);
  CHECK(v.count(1, 2) == 1);
  CHECK(v.argmax(1) == 0);  // tie -> smaller id
  CHECK(v.top_multiplicity(1) == 2);
  CHECK(v.argmax(2) == 0);
  CHECK(v.top_multiplicity(2) == 1);
  CHECK(v.total(2) == 3);
  CHECK(v.n_covered() == 3);
  CHECK(v.coverage() == doctest::Approx(0.6));
  CHECK(v.total_votes() == 6);
  CHECK_THROWS(v.add(std::vector<PointIndex>{9}, 0));
  CHECK_THROWS(v.add(std::vector<PointIndex>{0}, 3));

  snapseg::testing::TempDir dir("votes");
  v.save(dir.file("v.txt"));
  const auto back = VoteTable::load(dir.file("v.txt"));
  CHECK(back.n_covered() == 3);
  CHECK(back.total_votes() == 6);
  for (PointIndex p = 0; p < 5; ++p)
    for (int c = 0; c < 3; ++c) CHECK(back.count(p, c) == v.count(p, c));
}

TEST_CASE("segment conserves votes and reaches the coverage target") {
  const auto cloud = slab_cloud(8000, 1);
  const KdTree tree(cloud.positions);
  AdaptiveFovSelector sel({1, 2, 4}, 32, 64, 3);
  SegmentConfig cfg;
  cfg.K = 64;
  cfg.fov_scales = {1, 2, 4};
  cfg.seed = 7;
  const auto run = segment(cloud, tree, truth_classifier(cloud), sel, cfg);
  CHECK(run.complete);
  CHECK(run.coverage >= cfg.coverage_stop);
  REQUIRE(run.captures.size() == run.iterations);
  std::uint64_t expected = 0;
  for (const auto& c : run.captures) {
    CHECK(c.presample_size == cfg.K * static_cast<std::size_t>(c.fov_scale));
    expected += c.presample_size;
  }
  CHECK(run.votes.total_votes() == expected);
  std::uint64_t summed = 0;
  for (PointIndex p = 0; p < cloud.size(); ++p) summed += run.votes.total(p);
  CHECK(summed == expected);
  CHECK(std::is_sorted(run.covered_trace.begin(), run.covered_trace.end()));
  CHECK(run.covered_trace.back() == run.votes.n_covered());

  // same seed, same run
  AdaptiveFovSelector sel2({1, 2, 4}, 32, 64, 3);
  const auto again = segment(cloud, tree, truth_classifier(cloud), sel2, cfg);
  CHECK(again.iterations == run.iterations);
  for (std::size_t i = 0; i < run.captures.size(); ++i) CHECK(again.captures[i].anchor == run.captures[i].anchor);
}

TEST_CASE("max_iters stops an incomplete run") {
  const auto cloud = slab_cloud(4000, 2);
  const KdTree tree(cloud.positions);
  AdaptiveFovSelector sel({1}, 8, 8, 0);
  SegmentConfig cfg;
  cfg.K = 32;
  cfg.fov_scales = {1};
  cfg.max_iters = 5;
  const auto run = segment(cloud, tree, truth_classifier(cloud), sel, cfg);
  CHECK(run.iterations == 5);
  CHECK_FALSE(run.complete);
  cfg.K = 5000;
  CHECK_THROWS(segment(cloud, tree, truth_classifier(cloud), sel, cfg));
}

TEST_CASE("resolution labels every point and follows the tie and inheritance rules") {
  // A line of points 0..9 at unit spacing.
  std::vector<Eigen::Vector3d> pts;
  for (int i = 0; i < 10; ++i) pts.emplace_back(i, 0, 0);
  const auto cloud = make_cloud(pts, std::vector<int>(10, 0), 3);
  const KdTree tree(pts);
  VoteTable v(10, 3);
  v.add(std::vector<PointIndex>{0, 1, 2, 3, 4}, 2);
  v.add(std::vector<PointIndex>{5, 6}, 1);
  v.add(std::vector<PointIndex>{4}, 1);  // point 4 ties 1 vs 2
  // point 9 and 8 and 7 uncovered
  const auto res = resolve_votes(v, tree, cloud, 4);
  // Neighbours of 4 (k=4): 3, 5, 2, 6 -> current argmax 2, 1, 2, 1: a tie,
  // so the extra vote goes to class 1 (smaller id) -> 1 wins 2:1.
  CHECK(res.labels[4] == 1);
  CHECK(res.ties_resolved == 1);
  CHECK(res.inherited == 3);
  CHECK(res.labels[7] == 1);  // nearest covered: 6
  CHECK(res.labels[9] == 1);
  for (int i = 0; i < 4; ++i) CHECK(res.labels[static_cast<std::size_t>(i)] == 2);

  VoteTable none(10, 3);
  CHECK_THROWS(resolve_votes(none, tree, cloud, 4));
}

TEST_CASE("tie votes: a neighbour majority decides between tied classes") {
  std::vector<Eigen::Vector3d> pts{{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {5, 5, 5}};
  const auto cloud = make_cloud(pts, std::vector<int>(5, 0), 2);
  const KdTree tree(pts);
  VoteTable v(5, 2);
  v.add(std::vector<PointIndex>{0}, 0);
  v.add(std::vector<PointIndex>{0}, 1);
  v.add(std::vector<PointIndex>{1, 2, 3, 4}, 1);
  const auto res = resolve_votes(v, tree, cloud, 3);
  CHECK(res.labels[0] == 1);
}

TEST_CASE("inherited labels equal the nearest covered point's label (brute force)") {
  const auto cloud = slab_cloud(3000, 5);
  const KdTree tree(cloud.positions);
  VoteTable v(cloud.size(), 3);
  Rng rng(1);
  std::vector<bool> covered(cloud.size(), false);
  for (PointIndex p = 0; p < cloud.size(); ++p) {
    if (std::uniform_real_distribution<double>(0, 1)(rng) < 0.3) {
      v.add(std::vector<PointIndex>{p}, cloud.labels[p]);
      covered[p] = true;
    }
  }
  const auto res = resolve_votes(v, tree, cloud, 5);
  for (PointIndex p = 0; p < cloud.size(); ++p) {
    if (covered[p]) {
      CHECK(res.labels[p] == cloud.labels[p]);
      continue;
    }
    const auto order = brute_knn(cloud.positions, cloud.positions[p], cloud.size());
    const auto hit = std::find_if(order.begin(), order.end(), [&](const Neighbor& n) { return covered[n.index]; });
    CHECK(res.labels[p] == res.labels[hit->index]);
  }
}

TEST_CASE("progress snapshots and capture log") {
  snapseg::testing::TempDir dir("seg");
  const auto cloud = slab_cloud(2000, 3);
  const KdTree tree(cloud.positions);
  AdaptiveFovSelector sel({1, 2}, 16, 16, 0);
  SegmentConfig cfg;
  cfg.K = 32;
  cfg.fov_scales = {1, 2};
  cfg.progress_prefix = dir.file("progress");
  const auto run = segment(cloud, tree, truth_classifier(cloud), sel, cfg);
  for (int pct : {25, 50, 75, 100}) CHECK(std::filesystem::exists(dir.file("progress_" + std::to_string(pct) + ".ply")));

  save_capture_log(run.captures, dir.file("c.csv"));
  const auto back = load_capture_log(dir.file("c.csv"));
  REQUIRE(back.size() == run.captures.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].anchor == run.captures[i].anchor);
    CHECK(back[i].fov_scale == run.captures[i].fov_scale);
    CHECK(back[i].predicted_class == run.captures[i].predicted_class);
  }
}

TEST_CASE("snapshot classifier composes gather, normalize, encoder and SVM") {
  const auto cloud = slab_cloud(500, 4);
  EncoderConfig ec;
  ec.layer_sizes = {3, 8, 6};
  ec.seed = 1;
  const EncoderModel model(ec);
  LinearSvm svm;
  svm.weights = Eigen::MatrixXd::Random(3, 6);
  svm.biases = Eigen::VectorXd::Random(3);
  svm.active = {true, true, true};
  const auto classify = make_snapshot_classifier(cloud, model, svm);
  Snapshot s;
  s.downsampled = {1, 2, 3, 4, 50, 60};
  const Eigen::VectorXd f = forward_features(model, normalize(gather(cloud, s.downsampled)));
  Eigen::Index best = 0;
  (svm.weights * f + svm.biases).maxCoeff(&best);
  CHECK(classify(s) == static_cast<int>(best));
  svm.weights = Eigen::MatrixXd::Zero(3, 5);
  CHECK_THROWS(make_snapshot_classifier(cloud, model, svm));
}

TEST_CASE("fine-tuning labels new sets with the frozen KMeans and lowers their loss") {
  std::vector<NormalizedSet> sets;
  for (int i = 0; i < 24; ++i) {
    const auto pts = random_points(16, 100 + static_cast<std::uint64_t>(i), i % 2 ? 1.0 : 0.1);
    PointSet s(3, 16);
    for (Eigen::Index j = 0; j < 16; ++j) s.col(j) = pts[static_cast<std::size_t>(j)];
    if (i % 2 == 0) s.row(2).setZero();  // flat versus round
    sets.push_back(normalize(s));
  }
  EncoderConfig ec;
  ec.layer_sizes = {3, 8, 8};
  ec.seed = 2;
  const EncoderModel contrast(ec);
  const auto feats = extract_features(contrast, sets);
  const auto km = fit_kmeans(feats, 3, 1);
  const EncoderModel cluster = contrast.with_new_head(HeadMode::kClassify, 3, 4);
  TrainConfig tc;
  tc.epochs = 20;
  tc.lr = 1e-2;
  tc.batch_size = 4;
  const auto unchanged = fine_tune_for_scene(cluster, contrast, km, sets, 0, tc);
  CHECK(unchanged.model.params() == cluster.params());
  const auto tuned = fine_tune_for_scene(cluster, contrast, km, sets, 16, tc);
  CHECK(tuned.cluster_ids.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) CHECK(tuned.cluster_ids[i] == km.assignment[i]);
  CHECK(tuned.loss_after < tuned.loss_before);
  CHECK(tuned.trace.size() == 20);
  CHECK_THROWS(fine_tune_for_scene(cluster, contrast, km, sets, 25, tc));
  CHECK_THROWS(fine_tune_for_scene(contrast, contrast, km, sets, 4, tc));
}
