// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "snapseg/clustering.hpp"

using namespace snapseg;

namespace {

FeatureMatrix gaussian_rows(Eigen::Index n, Eigen::Index dim, std::uint64_t seed, double spread = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, spread);
  FeatureMatrix x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = g(rng);
  return x;
}

double brute_inertia(const FeatureMatrix& x, const FeatureMatrix& centers) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centers.rows(); ++c) best = std::min(best, (x.row(i) - centers.row(c)).squaredNorm());
    total += best;
  }
  return total;
}

}  // namespace

TEST_CASE("Lloyd inertia never increases and the final inertia is recomputable") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto x = gaussian_rows(300, 4, 100 + seed);
    const auto m = fit_kmeans(x, 7, seed, 100, 0.0);
    for (std::size_t i = 1; i < m.inertia_trace.size(); ++i) {
      CHECK(m.inertia_trace[i] <= m.inertia_trace[i - 1] * (1 + 1e-12));
    }
    CHECK(m.inertia == doctest::Approx(brute_inertia(x, m.centers)).epsilon(1e-12));
    CHECK(m.assignment == assign(m, x));
  }
}

TEST_CASE("one cluster per sample gives zero inertia") {
  const auto x = gaussian_rows(25, 3, 4);
  const auto m = fit_kmeans(x, 25, 1);
  CHECK(m.inertia == 0.0);
  CHECK(std::set<int>(m.assignment.begin(), m.assignment.end()).size() == 25);
}

TEST_CASE("two well separated blobs are recovered") {
  FeatureMatrix x = gaussian_rows(200, 2, 8, 0.5);
  for (Eigen::Index i = 100; i < 200; ++i) x.row(i).array() += 10.0;
  const auto m = fit_kmeans(x, 2, 3);
  const int a = m.assignment[0];
  for (int i = 0; i < 200; ++i) CHECK(m.assignment[static_cast<std::size_t>(i)] == (i < 100 ? a : 1 - a));
  Eigen::RowVector2d lo = x.topRows(100).colwise().mean();
  Eigen::RowVector2d hi = x.bottomRows(100).colwise().mean();
  CHECK((m.centers.row(a) - lo).norm() < 1e-9);
  CHECK((m.centers.row(1 - a) - hi).norm() < 1e-9);
}

TEST_CASE("duplicate samples do not leave clusters empty") {
  FeatureMatrix x(12, 1);
  x.setZero();
  x(11, 0) = 1.0;
  x(10, 0) = 2.0;
  const auto m = fit_kmeans(x, 3, 2);
  std::vector<int> counts(3, 0);
  for (int id : m.assignment) ++counts[static_cast<std::size_t>(id)];
  for (int c : counts) CHECK(c > 0);
  CHECK(m.inertia == 0.0);
  CHECK_THROWS(fit_kmeans(x, 13, 0));
  CHECK_THROWS(fit_kmeans(x, 0, 0));
}

TEST_CASE("kmeans is seed-deterministic") {
  const auto x = gaussian_rows(150, 5, 9);
  const auto a = fit_kmeans(x, 6, 42);
  const auto b = fit_kmeans(x, 6, 42);
  CHECK(a.centers == b.centers);
  CHECK(a.assignment == b.assignment);
}

TEST_CASE("assign breaks ties toward the smaller centre id") {
  KMeansModel m;
  m.centers = FeatureMatrix(2, 1);
  m.centers << -1.0, 1.0;
  FeatureMatrix x(1, 1);
  x << 0.0;
  CHECK(assign(m, x) == std::vector<int>{0});
  FeatureMatrix wrong(1, 2);
  CHECK_THROWS(assign(m, wrong));
}

TEST_CASE("pseudo-label admission follows normalized distance <= 1 - threshold") {
  // one cluster on a line: distances 0..10 from the centre at 0
  KMeansModel m;
  m.centers = FeatureMatrix::Zero(1, 1);
  FeatureMatrix x(11, 1);
  for (int i = 0; i <= 10; ++i) x(i, 0) = i;
  const std::vector<int> subset{0};
  const std::map<int, int> labels{{0, 4}};
  // admitted: i / 10 <= 1 - t
  CHECK(cluster_pseudo_label(m, x, subset, labels, 0.9).size() == 2);
  CHECK(cluster_pseudo_label(m, x, subset, labels, 0.5).size() == 6);
  CHECK(cluster_pseudo_label(m, x, subset, labels, 1.0).size() == 1);
  const auto p = cluster_pseudo_label(m, x, subset, labels, 0.8);
  REQUIRE(p.size() == 3);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(p.class_ids[i] == 4);
    CHECK(p.cluster_ids[i] == 0);
    CHECK(p.normalized_distances[i] == doctest::Approx(static_cast<double>(p.sample_ids[i]) / 10.0));
  }
  CHECK_THROWS(cluster_pseudo_label(m, x, subset, labels, 0.0));
  CHECK_THROWS(cluster_pseudo_label(m, x, subset, {}, 0.5));
}

TEST_CASE("pseudo-label counts shrink as the threshold grows") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = gaussian_rows(400, 3, 300 + seed);
    const auto m = fit_kmeans(x, 10, seed);
    const auto subset = select_random_clusters(10, 5, seed);
    std::vector<int> truth(400, 0);
    const auto labels = center_labels_from_truth(m, x, truth, subset);
    std::size_t prev = x.rows() + 1;
    for (double t : {0.1, 0.5, 0.75, 0.8, 0.9, 1.0}) {
      const std::size_t n = cluster_pseudo_label(m, x, subset, labels, t).size();
      CHECK(n <= prev);
      prev = n;
    }
  }
}

TEST_CASE("centre labels come from the member nearest each centre") {
  KMeansModel m;
  m.centers = FeatureMatrix(2, 1);
  m.centers << 0.0, 10.0;
  FeatureMatrix x(5, 1);
  x << 0.4, -0.1, 9.0, 10.2, 11.0;
  const std::vector<int> truth{1, 2, 3, 4, 5};
  const auto labels = center_labels_from_truth(m, x, truth, std::vector<int>{0, 1});
  CHECK(labels.at(0) == 2);
  CHECK(labels.at(1) == 4);
  const std::vector<int> partial{1, kUnlabeled, 3, kUnlabeled, 5};
  CHECK(center_labels_from_truth(m, x, partial, std::vector<int>{0, 1}).at(1) == 3);
}

TEST_CASE("random cluster selection is a sorted distinct subset") {
  const auto s = select_random_clusters(50, 20, 7);
  CHECK(s.size() == 20);
  CHECK(std::is_sorted(s.begin(), s.end()));
  CHECK(std::set<int>(s.begin(), s.end()).size() == 20);
  CHECK(s.back() < 50);
  CHECK(select_random_clusters(50, 20, 7) == s);
  CHECK_THROWS(select_random_clusters(5, 6, 0));
}

TEST_CASE("model and pseudo-label files round trip") {
  snapseg::testing::TempDir dir("clustering");
  const auto x = gaussian_rows(60, 3, 2);
  const auto m = fit_kmeans(x, 4, 5);
  save_kmeans(m, dir.file("k.model"));
  const auto back = load_kmeans(dir.file("k.model"));
  CHECK(back.centers == m.centers);
  CHECK(assign(back, x) == m.assignment);

  const auto labels = center_labels_from_truth(m, x, std::vector<int>(60, 1), std::vector<int>{0, 2});
  const auto p = cluster_pseudo_label(m, x, std::vector<int>{0, 2}, labels, 0.5);
  save_pseudo_labels(p, dir.file("p.csv"));
  const auto q = load_pseudo_labels(dir.file("p.csv"));
  CHECK(q.sample_ids == p.sample_ids);
  CHECK(q.class_ids == p.class_ids);
  CHECK(q.cluster_ids == p.cluster_ids);
  CHECK(q.normalized_distances == p.normalized_distances);
}
