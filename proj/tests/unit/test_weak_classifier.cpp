// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "snapseg/weak_classifier.hpp"

using namespace snapseg;

namespace {

/// Gaussian clouds around `k` class centres in `dim` dimensions.
void blobs(int k, Eigen::Index per, Eigen::Index dim, double sep, std::uint64_t seed, FeatureMatrix& x,
           std::vector<int>& y) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  x.resize(k * per, dim);
  y.clear();
  for (int c = 0; c < k; ++c) {
    for (Eigen::Index i = 0; i < per; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) x(c * per + i, j) = g(rng) + (j % k == c ? sep : 0.0);
      y.push_back(c);
    }
  }
}

/// Primal objective in the standardized space the solver works in, with the
/// bias regularized like any other weight.
double primal(double ws, double bs, const std::vector<double>& z, const std::vector<double>& ys, double lambda) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) hinge += std::max(0.0, 1.0 - ys[i] * (ws * z[i] + bs));
  return 0.5 * lambda * (ws * ws + bs * bs) + hinge / static_cast<double>(z.size());
}

}  // namespace

TEST_CASE("one-vs-rest SVM reaches the primal optimum of a 1-D problem") {
  // Overlapping classes so the optimum is not trivially a hard margin.
  Rng rng(11);
  std::normal_distribution<double> g(0.0, 1.0);
  const int n = 200;
  FeatureMatrix x(n, 1);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    x(i, 0) = 5.0 + 3.0 * (g(rng) + (i % 2 ? 1.2 : -1.2));
  }
  SvmOptions opt;
  opt.C = 1.0;
  opt.epochs = 400;
  const auto svm = fit_svm(x, y, 2, opt);

  const double mean = x.col(0).mean();
  const double sd = std::sqrt((x.col(0).array() - mean).square().mean());
  std::vector<double> z(n);
  for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = (x(i, 0) - mean) / sd;
  const double lambda = 1.0 / (opt.C * n);
  for (int c = 0; c < 2; ++c) {
    std::vector<double> ys(n);
    for (int i = 0; i < n; ++i) ys[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
    const double ws = svm.weights(c, 0) * sd;
    const double bs = svm.biases[c] + svm.weights(c, 0) * mean;
    // exhaustive grid, then a finer grid around the best cell
    double best = std::numeric_limits<double>::infinity();
    double bw = 0.0;
    double bb = 0.0;
    for (double w = -6; w <= 6; w += 0.01) {
      for (double b = -3; b <= 3; b += 0.01) {
        const double v = primal(w, b, z, ys, lambda);
        if (v < best) {
          best = v;
          bw = w;
          bb = b;
        }
      }
    }
    for (double w = bw - 0.01; w <= bw + 0.01; w += 0.0005)
      for (double b = bb - 0.01; b <= bb + 0.01; b += 0.0005) best = std::min(best, primal(w, b, z, ys, lambda));
    const double got = primal(ws, bs, z, ys, lambda);
    CHECK(got >= best - 1e-9);
    CHECK(got <= best + 0.01);
  }
}

TEST_CASE("separable blobs are classified perfectly with raw-feature weights") {
  FeatureMatrix x;
  std::vector<int> y;
  blobs(4, 60, 6, 8.0, 3, x, y);
  x.array() = x.array() * 40.0 + 1000.0;  // far from standardized
  const auto svm = fit_svm(x, y, 4, {1.0, 5, 100});
  CHECK(predict(svm, x) == y);
  for (Eigen::Index i = 0; i < x.rows(); i += 17) CHECK(predict_one(svm, x.row(i)) == y[static_cast<std::size_t>(i)]);
}

TEST_CASE("classes without samples stay inactive and are never predicted") {
  FeatureMatrix x;
  std::vector<int> y;
  blobs(2, 40, 3, 6.0, 4, x, y);
  for (int& l : y) l = l == 0 ? 0 : 3;  // classes 1, 2, 4 absent
  const auto svm = fit_svm(x, y, 5, {});
  CHECK(svm.active == std::vector<bool>{true, false, false, true, false});
  CHECK(svm.weights.row(1).isZero());
  for (int p : predict(svm, x)) CHECK((p == 0 || p == 3));
}

TEST_CASE("fit_svm reports bad inputs") {
  FeatureMatrix x = FeatureMatrix::Random(6, 2);
  std::vector<int> one_class(6, 1);
  try {
    fit_svm(x, one_class, 3, {});
    FAIL("expected an exception");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("missing classes: 0, 2") != std::string::npos);
  }
  CHECK_THROWS(fit_svm(x, std::vector<int>{0, 1}, 2, {}));
  CHECK_THROWS(fit_svm(x, std::vector<int>{0, 1, 0, 1, 0, 7}, 2, {}));
  const auto svm = fit_svm(x, std::vector<int>{0, 1, 0, 1, 0, 1}, 2, {});
  CHECK_THROWS(predict(svm, FeatureMatrix::Zero(2, 3)));
}

TEST_CASE("training is deterministic for a seed") {
  FeatureMatrix x;
  std::vector<int> y;
  blobs(3, 30, 4, 2.0, 5, x, y);
  const auto a = fit_svm(x, y, 3, {1.0, 9, 50});
  const auto b = fit_svm(x, y, 3, {1.0, 9, 50});
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);
}

TEST_CASE("fraction budget draws round(f * labeled) true labels") {
  FeatureMatrix x = FeatureMatrix::Random(200, 3);
  std::vector<int> truth(200);
  for (int i = 0; i < 200; ++i) truth[static_cast<std::size_t>(i)] = i % 10 == 0 ? kUnlabeled : i % 3;
  const auto set = build_weak_training_set(x, truth, 3, LabelBudget::Fraction(0.05), nullptr, 1);
  CHECK(set.n_true() == 9);  // round(0.05 * 180)
  CHECK(set.labels.size() == 9);
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    CHECK(set.labels[i] == truth[set.sample_ids[i]]);
    CHECK(set.features.row(static_cast<Eigen::Index>(i)) == x.row(static_cast<Eigen::Index>(set.sample_ids[i])));
  }
  CHECK(build_weak_training_set(x, truth, 3, LabelBudget::Fraction(1.0), nullptr, 1).n_true() == 180);
  CHECK(build_weak_training_set(x, truth, 3, LabelBudget::Fraction(1e-6), nullptr, 1).n_true() == 1);
  CHECK_THROWS(build_weak_training_set(x, truth, 3, LabelBudget::Fraction(0.0), nullptr, 1));
  CHECK_THROWS(build_weak_training_set(x, truth, 3, LabelBudget{}, nullptr, 1));
}

TEST_CASE("per-class budget warns when a class runs short") {
  FeatureMatrix x = FeatureMatrix::Random(30, 2);
  std::vector<int> truth(30, 0);
  truth[3] = 1;
  truth[4] = 1;
  const auto set = build_weak_training_set(x, truth, 3, LabelBudget::PerClass(5), nullptr, 2);
  CHECK(set.n_true() == 7);
  CHECK(set.warnings.size() == 2);  // class 1 has 2, class 2 has none
  CHECK(std::count(set.labels.begin(), set.labels.end(), 1) == 2);
}

TEST_CASE("true labels win over pseudo labels for the same sample") {
  FeatureMatrix x = FeatureMatrix::Random(20, 2);
  std::vector<int> truth(20);
  for (int i = 0; i < 20; ++i) truth[static_cast<std::size_t>(i)] = i % 2;
  PseudoLabelSet pseudo;
  for (std::size_t i = 0; i < 20; ++i) {
    pseudo.sample_ids.push_back(i);
    pseudo.class_ids.push_back(1 - static_cast<int>(i % 2));  // deliberately wrong
    pseudo.cluster_ids.push_back(0);
    pseudo.normalized_distances.push_back(0.0);
  }
  const auto set = build_weak_training_set(x, truth, 2, LabelBudget::Fraction(0.25), &pseudo, 3);
  CHECK(set.labels.size() == 20);
  CHECK(set.n_true() == 5);
  std::set<std::size_t> ids(set.sample_ids.begin(), set.sample_ids.end());
  CHECK(ids.size() == 20);
  for (std::size_t i = 0; i < set.labels.size(); ++i) {
    const bool correct = set.labels[i] == truth[set.sample_ids[i]];
    CHECK(correct != set.is_pseudo[i]);
  }
}

TEST_CASE("model file round trip") {
  snapseg::testing::TempDir dir("svm");
  FeatureMatrix x;
  std::vector<int> y;
  blobs(3, 20, 4, 3.0, 6, x, y);
  for (int& l : y) l = l == 2 ? 4 : l;
  const auto svm = fit_svm(x, y, 5, {0.5, 2, 30});
  save_svm(svm, dir.file("s.model"));
  const auto back = load_svm(dir.file("s.model"));
  CHECK(back.weights == svm.weights);
  CHECK(back.biases == svm.biases);
  CHECK(back.active == svm.active);
  CHECK(back.C == svm.C);
  CHECK(predict(back, x) == predict(svm, x));
}
