// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "snapseg/encoder.hpp"

using namespace snapseg;

namespace {

NormalizedSet random_set(Eigen::Index n, std::uint64_t seed) {
  const auto pts = snapseg::testing::random_points(static_cast<std::size_t>(n), seed, 3.0);
  PointSet s(3, n);
  for (Eigen::Index i = 0; i < n; ++i) s.col(i) = pts[static_cast<std::size_t>(i)];
  return normalize(s);
}

/// A thin slab versus a round blob: separable from shape alone.
NormalizedSet shape_set(int label, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  PointSet s(3, 24);
  for (Eigen::Index i = 0; i < s.cols(); ++i) {
    s.col(i) = Eigen::Vector3d(g(rng), g(rng), label == 0 ? 0.05 * g(rng) : g(rng));
  }
  return normalize(s);
}

/// Central differences of the public loss in plain double precision.
template <typename Sample>
double plain_fd_error(const EncoderModel& model, const Sample& sample) {
  Eigen::VectorXd grad;
  loss_and_gradient(model, sample, grad);
  EncoderModel probe = model;
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < probe.params().size(); i += 7) {
    const double keep = probe.params()[i];
    probe.params()[i] = keep + h;
    const double up = mean_loss(probe, std::span<const Sample>(&sample, 1));
    probe.params()[i] = keep - h;
    const double down = mean_loss(probe, std::span<const Sample>(&sample, 1));
    probe.params()[i] = keep;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-4}));
  }
  return worst;
}

/// Random biases keep every pre-activation off the ReLU kink at zero, where
/// finite differences are meaningless (zero-initialised biases put a unit
/// exactly on it whenever all its inputs are inactive).
EncoderModel with_random_biases(EncoderModel m, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int l = 0; l < m.n_layers(); ++l) {
    auto b = m.bias_in(m.params(), l);
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
  }
  auto hb = m.head_bias_in(m.params());
  for (Eigen::Index i = 0; i < hb.size(); ++i) hb[i] = u(rng);
  return m;
}

}  // namespace

TEST_CASE("parameter layout covers the flat vector exactly") {
  EncoderConfig cfg;
  cfg.layer_sizes = {3, 8, 5};
  cfg.head = HeadMode::kClassify;
  cfg.n_outputs = 4;
  const EncoderModel m(cfg);
  CHECK(m.n_params() == 3 * 8 + 8 + 8 * 5 + 5 + 5 * 4 + 4);
  CHECK(m.weight_offset(0) == 0);
  CHECK(m.bias_offset(0) == 24);
  CHECK(m.head_offset() == 24 + 8 + 40 + 5);
  CHECK(m.head_input_dim() == 5);
  CHECK(m.weight(1).rows() == 5);
  CHECK(m.weight(1).cols() == 8);
  CHECK(m.bias(0).isZero());

  cfg.head = HeadMode::kPair;
  cfg.n_outputs = 2;
  CHECK(EncoderModel(cfg).head_input_dim() == 15);
}

TEST_CASE("invalid configurations are rejected") {
  EncoderConfig cfg;
  cfg.layer_sizes = {5, 8};
  CHECK_THROWS(EncoderModel(cfg));
  cfg.layer_sizes = {3};
  CHECK_THROWS(EncoderModel(cfg));
  cfg.layer_sizes = {3, 8};
  cfg.n_outputs = 3;  // pair head must be binary
  CHECK_THROWS(EncoderModel(cfg));
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS(t.validate());
}

TEST_CASE("features are invariant to point order") {
  EncoderConfig cfg;
  cfg.layer_sizes = {3, 16, 32};
  cfg.seed = 4;
  const EncoderModel m(cfg);
  const auto s = random_set(40, 1);
  NormalizedSet shuffled = s;
  for (Eigen::Index i = 0; i < 40; ++i) shuffled.points.col(i) = s.points.col(39 - i);
  CHECK((forward_features(m, s) - forward_features(m, shuffled)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(forward_features(m, s).size() == 32);
  CHECK((forward_features(m, s).array() >= 0.0).all());  // ReLU then max pool
}

TEST_CASE("the scale channel changes features only for 4-wide inputs") {
  EncoderConfig cfg;
  cfg.layer_sizes = {4, 16, 16};
  cfg.seed = 2;
  const EncoderModel m(cfg);
  auto a = random_set(20, 3);
  auto b = a;
  b.scale = a.scale * 50.0;
  CHECK((forward_features(m, a) - forward_features(m, b)).norm() > 1e-6);
  cfg.layer_sizes = {3, 16, 16};
  const EncoderModel m3(cfg);
  CHECK((forward_features(m3, a) - forward_features(m3, b)).norm() == 0.0);
}

TEST_CASE("analytic gradients agree with two independent finite-difference references") {
  for (int input : {3, 4}) {
    EncoderConfig cfg;
    cfg.layer_sizes = {input, 6, 5};
    cfg.seed = static_cast<std::uint64_t>(10 + input);
    const EncoderModel pair_model = with_random_biases(EncoderModel(cfg), 1);
    ContrastPair pair;
    pair.a = random_set(9, 21);
    pair.b = random_set(7, 22);
    pair.label = 1;
    CHECK(gradient_check(pair_model, pair, 1e-6) < 1e-5);
    CHECK(plain_fd_error(pair_model, pair) < 1e-4);

    cfg.head = HeadMode::kClassify;
    cfg.n_outputs = 3;
    const EncoderModel cls_model = with_random_biases(EncoderModel(cfg), 2);
    const LabeledSet sample{random_set(11, 23), 2};
    CHECK(gradient_check(cls_model, sample, 1e-6) < 1e-5);
    CHECK(plain_fd_error(cls_model, sample) < 1e-4);
  }
}

TEST_CASE("training separates two shapes and the loss trace goes down") {
  std::vector<LabeledSet> data;
  for (int i = 0; i < 64; ++i) data.push_back({shape_set(i % 2, 500 + static_cast<std::uint64_t>(i)), i % 2});
  EncoderConfig cfg;
  cfg.layer_sizes = {3, 16, 16};
  cfg.head = HeadMode::kClassify;
  cfg.n_outputs = 2;
  cfg.seed = 1;
  TrainConfig t;
  t.lr = 1e-2;
  t.epochs = 30;
  t.batch_size = 8;
  t.seed = 3;
  const double before = mean_loss(EncoderModel(cfg), data);
  const auto result = train(EncoderModel(cfg), data, t);
  REQUIRE(result.trace.size() == 30);
  CHECK(result.trace.back().loss < result.trace.front().loss);
  CHECK(mean_loss(result.model, data) < 0.5 * before);
  CHECK(result.trace.back().accuracy > 0.95);

  // same seed, same result
  const auto again = train(EncoderModel(cfg), data, t);
  CHECK(again.model.params() == result.model.params());
}

TEST_CASE("with_new_head keeps the trunk and replaces the head") {
  EncoderConfig cfg;
  cfg.layer_sizes = {3, 8, 8};
  cfg.seed = 5;
  const EncoderModel m(cfg);
  const auto c = m.with_new_head(HeadMode::kClassify, 7, 9);
  CHECK(c.n_outputs() == 7);
  CHECK(c.params().head(static_cast<Eigen::Index>(c.head_offset())) ==
        m.params().head(static_cast<Eigen::Index>(m.head_offset())));
  const auto s = random_set(12, 1);
  CHECK(forward_features(c, s) == forward_features(m, s));
}

TEST_CASE("model and feature files round trip bit-exactly") {
  snapseg::testing::TempDir dir("encoder");
  EncoderConfig cfg;
  cfg.layer_sizes = {4, 8, 6};
  cfg.head = HeadMode::kClassify;
  cfg.n_outputs = 5;
  cfg.seed = 8;
  const EncoderModel m(cfg);
  save_encoder(m, dir.file("m.model"));
  const auto back = load_encoder(dir.file("m.model"));
  CHECK(back.params() == m.params());
  CHECK(back.config().layer_sizes == cfg.layer_sizes);
  CHECK(back.config().head == HeadMode::kClassify);

  std::vector<NormalizedSet> sets;
  for (int i = 0; i < 9; ++i) sets.push_back(random_set(10, 40 + static_cast<std::uint64_t>(i)));
  const FeatureMatrix f1 = extract_features(m, sets, 1);
  const FeatureMatrix f3 = extract_features(m, sets, 3);
  CHECK(f1 == f3);
  for (int i = 0; i < 9; ++i) CHECK(f1.row(i).transpose() == forward_features(m, sets[static_cast<std::size_t>(i)]));
  save_features(f1, dir.file("f.txt"));
  CHECK(load_features(dir.file("f.txt")) == f1);
}
