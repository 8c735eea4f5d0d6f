// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace snapseg {
namespace {

constexpr double kMinScale = 1e-12;

Eigen::MatrixXd make_input(const EncoderModel& model, const NormalizedSet& s) {
  if (s.points.cols() == 0) throw std::invalid_argument("encoder input has no points");
  if (!s.points.allFinite()) throw std::invalid_argument("encoder input has non-finite coordinates");
  if (model.input_dim() == 3) return s.points;
  Eigen::MatrixXd x(4, s.points.cols());
  x.topRows<3>() = s.points;
  x.row(3).setConstant(std::log(std::max(s.scale, kMinScale)));
  return x;
}

struct TrunkCache {
  std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[l] = relu(W_l acts[l-1] + b_l)
  Eigen::VectorXd feature;
  std::vector<Eigen::Index> argmax;
};

void trunk_forward(const EncoderModel& model, const NormalizedSet& s, TrunkCache& c) {
  const int L = model.n_layers();
  c.acts.resize(static_cast<std::size_t>(L) + 1);
  c.acts[0] = make_input(model, s);
  for (int l = 1; l <= L; ++l) {
    auto& a = c.acts[static_cast<std::size_t>(l)];
    a.noalias() = model.weight(l - 1) * c.acts[static_cast<std::size_t>(l) - 1];
    a.colwise() += model.bias(l - 1);
    a = a.cwiseMax(0.0);
  }
  const auto& top = c.acts.back();
  const Eigen::Index f = top.rows();
  const Eigen::Index p = top.cols();
  c.feature.resize(f);
  c.argmax.assign(static_cast<std::size_t>(f), 0);
  for (Eigen::Index r = 0; r < f; ++r) {
    double best = top(r, 0);
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < p; ++j) {
      if (top(r, j) > best) {
        best = top(r, j);
        arg = j;
      }
    }
    c.feature[r] = best;
    c.argmax[static_cast<std::size_t>(r)] = arg;
  }
}

/// Accumulates d(loss)/d(trunk params) into grad given d(loss)/d(feature).
/// Only the columns that won a max-pool slot carry gradient.
void trunk_backward(const EncoderModel& model, const TrunkCache& c, const Eigen::VectorXd& g_feat,
                    Eigen::VectorXd& grad) {
  std::vector<Eigen::Index> cols = c.argmax;
  std::sort(cols.begin(), cols.end());
  cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
  const auto u = static_cast<Eigen::Index>(cols.size());

  const int L = model.n_layers();
  Eigen::MatrixXd d_act = Eigen::MatrixXd::Zero(model.feature_dim(), u);
  for (std::size_t r = 0; r < c.argmax.size(); ++r) {
    const auto pos = std::lower_bound(cols.begin(), cols.end(), c.argmax[r]) - cols.begin();
    d_act(static_cast<Eigen::Index>(r), pos) += g_feat[static_cast<Eigen::Index>(r)];
  }

  Eigen::MatrixXd act;
  Eigen::MatrixXd prev;
  Eigen::MatrixXd d_pre;
  for (int l = L; l >= 1; --l) {
    const auto& a = c.acts[static_cast<std::size_t>(l)];
    const auto& ap = c.acts[static_cast<std::size_t>(l) - 1];
    act.resize(a.rows(), u);
    prev.resize(ap.rows(), u);
    for (Eigen::Index j = 0; j < u; ++j) {
      act.col(j) = a.col(cols[static_cast<std::size_t>(j)]);
      prev.col(j) = ap.col(cols[static_cast<std::size_t>(j)]);
    }
    d_pre = d_act.cwiseProduct((act.array() > 0.0).cast<double>().matrix());
    model.weight_in(grad, l - 1).noalias() += d_pre * prev.transpose();
    model.bias_in(grad, l - 1) += d_pre.rowwise().sum();
    if (l > 1) d_act.noalias() = model.weight(l - 1).transpose() * d_pre;
  }
}

/// Softmax cross-entropy; writes d(loss)/d(logits) into dz when given.
double softmax_xent(const Eigen::VectorXd& z, int label, Eigen::VectorXd* dz) {
  const double m = z.maxCoeff();
  const Eigen::ArrayXd e = (z.array() - m).exp();
  const double s = e.sum();
  if (dz) {
    *dz = e.matrix() / s;
    (*dz)[label] -= 1.0;
  }
  return m + std::log(s) - z[label];
}

int argmax_of(const Eigen::VectorXd& z) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    if (z[i] > z[best]) best = i;
  }
  return static_cast<int>(best);
}

Eigen::VectorXd pair_head_input(const Eigen::VectorXd& fa, const Eigen::VectorXd& fb) {
  const Eigen::Index f = fa.size();
  Eigen::VectorXd h(3 * f);
  h.segment(0, f) = fa;
  h.segment(f, f) = fb;
  h.segment(2 * f, f) = (fa - fb).cwiseAbs();
  return h;
}

void require_head(const EncoderModel& model, HeadMode mode) {
  if (model.config().head != mode) {
    throw std::invalid_argument("model head is '" + to_string(model.config().head) +
                                "', expected '" + to_string(mode) + "'");
  }
}

void require_label(const EncoderModel& model, int label) {
  if (label < 0 || label >= model.n_outputs()) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside head size " +
                                std::to_string(model.n_outputs()));
  }
}

// Per-thread scratch so the training loop does not reallocate per sample.
struct Scratch {
  TrunkCache a;
  TrunkCache b;
};

double accumulate(const EncoderModel& model, const ContrastPair& pair, Eigen::VectorXd& grad,
                  Scratch& s, int* predicted) {
  require_label(model, pair.label);
  trunk_forward(model, pair.a, s.a);
  trunk_forward(model, pair.b, s.b);
  const Eigen::VectorXd h = pair_head_input(s.a.feature, s.b.feature);
  const Eigen::VectorXd z = model.head_weight() * h + model.head_bias();
  Eigen::VectorXd dz;
  const double loss = softmax_xent(z, pair.label, &dz);
  if (predicted) *predicted = argmax_of(z);

  model.head_weight_in(grad).noalias() += dz * h.transpose();
  model.head_bias_in(grad) += dz;
  const Eigen::VectorXd dh = model.head_weight().transpose() * dz;
  const Eigen::Index f = model.feature_dim();
  const Eigen::VectorXd diff = s.a.feature - s.b.feature;
  const Eigen::VectorXd sign = diff.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
  const Eigen::VectorXd d_abs = dh.segment(2 * f, f).cwiseProduct(sign);
  trunk_backward(model, s.a, dh.segment(0, f) + d_abs, grad);
  trunk_backward(model, s.b, dh.segment(f, f) - d_abs, grad);
  return loss;
}

double accumulate(const EncoderModel& model, const LabeledSet& sample, Eigen::VectorXd& grad,
                  Scratch& s, int* predicted) {
  require_label(model, sample.label);
  trunk_forward(model, sample.set, s.a);
  const Eigen::VectorXd z = model.head_weight() * s.a.feature + model.head_bias();
  Eigen::VectorXd dz;
  const double loss = softmax_xent(z, sample.label, &dz);
  if (predicted) *predicted = argmax_of(z);
  model.head_weight_in(grad).noalias() += dz * s.a.feature.transpose();
  model.head_bias_in(grad) += dz;
  trunk_backward(model, s.a, model.head_weight().transpose() * dz, grad);
  return loss;
}

int label_of(const ContrastPair& p) { return p.label; }
int label_of(const LabeledSet& s) { return s.label; }

template <typename Sample>
TrainResult train_impl(EncoderModel model, std::span<const Sample> data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& d : data) require_label(model, label_of(d));

  const std::size_t n = data.size();
  const auto np = static_cast<Eigen::Index>(model.n_params());
  Eigen::VectorXd grad(np);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(np);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> sample_loss(n);
  std::vector<char> sample_hit(n);
  Rng rng(cfg.seed);
  Scratch scratch;
  std::uint64_t step = 0;

  TrainResult result{std::move(model), {}};
  auto& mdl = result.model;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    std::size_t batch = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      grad.setZero();
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        int predicted = -1;
        const double loss = accumulate(mdl, data[idx], grad, scratch, &predicted);
        if (!std::isfinite(loss)) throw TrainingError(epoch, batch, "non-finite loss");
        sample_loss[idx] = loss;
        sample_hit[idx] = predicted == label_of(data[idx]);
      }
      grad /= static_cast<double>(stop - start);
      if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * mdl.params();
      if (!grad.allFinite()) throw TrainingError(epoch, batch, "non-finite gradient");

      ++step;
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      mdl.params().array() -=
          cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
    }
    const double total = std::accumulate(sample_loss.begin(), sample_loss.end(), 0.0);
    const auto hits = std::count(sample_hit.begin(), sample_hit.end(), char{1});
    result.trace.push_back({epoch, total / static_cast<double>(n),
                            static_cast<double>(hits) / static_cast<double>(n)});
  }
  return result;
}

template <typename Sample>
double mean_loss_impl(const EncoderModel& model, std::span<const Sample> data) {
  if (data.empty()) return 0.0;
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_params()));
  Scratch scratch;
  double total = 0.0;
  for (const auto& d : data) total += accumulate(model, d, grad, scratch, nullptr);
  return total / static_cast<double>(data.size());
}

// --- reference forward pass for gradient checks --------------------------

using Wide = long double;

std::vector<Wide> reference_features(const EncoderModel& model, const std::vector<Wide>& theta,
                                     const NormalizedSet& s) {
  const auto x = make_input(model, s);
  const int L = model.n_layers();
  const auto& sizes = model.config().layer_sizes;
  std::vector<Wide> feature(static_cast<std::size_t>(sizes.back()), 0.0L);
  std::vector<Wide> cur;
  std::vector<Wide> next;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    cur.assign(static_cast<std::size_t>(x.rows()), 0.0L);
    for (Eigen::Index r = 0; r < x.rows(); ++r) cur[static_cast<std::size_t>(r)] = x(r, j);
    for (int l = 0; l < L; ++l) {
      const auto in = static_cast<std::size_t>(sizes[static_cast<std::size_t>(l)]);
      const auto out = static_cast<std::size_t>(sizes[static_cast<std::size_t>(l) + 1]);
      const std::size_t w0 = model.weight_offset(l);
      const std::size_t b0 = model.bias_offset(l);
      next.assign(out, 0.0L);
      for (std::size_t o = 0; o < out; ++o) {
        Wide acc = theta[b0 + o];
        for (std::size_t k = 0; k < in; ++k) acc += theta[w0 + o + k * out] * cur[k];
        next[o] = acc > 0.0L ? acc : 0.0L;
      }
      cur.swap(next);
    }
    for (std::size_t f = 0; f < feature.size(); ++f) {
      feature[f] = j == 0 ? cur[f] : std::max(feature[f], cur[f]);
    }
  }
  return feature;
}

Wide reference_head_loss(const EncoderModel& model, const std::vector<Wide>& theta,
                         const std::vector<Wide>& h, int label) {
  const auto out = static_cast<std::size_t>(model.n_outputs());
  const std::size_t w0 = model.head_offset();
  const std::size_t b0 = w0 + out * h.size();
  std::vector<Wide> z(out);
  for (std::size_t o = 0; o < out; ++o) {
    Wide acc = theta[b0 + o];
    for (std::size_t k = 0; k < h.size(); ++k) acc += theta[w0 + o + k * out] * h[k];
    z[o] = acc;
  }
  const Wide m = *std::max_element(z.begin(), z.end());
  Wide s = 0.0L;
  for (Wide v : z) s += std::exp(v - m);
  return m + std::log(s) - z[static_cast<std::size_t>(label)];
}

Wide reference_loss(const EncoderModel& model, const std::vector<Wide>& theta, const ContrastPair& p) {
  const auto fa = reference_features(model, theta, p.a);
  const auto fb = reference_features(model, theta, p.b);
  std::vector<Wide> h;
  h.reserve(3 * fa.size());
  h.insert(h.end(), fa.begin(), fa.end());
  h.insert(h.end(), fb.begin(), fb.end());
  for (std::size_t i = 0; i < fa.size(); ++i) h.push_back(std::fabs(fa[i] - fb[i]));
  return reference_head_loss(model, theta, h, p.label);
}

Wide reference_loss(const EncoderModel& model, const std::vector<Wide>& theta, const LabeledSet& s) {
  return reference_head_loss(model, theta, reference_features(model, theta, s.set), s.label);
}

template <typename Sample>
double gradient_check_impl(const EncoderModel& model, const Sample& sample, double epsilon,
                           std::span<const std::size_t> subset, double floor) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }
  Eigen::VectorXd analytic;
  loss_and_gradient(model, sample, analytic);

  std::vector<Wide> theta(model.n_params());
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = model.params()[static_cast<Eigen::Index>(i)];

  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(theta.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    subset = all;
  }
  double worst = 0.0;
  const Wide h = epsilon;
  for (std::size_t i : subset) {
    if (i >= theta.size()) throw std::out_of_range("gradient_check: parameter index out of range");
    const Wide saved = theta[i];
    theta[i] = saved + h;
    const Wide up = reference_loss(model, theta, sample);
    theta[i] = saved - h;
    const Wide down = reference_loss(model, theta, sample);
    theta[i] = saved;
    const double numeric = static_cast<double>((up - down) / (2.0L * h));
    const double a = analytic[static_cast<Eigen::Index>(i)];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace

std::string to_string(HeadMode mode) { return mode == HeadMode::kPair ? "pair" : "classify"; }

HeadMode parse_head_mode(const std::string& name) {
  if (name == "pair") return HeadMode::kPair;
  if (name == "classify") return HeadMode::kClassify;
  throw std::invalid_argument("unknown head mode '" + name + "'");
}

void EncoderConfig::validate() const {
  if (layer_sizes.size() < 2) throw std::invalid_argument("encoder needs at least one layer");
  if (layer_sizes.front() != 3 && layer_sizes.front() != 4) {
    throw std::invalid_argument("encoder input width must be 3 (xyz) or 4 (xyz + log scale)");
  }
  for (int s : layer_sizes) {
    if (s < 1) throw std::invalid_argument("layer sizes must be positive");
  }
  if (n_outputs < 2) throw std::invalid_argument("head needs at least 2 outputs");
  if (head == HeadMode::kPair && n_outputs != 2) throw std::invalid_argument("pair head has exactly 2 outputs");
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight decay must be >= 0");
}

EncoderModel::EncoderModel(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  layout();
  Rng rng(config_.seed);
  params_.setZero();
  for (int l = 0; l < n_layers(); ++l) {
    const double fan_in = config_.layer_sizes[static_cast<std::size_t>(l)];
    std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan_in));
    auto w = weight_in(params_, l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = g(rng);
    }
  }
  const double fan = head_input_dim() + n_outputs();
  std::normal_distribution<double> g(0.0, std::sqrt(2.0 / fan));
  auto hw = head_weight_in(params_);
  for (Eigen::Index j = 0; j < hw.cols(); ++j) {
    for (Eigen::Index i = 0; i < hw.rows(); ++i) hw(i, j) = g(rng);
  }
}

void EncoderModel::layout() {
  std::size_t offset = 0;
  weight_offset_.clear();
  bias_offset_.clear();
  for (int l = 0; l < n_layers(); ++l) {
    const auto in = static_cast<std::size_t>(config_.layer_sizes[static_cast<std::size_t>(l)]);
    const auto out = static_cast<std::size_t>(config_.layer_sizes[static_cast<std::size_t>(l) + 1]);
    weight_offset_.push_back(offset);
    offset += in * out;
    bias_offset_.push_back(offset);
    offset += out;
  }
  head_offset_ = offset;
  offset += static_cast<std::size_t>(head_input_dim() * n_outputs() + n_outputs());
  params_.setZero(static_cast<Eigen::Index>(offset));
}

int EncoderModel::head_input_dim() const {
  return config_.head == HeadMode::kPair ? 3 * feature_dim() : feature_dim();
}

EncoderModel::MatrixMap EncoderModel::weight_in(Eigen::VectorXd& v, int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return {v.data() + weight_offset_[l], config_.layer_sizes[l + 1], config_.layer_sizes[l]};
}
EncoderModel::ConstMatrixMap EncoderModel::weight_in(const Eigen::VectorXd& v, int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return {v.data() + weight_offset_[l], config_.layer_sizes[l + 1], config_.layer_sizes[l]};
}
EncoderModel::VectorMap EncoderModel::bias_in(Eigen::VectorXd& v, int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return {v.data() + bias_offset_[l], config_.layer_sizes[l + 1]};
}
EncoderModel::ConstVectorMap EncoderModel::bias_in(const Eigen::VectorXd& v, int layer) const {
  const auto l = static_cast<std::size_t>(layer);
  return {v.data() + bias_offset_[l], config_.layer_sizes[l + 1]};
}
EncoderModel::MatrixMap EncoderModel::head_weight_in(Eigen::VectorXd& v) const {
  return {v.data() + head_offset_, n_outputs(), head_input_dim()};
}
EncoderModel::ConstMatrixMap EncoderModel::head_weight_in(const Eigen::VectorXd& v) const {
  return {v.data() + head_offset_, n_outputs(), head_input_dim()};
}
EncoderModel::VectorMap EncoderModel::head_bias_in(Eigen::VectorXd& v) const {
  return {v.data() + head_offset_ + static_cast<std::size_t>(head_input_dim() * n_outputs()), n_outputs()};
}
EncoderModel::ConstVectorMap EncoderModel::head_bias_in(const Eigen::VectorXd& v) const {
  return {v.data() + head_offset_ + static_cast<std::size_t>(head_input_dim() * n_outputs()), n_outputs()};
}

EncoderModel EncoderModel::with_new_head(HeadMode head, int n_outputs, std::uint64_t seed) const {
  EncoderConfig cfg = config_;
  cfg.head = head;
  cfg.n_outputs = n_outputs;
  cfg.seed = seed;
  EncoderModel out(cfg);
  out.params_.head(static_cast<Eigen::Index>(head_offset_)) =
      params_.head(static_cast<Eigen::Index>(head_offset_));
  return out;
}

void EncoderModel::zero_head() {
  params_.tail(params_.size() - static_cast<Eigen::Index>(head_offset_)).setZero();
}

Eigen::VectorXd forward_features(const EncoderModel& model, const NormalizedSet& points) {
  TrunkCache c;
  trunk_forward(model, points, c);
  return c.feature;
}

Eigen::VectorXd forward_features(const EncoderModel& model, const PointSet& points) {
  return forward_features(model, NormalizedSet{points, 1.0});
}

Eigen::VectorXd forward_pair_logits(const EncoderModel& model, const ContrastPair& pair) {
  require_head(model, HeadMode::kPair);
  const auto h = pair_head_input(forward_features(model, pair.a), forward_features(model, pair.b));
  return model.head_weight() * h + model.head_bias();
}

Eigen::VectorXd forward_logits(const EncoderModel& model, const NormalizedSet& points) {
  require_head(model, HeadMode::kClassify);
  return model.head_weight() * forward_features(model, points) + model.head_bias();
}

double loss_and_gradient(const EncoderModel& model, const ContrastPair& pair, Eigen::VectorXd& grad) {
  require_head(model, HeadMode::kPair);
  grad.setZero(static_cast<Eigen::Index>(model.n_params()));
  Scratch s;
  return accumulate(model, pair, grad, s, nullptr);
}

double loss_and_gradient(const EncoderModel& model, const LabeledSet& sample, Eigen::VectorXd& grad) {
  require_head(model, HeadMode::kClassify);
  grad.setZero(static_cast<Eigen::Index>(model.n_params()));
  Scratch s;
  return accumulate(model, sample, grad, s, nullptr);
}

TrainResult train(EncoderModel model, std::span<const ContrastPair> pairs, const TrainConfig& cfg) {
  require_head(model, HeadMode::kPair);
  return train_impl(std::move(model), pairs, cfg);
}

TrainResult train(EncoderModel model, std::span<const LabeledSet> samples, const TrainConfig& cfg) {
  require_head(model, HeadMode::kClassify);
  return train_impl(std::move(model), samples, cfg);
}

double mean_loss(const EncoderModel& model, std::span<const ContrastPair> pairs) {
  require_head(model, HeadMode::kPair);
  return mean_loss_impl(model, pairs);
}

double mean_loss(const EncoderModel& model, std::span<const LabeledSet> samples) {
  require_head(model, HeadMode::kClassify);
  return mean_loss_impl(model, samples);
}

double gradient_check(const EncoderModel& model, const ContrastPair& pair, double epsilon,
                      std::span<const std::size_t> param_subset, double floor) {
  return gradient_check_impl(model, pair, epsilon, param_subset, floor);
}

double gradient_check(const EncoderModel& model, const LabeledSet& sample, double epsilon,
                      std::span<const std::size_t> param_subset, double floor) {
  return gradient_check_impl(model, sample, epsilon, param_subset, floor);
}

FeatureMatrix extract_features(const EncoderModel& model, std::span<const NormalizedSet> sets,
                               int workers) {
  FeatureMatrix out(static_cast<Eigen::Index>(sets.size()), model.feature_dim());
  auto run = [&](std::size_t begin, std::size_t end) {
    TrunkCache c;
    for (std::size_t i = begin; i < end; ++i) {
      trunk_forward(model, sets[i], c);
      out.row(static_cast<Eigen::Index>(i)) = c.feature.transpose();
    }
  };
  const std::size_t w = static_cast<std::size_t>(std::max(1, workers));
  if (w == 1 || sets.size() < 2 * w) {
    run(0, sets.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (sets.size() + w - 1) / w;
  for (std::size_t t = 0; t < w; ++t) {
    const std::size_t begin = t * chunk;
    const std::size_t end = std::min(sets.size(), begin + chunk);
    if (begin < end) pool.emplace_back(run, begin, end);
  }
  for (auto& th : pool) th.join();
  return out;
}

void save_encoder(const EncoderModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  const auto& cfg = model.config();
  out << "snapseg-encoder v1\nlayers";
  for (int s : cfg.layer_sizes) out << ' ' << s;
  out << "\nfeature_dim " << model.feature_dim() << "\nhead " << to_string(cfg.head)
      << "\nn_outputs " << cfg.n_outputs << "\nseed " << cfg.seed << "\nn_params "
      << model.n_params() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < model.params().size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g\n", model.params()[i]);
    out << buf;
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

EncoderModel load_encoder(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "snapseg-encoder v1") throw ParseError("not an encoder model file", 1);

  EncoderConfig cfg;
  std::size_t n_params = 0;
  int feature_dim = 0;
  std::string key;
  for (std::size_t line_no = 2; line_no <= 7; ++line_no) {
    if (!std::getline(in, line)) throw ParseError("truncated encoder header", line_no);
    std::istringstream ss(line);
    ss >> key;
    if (key == "layers") {
      cfg.layer_sizes.clear();
      int s = 0;
      while (ss >> s) cfg.layer_sizes.push_back(s);
    } else if (key == "feature_dim") {
      ss >> feature_dim;
    } else if (key == "head") {
      std::string h;
      ss >> h;
      cfg.head = parse_head_mode(h);
    } else if (key == "n_outputs") {
      ss >> cfg.n_outputs;
    } else if (key == "seed") {
      ss >> cfg.seed;
    } else if (key == "n_params") {
      ss >> n_params;
    } else {
      throw ParseError("unexpected header key '" + key + "'", line_no);
    }
  }
  EncoderModel model(cfg);
  if (model.feature_dim() != feature_dim || model.n_params() != n_params) {
    throw StructuralError("encoder header is inconsistent with its layer sizes");
  }
  for (std::size_t i = 0; i < n_params; ++i) {
    if (!std::getline(in, line)) throw ParseError("truncated parameter list", 8 + i);
    model.params()[static_cast<Eigen::Index>(i)] = std::strtod(line.c_str(), nullptr);
  }
  return model;
}

void save_features(const FeatureMatrix& features, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "snapseg-features v1\nrows " << features.rows() << "\ncols " << features.cols() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", features(r, c));
      out << (c ? " " : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

FeatureMatrix load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic, version, key;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  in >> magic >> version;
  if (magic != "snapseg-features") throw ParseError("not a feature file", 1);
  in >> key >> rows >> key >> cols;
  if (!in || rows < 0 || cols < 1) throw ParseError("bad feature header", 2);
  FeatureMatrix out(rows, cols);
  std::string tok;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(in >> tok)) throw ParseError("truncated feature rows", 4 + static_cast<std::size_t>(r));
      out(r, c) = std::strtod(tok.c_str(), nullptr);
    }
  }
  return out;
}

}  // namespace snapseg
