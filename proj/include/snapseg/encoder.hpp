// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_ENCODER_HPP
#define SNAPSEG_ENCODER_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapseg/common.hpp"
#include "snapseg/contrastive.hpp"

namespace snapseg {

enum class HeadMode {
  /// Two-way logits over [f(a), f(b), |f(a) - f(b)|].
  kPair,
  /// n_outputs-way logits over f(x).
  kClassify,
};

std::string to_string(HeadMode mode);
HeadMode parse_head_mode(const std::string& name);

struct EncoderConfig {
  /// Input width first (3, or 4 to feed log(scale) as an extra channel),
  /// then the shared per-point layers; the last entry is the feature size F.
  std::vector<int> layer_sizes{3, 64, 128, 128};
  HeadMode head = HeadMode::kPair;
  int n_outputs = 2;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Shared per-point MLP (ReLU after every layer), max pooling over points,
/// and a linear head. All parameters live in one flat vector so optimisers,
/// checkpoints and gradient checks can treat them uniformly.
class EncoderModel {
 public:
  using MatrixMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

  /// He-initialised trunk, Xavier-initialised head, zero biases.
  explicit EncoderModel(EncoderConfig config);

  const EncoderConfig& config() const { return config_; }
  int input_dim() const { return config_.layer_sizes.front(); }
  int feature_dim() const { return config_.layer_sizes.back(); }
  int n_layers() const { return static_cast<int>(config_.layer_sizes.size()) - 1; }
  int head_input_dim() const;
  int n_outputs() const { return config_.n_outputs; }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }
  std::size_t n_params() const { return static_cast<std::size_t>(params_.size()); }

  ConstMatrixMap weight(int layer) const { return weight_in(params_, layer); }
  ConstVectorMap bias(int layer) const { return bias_in(params_, layer); }
  ConstMatrixMap head_weight() const { return head_weight_in(params_); }
  ConstVectorMap head_bias() const { return head_bias_in(params_); }

  // Views of the same layout inside any vector of n_params() entries, e.g. a
  // gradient buffer.
  MatrixMap weight_in(Eigen::VectorXd& v, int layer) const;
  ConstMatrixMap weight_in(const Eigen::VectorXd& v, int layer) const;
  VectorMap bias_in(Eigen::VectorXd& v, int layer) const;
  ConstVectorMap bias_in(const Eigen::VectorXd& v, int layer) const;
  MatrixMap head_weight_in(Eigen::VectorXd& v) const;
  ConstMatrixMap head_weight_in(const Eigen::VectorXd& v) const;
  VectorMap head_bias_in(Eigen::VectorXd& v) const;
  ConstVectorMap head_bias_in(const Eigen::VectorXd& v) const;

  // Offsets into the flat vector; weights are stored column-major.
  std::size_t weight_offset(int layer) const { return weight_offset_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const { return bias_offset_[static_cast<std::size_t>(layer)]; }
  /// Everything before this offset is trunk, everything after is head.
  std::size_t head_offset() const { return head_offset_; }

  /// Copy of the trunk with a freshly initialised head.
  EncoderModel with_new_head(HeadMode head, int n_outputs, std::uint64_t seed) const;

  void zero_head();

 private:
  void layout();

  EncoderConfig config_;
  Eigen::VectorXd params_;
  std::vector<std::size_t> weight_offset_;
  std::vector<std::size_t> bias_offset_;
  std::size_t head_offset_ = 0;
};

/// A snapshot view with a class target (cluster id or semantic class).
struct LabeledSet {
  NormalizedSet set;
  int label = 0;
};

/// Pooled feature f(x); independent of point order.
Eigen::VectorXd forward_features(const EncoderModel& model, const NormalizedSet& points);
Eigen::VectorXd forward_features(const EncoderModel& model, const PointSet& points);

/// Pair-mode logits W [f(a), f(b), |f(a) - f(b)|] + b.
Eigen::VectorXd forward_pair_logits(const EncoderModel& model, const ContrastPair& pair);
/// Classify-mode logits W f(x) + b.
Eigen::VectorXd forward_logits(const EncoderModel& model, const NormalizedSet& points);

/// Softmax cross-entropy of one sample and its gradient w.r.t. every
/// parameter (same layout as params()).
double loss_and_gradient(const EncoderModel& model, const ContrastPair& pair,
                         Eigen::VectorXd& grad);
double loss_and_gradient(const EncoderModel& model, const LabeledSet& sample,
                         Eigen::VectorXd& grad);

struct TrainConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  EncoderModel model;
  std::vector<EpochStats> trace;
};

/// Raised when a mini-batch produces a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(int epoch, std::size_t batch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch) + ": " + what),
        epoch_(epoch),
        batch_(batch) {}
  int epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

/// Mini-batch Adam on softmax cross-entropy. The epoch loss is the mean of
/// the per-sample losses seen during that epoch (summed in sample order).
TrainResult train(EncoderModel model, std::span<const ContrastPair> pairs, const TrainConfig& cfg);
TrainResult train(EncoderModel model, std::span<const LabeledSet> samples, const TrainConfig& cfg);

double mean_loss(const EncoderModel& model, std::span<const ContrastPair> pairs);
double mean_loss(const EncoderModel& model, std::span<const LabeledSet> samples);

/// Largest per-parameter relative error |a - n| / max(|a|, |n|, floor)
/// between the analytic gradient and central differences of step
/// `epsilon`. The numeric side runs a separate loop-based forward pass in
/// extended precision. `param_subset` restricts the check (empty = all).
double gradient_check(const EncoderModel& model, const ContrastPair& pair, double epsilon,
                      std::span<const std::size_t> param_subset = {}, double floor = 1e-8);
double gradient_check(const EncoderModel& model, const LabeledSet& sample, double epsilon,
                      std::span<const std::size_t> param_subset = {}, double floor = 1e-8);

/// Row i is forward_features of sets[i]. Rows are computed independently,
/// so `workers` > 1 gives identical output.
FeatureMatrix extract_features(const EncoderModel& model, std::span<const NormalizedSet> sets,
                               int workers = 1);

void save_encoder(const EncoderModel& model, const std::string& path);
EncoderModel load_encoder(const std::string& path);

/// "snapseg-features v1" header, then one row per line at full precision.
void save_features(const FeatureMatrix& features, const std::string& path);
FeatureMatrix load_features(const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_ENCODER_HPP
