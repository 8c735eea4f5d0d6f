// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_WEAK_CLASSIFIER_HPP
#define SNAPSEG_WEAK_CLASSIFIER_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapseg/clustering.hpp"
#include "snapseg/common.hpp"

namespace snapseg {

/// One-vs-rest linear SVM. Row c of `weights` scores class c; classes that
/// had no training samples keep an all-zero row and are marked inactive.
struct LinearSvm {
  Eigen::MatrixXd weights;  // n_classes x F
  Eigen::VectorXd biases;
  std::vector<bool> active;
  double C = 1.0;
  std::uint64_t seed = 0;

  int n_classes() const { return static_cast<int>(weights.rows()); }
  int dim() const { return static_cast<int>(weights.cols()); }
};

struct SvmOptions {
  double C = 1.0;
  std::uint64_t seed = 0;
  int epochs = 200;
};

/// Pegasos-style subgradient descent on the L2-regularised hinge loss of each
/// class against the rest, with lambda = 1 / (C n) and step 1 / (lambda t).
/// Features are standardised internally; the scaling is folded back into the
/// returned weights so they apply to raw features.
LinearSvm fit_svm(const FeatureMatrix& features, std::span<const int> labels, int n_classes,
                  const SvmOptions& options = {});

/// Argmax over active classes, ties to the smallest id.
std::vector<int> predict(const LinearSvm& svm, const FeatureMatrix& features);
int predict_one(const LinearSvm& svm, const Eigen::Ref<const Eigen::RowVectorXd>& feature);

/// Label budget: a fraction of the labeled samples, or a fixed count per class.
struct LabelBudget {
  std::optional<double> fraction;
  std::optional<int> per_class;

  static LabelBudget Fraction(double f) { return {f, std::nullopt}; }
  static LabelBudget PerClass(int n) { return {std::nullopt, n}; }
};

struct WeakTrainingSet {
  FeatureMatrix features;
  std::vector<int> labels;
  std::vector<std::size_t> sample_ids;
  std::vector<bool> is_pseudo;
  std::vector<std::string> warnings;

  std::size_t n_true() const;
};

/// Draws the true-label subset and appends pseudo-labeled samples; a sample
/// drawn with its true label never also enters as a pseudo sample.
WeakTrainingSet build_weak_training_set(const FeatureMatrix& all_features,
                                        std::span<const int> true_labels, int n_classes,
                                        const LabelBudget& budget,
                                        const PseudoLabelSet* pseudo, std::uint64_t seed);

void save_svm(const LinearSvm& svm, const std::string& path);
LinearSvm load_svm(const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_WEAK_CLASSIFIER_HPP
