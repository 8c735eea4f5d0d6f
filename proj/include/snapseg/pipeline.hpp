// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_PIPELINE_HPP
#define SNAPSEG_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snapseg/common.hpp"
#include "snapseg/evaluation.hpp"
#include "snapseg/kvfile.hpp"

namespace snapseg {

/// Every stage parameter. Loaded from a flat key=value file; keys match the
/// field names.
struct PipelineConfig {
  std::string work_dir = "snapseg_work";
  std::uint64_t seed = 1;

  // scene: a synthetic spec (empty = default benchmark) or an existing file
  std::string scene_spec;
  std::string scene_points;
  std::string scene_format = "xyzl";
  std::string scene_labels;
  bool six_class_remap = false;

  std::size_t K = 512;
  std::vector<int> fov_scales{1, 2, 10};
  std::size_t n_snapshots = 2000;

  std::string pretext = "multi_fov";
  std::size_t pairs_per_snapshot = 1;
  /// A leading 4 adds log(FOV scale) as a fourth input channel.
  std::vector<int> layers{4, 64, 128, 128};
  int pretrain_epochs = 40;
  int cluster_epochs = 3;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double weight_decay = 0.0;
  /// Skip both training stages: features come from the initial weights.
  bool random_encoder = false;

  int n_clusters = 50;
  int kmeans_iters = 300;

  double label_fraction = 0.05;
  /// > 0 switches to a fixed number of labels per class.
  int labels_per_class = 0;
  int pseudo_clusters = 20;
  double pseudo_threshold = 0.8;
  double svm_c = 1.0;
  int svm_epochs = 200;

  double coverage_stop = 0.9995;
  std::size_t max_iters = 0;
  std::size_t fov_warmup = 256;
  std::size_t fov_refit = 512;
  std::size_t knn_k = 5;
  bool progress_ply = false;

  std::size_t finetune_n = 0;
  std::string finetune_spec;
  int finetune_epochs = 5;

  int workers = 1;

  static PipelineConfig from_kv(const KeyValues& kv);
  KeyValues to_kv() const;
  /// Human-readable list of every violated precondition (empty when valid).
  std::vector<std::string> violations() const;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::string& path)
      : Error("missing artifact: " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Config file (optional), then SNAPSEG_SEED, then "key=value" overrides.
/// Throws ConfigError listing every violation.
PipelineConfig load_pipeline_config(const std::optional<std::string>& path,
                                    const std::vector<std::string>& overrides);

/// Artifact paths inside work_dir.
struct Artifacts {
  explicit Artifacts(const PipelineConfig& cfg);

  std::string dir;
  std::string scene;
  std::string scene_spec;
  std::string snapshots;
  std::string snapshot_labels;
  std::string contrastnet;
  std::string pretrain_trace;
  std::string contrast_features;
  std::string kmeans;
  std::string cluster_assignments;
  std::string clusternet;
  std::string cluster_trace;
  std::string features;
  std::string pseudo_labels;
  std::string training_set;
  std::string svm;
  std::string votes;
  std::string capture_log;
  std::string final_labels;
  std::string segmentation_ply;
  std::string metrics;
  std::string confusion;
  std::string report;
  std::string snapshot_metrics;
  std::string finetuned;
  std::string log;
};

void cmd_synth(const PipelineConfig& cfg);
void cmd_sample(const PipelineConfig& cfg);
void cmd_pretrain(const PipelineConfig& cfg);
void cmd_cluster(const PipelineConfig& cfg);
void cmd_cluster_train(const PipelineConfig& cfg);
void cmd_extract(const PipelineConfig& cfg);
void cmd_fit(const PipelineConfig& cfg);
void cmd_segment(const PipelineConfig& cfg);
Metrics cmd_eval(const PipelineConfig& cfg);
void cmd_finetune(const PipelineConfig& cfg);

/// synth (unless scene_points is set), sample, pretrain, cluster,
/// cluster-train, extract, fit, segment, eval.
Metrics cmd_run_all(const PipelineConfig& cfg);

}  // namespace snapseg

#endif  // SNAPSEG_PIPELINE_HPP
