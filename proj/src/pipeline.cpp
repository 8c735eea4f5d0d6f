// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "snapseg/clustering.hpp"
#include "snapseg/contrastive.hpp"
#include "snapseg/encoder.hpp"
#include "snapseg/scene_io.hpp"
#include "snapseg/segmenter.hpp"
#include "snapseg/snapshot.hpp"
#include "snapseg/spatial_index.hpp"
#include "snapseg/synth_scene.hpp"
#include "snapseg/weak_classifier.hpp"

namespace fs = std::filesystem;

namespace snapseg {
namespace {

// stream salts, one per randomised stage
enum Salt : std::uint64_t {
  kSaltSample = 1,
  kSaltContrastInit,
  kSaltPairs,
  kSaltPretrain,
  kSaltKMeans,
  kSaltClusterHead,
  kSaltClusterTrain,
  kSaltLabels,
  kSaltPseudo,
  kSaltSvm,
  kSaltSegment,
  kSaltSelector,
  kSaltFinetuneScene,
  kSaltFinetuneSample,
  kSaltFinetuneTrain,
};

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void log_line(const Artifacts& a, const std::string& stage, const std::string& msg) {
  std::cerr << "[" << stage << "] " << msg << '\n';
  std::ofstream out(a.log, std::ios::app);
  if (!out) return;
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%S", std::localtime(&now));
  out << stamp << " [" << stage << "] " << msg << '\n';
}

class StageTimer {
 public:
  StageTimer(const Artifacts& a, std::string stage, const PipelineConfig& cfg)
      : a_(a), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {
    fs::create_directories(a_.dir);
    cfg.to_kv().save(a_.dir + "/config_" + stage_ + ".txt");
    log_line(a_, stage_, "start, seed " + std::to_string(cfg.seed));
  }
  ~StageTimer() {
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    char buf[64];
    std::snprintf(buf, sizeof(buf), "done in %.2f s", s);
    log_line(a_, stage_, buf);
  }
  void note(const std::string& msg) const { log_line(a_, stage_, msg); }

 private:
  const Artifacts& a_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

void require(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifact(path);
}

std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

PointCloud load_cloud(const PipelineConfig& cfg, const Artifacts& a) {
  if (!cfg.scene_points.empty()) {
    require(cfg.scene_points);
    LoadOptions opt;
    opt.format = parse_scene_format(cfg.scene_format);
    if (!cfg.scene_labels.empty()) {
      require(cfg.scene_labels);
      opt.labels_path = cfg.scene_labels;
    }
    PointCloud cloud = load_scene(cfg.scene_points, opt);
    if (cfg.six_class_remap) cloud = remap_labels(cloud, semantic3d_six_class_remap());
    return cloud;
  }
  require(a.scene);
  LoadOptions opt;
  opt.format = SceneFormat::kXyzl;
  opt.class_names = synth_class_names();
  return load_scene(a.scene, opt);
}

std::vector<Rgb> palette_for(int n_classes) {
  std::vector<Rgb> p = default_palette();
  for (int c = static_cast<int>(p.size()); c < n_classes; ++c) {
    const auto h = derive_seed(0x9a1e77e, static_cast<std::uint64_t>(c));
    p.push_back({static_cast<std::uint8_t>(h), static_cast<std::uint8_t>(h >> 8), static_cast<std::uint8_t>(h >> 16)});
  }
  return p;
}

struct SampleData {
  SnapshotSetHeader header;
  std::vector<MultiFovSnapshot> snapshots;
};

SampleData load_samples(const Artifacts& a) {
  require(a.snapshots);
  auto [header, snaps] = load_snapshot_set(a.snapshots);
  return {std::move(header), std::move(snaps)};
}

/// All views of all anchors, anchor-major; sample id = anchor * n_views + view.
std::vector<NormalizedSet> sample_sets(const PointCloud& cloud, const SampleData& d) {
  std::vector<NormalizedSet> sets;
  for (const auto& m : d.snapshots) {
    for (const auto& v : m.views) sets.push_back(normalize(gather(cloud, v.downsampled)));
  }
  return sets;
}

std::vector<int> sample_truth(const PointCloud& cloud, const SampleData& d) {
  std::vector<int> out;
  for (const auto& m : d.snapshots) {
    for (const auto& v : m.views) out.push_back(label_snapshot(cloud, v).class_id);
  }
  return out;
}

TrainConfig train_config(const PipelineConfig& cfg, int epochs, std::uint64_t salt) {
  TrainConfig t;
  t.lr = cfg.lr;
  t.batch_size = cfg.batch_size;
  t.epochs = cfg.random_encoder ? 0 : epochs;
  t.weight_decay = cfg.weight_decay;
  t.seed = derive_seed(cfg.seed, salt);
  return t;
}

void save_trace(const std::vector<EpochStats>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "epoch,loss,accuracy\n";
  char buf[96];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.10f,%.6f\n", e.epoch, e.loss, e.accuracy);
    out << buf;
  }
}

std::vector<int> load_assignments(const std::string& path) {
  require(path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  if (line != "sample_id,cluster_id") throw ParseError("bad cluster assignment header", 1);
  std::vector<int> ids;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("bad cluster assignment row", n);
    ids.push_back(std::stoi(line.substr(comma + 1)));
  }
  return ids;
}

class KvReader {
 public:
  explicit KvReader(const KeyValues& kv) : kv_(kv) {}

  template <typename T, typename F>
  void read(const std::string& key, T& field, F getter) {
    seen_.insert(key);
    try {
      field = getter(key, field);
    } catch (const std::exception& e) {
      errors_.push_back(e.what());
    }
  }
  void str(const std::string& key, std::string& f) {
    read(key, f, [this](const std::string& k, const std::string& d) { return kv_.get_string(k, d); });
  }
  void real(const std::string& key, double& f) {
    read(key, f, [this](const std::string& k, double d) { return kv_.get_double(k, d); });
  }
  void integer(const std::string& key, int& f) {
    read(key, f, [this](const std::string& k, int d) { return static_cast<int>(kv_.get_int(k, d)); });
  }
  void size(const std::string& key, std::size_t& f) {
    read(key, f, [this](const std::string& k, std::size_t d) {
      const long long v = kv_.get_int(k, static_cast<long long>(d));
      if (v < 0) throw std::invalid_argument(k + " must be >= 0");
      return static_cast<std::size_t>(v);
    });
  }
  void u64(const std::string& key, std::uint64_t& f) {
    read(key, f, [this](const std::string& k, std::uint64_t d) { return kv_.get_uint64(k, d); });
  }
  void flag(const std::string& key, bool& f) {
    read(key, f, [this](const std::string& k, bool d) { return kv_.get_bool(k, d); });
  }
  void ints(const std::string& key, std::vector<int>& f) {
    read(key, f, [this](const std::string& k, const std::vector<int>& d) { return kv_.get_int_list(k, d); });
  }

  std::vector<std::string> finish() {
    for (const auto& [k, v] : kv_.entries()) {
      if (!seen_.count(k)) errors_.push_back("unknown key '" + k + "'");
    }
    return errors_;
  }

 private:
  const KeyValues& kv_;
  std::set<std::string> seen_;
  std::vector<std::string> errors_;
};

/// Shared field list for reading and writing configs.
template <typename Visitor>
void visit_fields(PipelineConfig& c, Visitor& v) {
  v.str("work_dir", c.work_dir);
  v.u64("seed", c.seed);
  v.str("scene_spec", c.scene_spec);
  v.str("scene_points", c.scene_points);
  v.str("scene_format", c.scene_format);
  v.str("scene_labels", c.scene_labels);
  v.flag("six_class_remap", c.six_class_remap);
  v.size("K", c.K);
  v.ints("fov_scales", c.fov_scales);
  v.size("n_snapshots", c.n_snapshots);
  v.str("pretext", c.pretext);
  v.size("pairs_per_snapshot", c.pairs_per_snapshot);
  v.ints("layers", c.layers);
  v.integer("pretrain_epochs", c.pretrain_epochs);
  v.integer("cluster_epochs", c.cluster_epochs);
  v.real("lr", c.lr);
  v.size("batch_size", c.batch_size);
  v.real("weight_decay", c.weight_decay);
  v.flag("random_encoder", c.random_encoder);
  v.integer("n_clusters", c.n_clusters);
  v.integer("kmeans_iters", c.kmeans_iters);
  v.real("label_fraction", c.label_fraction);
  v.integer("labels_per_class", c.labels_per_class);
  v.integer("pseudo_clusters", c.pseudo_clusters);
  v.real("pseudo_threshold", c.pseudo_threshold);
  v.real("svm_c", c.svm_c);
  v.integer("svm_epochs", c.svm_epochs);
  v.real("coverage_stop", c.coverage_stop);
  v.size("max_iters", c.max_iters);
  v.size("fov_warmup", c.fov_warmup);
  v.size("fov_refit", c.fov_refit);
  v.size("knn_k", c.knn_k);
  v.flag("progress_ply", c.progress_ply);
  v.size("finetune_n", c.finetune_n);
  v.str("finetune_spec", c.finetune_spec);
  v.integer("finetune_epochs", c.finetune_epochs);
  v.integer("workers", c.workers);
}

class KvWriter {
 public:
  KeyValues kv;
  void str(const std::string& k, const std::string& f) { kv.set(k, f); }
  void real(const std::string& k, double f) { kv.set(k, format_double(f)); }
  void integer(const std::string& k, int f) { kv.set(k, std::to_string(f)); }
  void size(const std::string& k, std::size_t f) { kv.set(k, std::to_string(f)); }
  void u64(const std::string& k, std::uint64_t f) { kv.set(k, std::to_string(f)); }
  void flag(const std::string& k, bool f) { kv.set(k, f ? "true" : "false"); }
  void ints(const std::string& k, const std::vector<int>& f) { kv.set(k, join(f)); }
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> violations)
    : Error([&violations] {
        std::string msg = "invalid configuration:";
        for (const auto& v : violations) msg += "\n  " + v;
        return msg;
      }()),
      violations_(std::move(violations)) {}

PipelineConfig PipelineConfig::from_kv(const KeyValues& kv) {
  PipelineConfig c;
  KvReader reader(kv);
  visit_fields(c, reader);
  auto errors = reader.finish();
  for (auto& v : c.violations()) errors.push_back(std::move(v));
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return c;
}

KeyValues PipelineConfig::to_kv() const {
  KvWriter w;
  PipelineConfig copy = *this;
  visit_fields(copy, w);
  return w.kv;
}

std::vector<std::string> PipelineConfig::violations() const {
  std::vector<std::string> v;
  auto check = [&v](bool ok, const std::string& msg) {
    if (!ok) v.push_back(msg);
  };
  check(!work_dir.empty(), "work_dir must not be empty");
  try {
    parse_scene_format(scene_format);
  } catch (const std::exception& e) {
    v.push_back(std::string("scene_format: ") + e.what());
  }
  check(K >= 4, "K must be >= 4");
  try {
    validate_fov_scales(fov_scales);
  } catch (const std::exception& e) {
    v.push_back(std::string("fov_scales: ") + e.what());
  }
  check(n_snapshots >= 2, "n_snapshots must be >= 2");
  try {
    parse_pretext_mode(pretext);
  } catch (const std::exception& e) {
    v.push_back(std::string("pretext: ") + e.what());
  }
  if (pretext != "part") check(fov_scales.size() >= 2, "pretext " + pretext + " needs at least 2 fov_scales");
  check(pairs_per_snapshot >= 1, "pairs_per_snapshot must be >= 1");
  try {
    EncoderConfig ec;
    ec.layer_sizes = layers;
    ec.validate();
  } catch (const std::exception& e) {
    v.push_back(std::string("layers: ") + e.what());
  }
  check(pretrain_epochs >= 0, "pretrain_epochs must be >= 0");
  check(cluster_epochs >= 0, "cluster_epochs must be >= 0");
  check(lr > 0.0, "lr must be > 0");
  check(batch_size >= 1, "batch_size must be >= 1");
  check(weight_decay >= 0.0, "weight_decay must be >= 0");
  check(n_clusters >= 1, "n_clusters must be >= 1");
  check(static_cast<std::size_t>(std::max(n_clusters, 0)) <= n_snapshots * fov_scales.size(),
        "n_clusters exceeds the number of samples");
  check(kmeans_iters >= 1, "kmeans_iters must be >= 1");
  check(labels_per_class >= 0, "labels_per_class must be >= 0");
  if (labels_per_class == 0) {
    check(label_fraction > 0.0 && label_fraction <= 1.0, "label_fraction must be in (0, 1]");
  }
  check(pseudo_clusters >= 0 && pseudo_clusters <= n_clusters, "pseudo_clusters must be in [0, n_clusters]");
  check(pseudo_threshold > 0.0 && pseudo_threshold <= 1.0, "pseudo_threshold must be in (0, 1]");
  check(svm_c > 0.0, "svm_c must be > 0");
  check(svm_epochs >= 1, "svm_epochs must be >= 1");
  check(coverage_stop > 0.0 && coverage_stop <= 1.0, "coverage_stop must be in (0, 1]");
  check(fov_warmup >= 1, "fov_warmup must be >= 1");
  check(fov_refit >= 1, "fov_refit must be >= 1");
  check(knn_k >= 1, "knn_k must be >= 1");
  check(finetune_epochs >= 0, "finetune_epochs must be >= 0");
  check(workers >= 1, "workers must be >= 1");
  return v;
}

PipelineConfig load_pipeline_config(const std::optional<std::string>& path,
                                    const std::vector<std::string>& overrides) {
  KeyValues kv;
  if (path) {
    if (!fs::exists(*path)) throw MissingArtifact(*path);
    kv = KeyValues::load(*path);
  }
  if (const char* env = std::getenv("SNAPSEG_SEED"); env && *env) kv.set("seed", env);
  std::vector<std::string> errors;
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      errors.push_back("override '" + o + "' is not key=value");
      continue;
    }
    kv.set(o.substr(0, eq), o.substr(eq + 1));
  }
  if (!errors.empty()) throw ConfigError(errors);
  return PipelineConfig::from_kv(kv);
}

Artifacts::Artifacts(const PipelineConfig& cfg) : dir(cfg.work_dir) {
  auto p = [this](const std::string& name) { return dir + "/" + name; };
  scene = p("scene.xyzl");
  scene_spec = p("scene_spec.txt");
  snapshots = p("snapshots.txt");
  snapshot_labels = p("snapshot_labels.csv");
  contrastnet = p("contrastnet_" + cfg.pretext + ".model");
  pretrain_trace = p("pretrain_trace_" + cfg.pretext + ".csv");
  contrast_features = p("contrast_features.txt");
  kmeans = p("kmeans.model");
  cluster_assignments = p("cluster_assignments.csv");
  clusternet = p("clusternet.model");
  cluster_trace = p("clusternet_trace.csv");
  features = p("features.txt");
  pseudo_labels = p("pseudo_labels.csv");
  training_set = p("training_set.csv");
  svm = p("svm.model");
  votes = p("votes.txt");
  capture_log = p("capture_log.csv");
  final_labels = p("final_labels.txt");
  segmentation_ply = p("segmentation.ply");
  metrics = p("metrics.csv");
  confusion = p("confusion.csv");
  report = p("report.txt");
  snapshot_metrics = p("snapshot_metrics.csv");
  finetuned = p("clusternet_finetuned.model");
  log = p("run.log");
}

void cmd_synth(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "synth", cfg);
  SceneSpec spec = default_benchmark_spec();
  if (!cfg.scene_spec.empty()) {
    require(cfg.scene_spec);
    spec = load_scene_spec(cfg.scene_spec);
  }
  const PointCloud cloud = generate(spec);
  save_xyzl(cloud, a.scene);
  save_scene_spec(spec, a.scene_spec);
  std::string counts;
  std::vector<std::size_t> per(static_cast<std::size_t>(cloud.n_classes), 0);
  for (int l : cloud.labels) ++per[static_cast<std::size_t>(l)];
  for (std::size_t c = 0; c < per.size(); ++c) counts += " " + cloud.class_names[c] + "=" + std::to_string(per[c]);
  t.note(std::to_string(cloud.size()) + " points:" + counts);
}

void cmd_sample(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "sample", cfg);
  const PointCloud cloud = load_cloud(cfg, a);
  const KdTree tree = build_kdtree(cloud);
  Rng rng(derive_seed(cfg.seed, kSaltSample));
  std::vector<MultiFovSnapshot> snaps;
  snaps.reserve(cfg.n_snapshots);
  for (std::size_t i = 0; i < cfg.n_snapshots; ++i) {
    snaps.push_back(sample_multi_fov(tree, cloud, random_anchor(rng, cloud.size()), cfg.K, cfg.fov_scales, rng));
  }
  save_snapshot_set(a.snapshots, {cfg.K, cfg.fov_scales, cfg.seed}, snaps);

  std::ofstream out(a.snapshot_labels);
  if (!out) throw IoError("cannot write '" + a.snapshot_labels + "'");
  out << "sample_id,anchor,fov_scale,class_id,purity\n";
  std::vector<SnapshotLabel> labels;
  std::size_t id = 0;
  for (const auto& m : snaps) {
    for (const auto& v : m.views) {
      const SnapshotLabel l = label_snapshot(cloud, v);
      labels.push_back(l);
      out << id++ << ',' << m.anchor << ',' << v.fov_scale << ',' << l.class_id << ',' << fixed(l.purity, 6) << '\n';
    }
  }
  if (cloud.has_labels()) {
    const PurityReport r = purity_report(labels, cloud.n_classes);
    t.note(std::to_string(labels.size()) + " samples, mean purity " + fixed(r.overall_mean));
  }
}

void cmd_pretrain(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "pretrain", cfg);
  const PointCloud cloud = load_cloud(cfg, a);
  const SampleData d = load_samples(a);
  const PretextMode mode = parse_pretext_mode(cfg.pretext);

  EncoderConfig ec;
  ec.layer_sizes = cfg.layers;
  ec.head = HeadMode::kPair;
  ec.n_outputs = 2;
  ec.seed = derive_seed(cfg.seed, kSaltContrastInit);
  EncoderModel model(ec);

  const TrainConfig tc = train_config(cfg, cfg.pretrain_epochs, kSaltPretrain);
  if (tc.epochs == 0) {
    t.note("no pretraining epochs, saving initial weights");
    save_encoder(model, a.contrastnet);
    save_trace({}, a.pretrain_trace);
    return;
  }

  Rng rng(derive_seed(cfg.seed, kSaltPairs));
  std::vector<ContrastPair> pairs;
  if (mode == PretextMode::kPart) {
    std::vector<PointSet> singles;
    for (const auto& m : d.snapshots) singles.push_back(gather(cloud, m.views.front().downsampled));
    pairs = make_part_pairs(singles, cfg.pairs_per_snapshot, rng);
  } else {
    std::vector<ViewSet> multi;
    for (const auto& m : d.snapshots) {
      ViewSet vs;
      for (const auto& v : m.views) vs.push_back(gather(cloud, v.downsampled));
      multi.push_back(std::move(vs));
    }
    pairs = mode == PretextMode::kScale ? make_scale_pairs(multi, cfg.pairs_per_snapshot, rng)
                                        : make_multifov_pairs(multi, cfg.pairs_per_snapshot, rng);
  }
  t.note(std::to_string(pairs.size()) + " " + cfg.pretext + " pairs");
  TrainResult r = train(std::move(model), pairs, tc);
  save_encoder(r.model, a.contrastnet);
  save_trace(r.trace, a.pretrain_trace);
  if (!r.trace.empty()) {
    t.note("final loss " + fixed(r.trace.back().loss) + ", pair accuracy " + fixed(r.trace.back().accuracy));
  }
}

void cmd_cluster(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "cluster", cfg);
  require(a.contrastnet);
  const PointCloud cloud = load_cloud(cfg, a);
  const SampleData d = load_samples(a);
  const EncoderModel contrastnet = load_encoder(a.contrastnet);
  const auto sets = sample_sets(cloud, d);
  const FeatureMatrix feats = extract_features(contrastnet, sets, cfg.workers);
  save_features(feats, a.contrast_features);
  const KMeansModel km = fit_kmeans(feats, cfg.n_clusters, derive_seed(cfg.seed, kSaltKMeans), cfg.kmeans_iters);
  save_kmeans(km, a.kmeans);
  std::ofstream out(a.cluster_assignments);
  if (!out) throw IoError("cannot write '" + a.cluster_assignments + "'");
  out << "sample_id,cluster_id\n";
  for (std::size_t i = 0; i < km.assignment.size(); ++i) out << i << ',' << km.assignment[i] << '\n';
  t.note(std::to_string(cfg.n_clusters) + " clusters, " + std::to_string(km.n_iters_run) + " Lloyd iterations");
}

void cmd_cluster_train(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "cluster-train", cfg);
  require(a.contrastnet);
  require(a.kmeans);
  const PointCloud cloud = load_cloud(cfg, a);
  const SampleData d = load_samples(a);
  const EncoderModel contrastnet = load_encoder(a.contrastnet);
  const std::vector<int> ids = load_assignments(a.cluster_assignments);
  const KMeansModel km = load_kmeans(a.kmeans);
  const auto sets = sample_sets(cloud, d);
  if (ids.size() != sets.size()) throw StructuralError("cluster assignments do not match the snapshot set");

  EncoderModel clusternet = contrastnet.with_new_head(HeadMode::kClassify, km.n_clusters(),
                                                      derive_seed(cfg.seed, kSaltClusterHead));
  const TrainConfig tc = train_config(cfg, cfg.cluster_epochs, kSaltClusterTrain);
  if (tc.epochs > 0) {
    std::vector<LabeledSet> samples;
    samples.reserve(sets.size());
    for (std::size_t i = 0; i < sets.size(); ++i) samples.push_back({sets[i], ids[i]});
    TrainResult r = train(std::move(clusternet), samples, tc);
    clusternet = std::move(r.model);
    save_trace(r.trace, a.cluster_trace);
    t.note("final loss " + fixed(r.trace.back().loss) + ", cluster accuracy " + fixed(r.trace.back().accuracy));
  } else {
    save_trace({}, a.cluster_trace);
    t.note("no ClusterNet epochs, trunk kept as is");
  }
  save_encoder(clusternet, a.clusternet);
}

void cmd_extract(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "extract", cfg);
  require(a.clusternet);
  const PointCloud cloud = load_cloud(cfg, a);
  const SampleData d = load_samples(a);
  const EncoderModel model = load_encoder(a.clusternet);
  const FeatureMatrix feats = extract_features(model, sample_sets(cloud, d), cfg.workers);
  save_features(feats, a.features);
  t.note(std::to_string(feats.rows()) + " x " + std::to_string(feats.cols()) + " features");
}

void cmd_fit(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "fit", cfg);
  require(a.features);
  const PointCloud cloud = load_cloud(cfg, a);
  if (!cloud.has_labels()) throw StructuralError("fit needs a labeled scene to draw snapshot labels from");
  const SampleData d = load_samples(a);
  const FeatureMatrix feats = load_features(a.features);
  const std::vector<int> truth = sample_truth(cloud, d);
  if (static_cast<std::size_t>(feats.rows()) != truth.size()) {
    throw StructuralError("feature rows do not match the snapshot set");
  }

  std::optional<PseudoLabelSet> pseudo;
  if (cfg.pseudo_clusters > 0) {
    require(a.kmeans);
    require(a.contrast_features);
    const KMeansModel km = load_kmeans(a.kmeans);
    const FeatureMatrix cf = load_features(a.contrast_features);
    const auto clusters = select_random_clusters(km.n_clusters(), cfg.pseudo_clusters,
                                                 derive_seed(cfg.seed, kSaltPseudo));
    const auto centre_labels = center_labels_from_truth(km, cf, truth, clusters);
    std::vector<int> usable;
    for (int c : clusters) {
      if (centre_labels.count(c)) usable.push_back(c);
    }
    pseudo = cluster_pseudo_label(km, cf, usable, centre_labels, cfg.pseudo_threshold);
    save_pseudo_labels(*pseudo, a.pseudo_labels);
    std::size_t right = 0;
    for (std::size_t i = 0; i < pseudo->size(); ++i) right += pseudo->class_ids[i] == truth[pseudo->sample_ids[i]];
    t.note(std::to_string(pseudo->size()) + " pseudo labels from " + std::to_string(usable.size()) +
           " clusters, accuracy " + fixed(pseudo->size() ? static_cast<double>(right) / static_cast<double>(pseudo->size()) : 0.0));
  }

  const LabelBudget budget = cfg.labels_per_class > 0 ? LabelBudget::PerClass(cfg.labels_per_class)
                                                      : LabelBudget::Fraction(cfg.label_fraction);
  const WeakTrainingSet ws = build_weak_training_set(feats, truth, cloud.n_classes, budget,
                                                     pseudo ? &*pseudo : nullptr, derive_seed(cfg.seed, kSaltLabels));
  for (const auto& w : ws.warnings) t.note("warning: " + w);

  std::ofstream manifest(a.training_set);
  if (!manifest) throw IoError("cannot write '" + a.training_set + "'");
  manifest << "sample_id,class_id,source\n";
  for (std::size_t i = 0; i < ws.labels.size(); ++i) {
    manifest << ws.sample_ids[i] << ',' << ws.labels[i] << ',' << (ws.is_pseudo[i] ? "pseudo" : "true") << '\n';
  }
  manifest.close();

  SvmOptions so;
  so.C = cfg.svm_c;
  so.seed = derive_seed(cfg.seed, kSaltSvm);
  so.epochs = cfg.svm_epochs;
  const LinearSvm svm = fit_svm(ws.features, ws.labels, cloud.n_classes, so);
  save_svm(svm, a.svm);

  const Metrics m = metrics(confusion(truth, predict(svm, feats), cloud.n_classes));
  write_metrics_csv(m, cloud.class_names, a.snapshot_metrics);
  t.note(std::to_string(ws.n_true()) + " true + " + std::to_string(ws.labels.size() - ws.n_true()) +
         " pseudo training samples; snapshot OA " + fixed(m.oa));
}

void cmd_segment(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "segment", cfg);
  require(a.clusternet);
  require(a.svm);
  const PointCloud cloud = load_cloud(cfg, a);
  const KdTree tree = build_kdtree(cloud);
  const EncoderModel model = load_encoder(a.clusternet);
  const LinearSvm svm = load_svm(a.svm);
  if (svm.n_classes() != cloud.n_classes) throw StructuralError("SVM class count does not match the scene");

  AdaptiveFovSelector selector(cfg.fov_scales, cfg.fov_warmup, cfg.fov_refit, derive_seed(cfg.seed, kSaltSelector));
  SegmentConfig sc;
  sc.K = cfg.K;
  sc.fov_scales = cfg.fov_scales;
  sc.coverage_stop = cfg.coverage_stop;
  sc.max_iters = cfg.max_iters;
  sc.seed = derive_seed(cfg.seed, kSaltSegment);
  if (cfg.progress_ply) sc.progress_prefix = a.dir + "/progress";
  const SegmentRun run = segment(cloud, tree, make_snapshot_classifier(cloud, model, svm), selector, sc);
  const Resolution res = resolve_votes(run.votes, tree, cloud, cfg.knn_k);

  run.votes.save(a.votes);
  save_capture_log(run.captures, a.capture_log);
  save_labels(res.labels, a.final_labels);
  export_colored_ply(cloud, res.labels, palette_for(cloud.n_classes), a.segmentation_ply);
  t.note(std::to_string(run.iterations) + " snapshots, coverage " + fixed(run.coverage, 6) +
         (run.complete ? "" : " (incomplete)") + ", " + std::to_string(res.ties_resolved) + " ties, " +
         std::to_string(res.inherited) + " inherited");
}

Metrics cmd_eval(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "eval", cfg);
  require(a.final_labels);
  const PointCloud cloud = load_cloud(cfg, a);
  if (!cloud.has_labels()) throw StructuralError("eval needs a scene with ground-truth labels");
  const std::vector<int> pred = load_labels(a.final_labels);
  const ConfusionMatrix cm = confusion(cloud.labels, pred, cloud.n_classes);
  const Metrics m = metrics(cm);
  write_metrics_csv(m, cloud.class_names, a.metrics);
  write_confusion_csv(cm, cloud.class_names, a.confusion);
  const std::string table = format_metrics_table(m, cloud.class_names);
  std::ofstream out(a.report);
  if (!out) throw IoError("cannot write '" + a.report + "'");
  out << table;
  t.note("OA " + fixed(m.oa) + ", average F " + fixed(m.average_f));
  return m;
}

void cmd_finetune(const PipelineConfig& cfg) {
  const Artifacts a(cfg);
  StageTimer t(a, "finetune", cfg);
  require(a.clusternet);
  require(a.contrastnet);
  require(a.kmeans);
  const EncoderModel clusternet = load_encoder(a.clusternet);
  const EncoderModel contrastnet = load_encoder(a.contrastnet);
  const KMeansModel km = load_kmeans(a.kmeans);

  SceneSpec spec = default_benchmark_spec();
  if (!cfg.finetune_spec.empty()) {
    require(cfg.finetune_spec);
    spec = load_scene_spec(cfg.finetune_spec);
  } else {
    spec.seed = derive_seed(cfg.seed, kSaltFinetuneScene);
  }
  const PointCloud scene = generate(spec);
  const KdTree tree = build_kdtree(scene);
  Rng rng(derive_seed(cfg.seed, kSaltFinetuneSample));
  std::vector<NormalizedSet> sets;
  while (sets.size() < cfg.finetune_n) {
    const auto m = sample_multi_fov(tree, scene, random_anchor(rng, scene.size()), cfg.K, cfg.fov_scales, rng);
    for (const auto& v : m.views) {
      if (sets.size() < cfg.finetune_n) sets.push_back(normalize(gather(scene, v.downsampled)));
    }
  }
  TrainConfig tc = train_config(cfg, cfg.finetune_epochs, kSaltFinetuneTrain);
  const FineTuneResult r = fine_tune_for_scene(clusternet, contrastnet, km, sets, cfg.finetune_n, tc);
  save_encoder(r.model, a.finetuned);
  t.note(std::to_string(cfg.finetune_n) + " fine-tune samples, loss " + fixed(r.loss_before) + " -> " +
         fixed(r.loss_after));
}

Metrics cmd_run_all(const PipelineConfig& cfg) {
  if (cfg.scene_points.empty()) cmd_synth(cfg);
  cmd_sample(cfg);
  cmd_pretrain(cfg);
  cmd_cluster(cfg);
  cmd_cluster_train(cfg);
  cmd_extract(cfg);
  cmd_fit(cfg);
  cmd_segment(cfg);
  return cmd_eval(cfg);
}

}  // namespace snapseg
