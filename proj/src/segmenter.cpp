// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/segmenter.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace snapseg {

VoteTable::VoteTable(std::size_t n_points, int n_classes)
    : n_points_(n_points),
      n_classes_(n_classes),
      counts_(n_points * static_cast<std::size_t>(std::max(n_classes, 0)), 0),
      totals_(n_points, 0) {
  if (n_classes < 1) throw std::invalid_argument("VoteTable: n_classes must be >= 1");
}

void VoteTable::add(std::span<const PointIndex> points, int class_id) {
  if (class_id < 0 || class_id >= n_classes_) {
    throw std::invalid_argument("VoteTable: class " + std::to_string(class_id) + " out of range");
  }
  for (PointIndex p : points) {
    if (p >= n_points_) throw std::out_of_range("VoteTable: point index out of range");
    ++counts_[static_cast<std::size_t>(p) * static_cast<std::size_t>(n_classes_) + static_cast<std::size_t>(class_id)];
    if (totals_[p]++ == 0) ++n_covered_;
  }
  total_votes_ += points.size();
}

std::uint64_t VoteTable::total(PointIndex p) const { return totals_[p]; }

double VoteTable::coverage() const {
  return n_points_ == 0 ? 1.0 : static_cast<double>(n_covered_) / static_cast<double>(n_points_);
}

int VoteTable::argmax(PointIndex p) const {
  if (!covered(p)) return kUnlabeled;
  int best = 0;
  for (int c = 1; c < n_classes_; ++c) {
    if (count(p, c) > count(p, best)) best = c;
  }
  return best;
}

int VoteTable::top_multiplicity(PointIndex p) const {
  if (!covered(p)) return 0;
  const std::uint32_t top = count(p, argmax(p));
  int m = 0;
  for (int c = 0; c < n_classes_; ++c) m += count(p, c) == top ? 1 : 0;
  return m;
}

void VoteTable::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "snapseg-votes v1\nn_points " << n_points_ << "\nn_classes " << n_classes_ << '\n';
  for (std::size_t p = 0; p < n_points_; ++p) {
    for (int c = 0; c < n_classes_; ++c) out << (c ? " " : "") << count(static_cast<PointIndex>(p), c);
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

VoteTable VoteTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic, version, key;
  std::size_t n = 0;
  int k = 0;
  in >> magic >> version;
  if (magic != "snapseg-votes") throw ParseError("not a vote table file", 1);
  in >> key >> n >> key >> k;
  if (!in || k < 1) throw ParseError("bad vote table header", 2);
  VoteTable t(n, k);
  std::vector<PointIndex> one(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (int c = 0; c < k; ++c) {
      std::uint32_t v = 0;
      if (!(in >> v)) throw ParseError("truncated vote table", 4 + p);
      auto& slot = t.counts_[p * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
      slot = v;
      if (v > 0 && t.totals_[p] == 0) ++t.n_covered_;
      t.totals_[p] += v;
      t.total_votes_ += v;
    }
  }
  return t;
}

SnapshotClassifier make_snapshot_classifier(const PointCloud& cloud, const EncoderModel& model,
                                            const LinearSvm& svm) {
  if (svm.dim() != model.feature_dim()) {
    throw std::invalid_argument("classifier expects " + std::to_string(svm.dim()) +
                                "-d features, encoder produces " + std::to_string(model.feature_dim()));
  }
  return [&cloud, &model, &svm](const Snapshot& s) {
    const Eigen::VectorXd f = forward_features(model, normalize(gather(cloud, s.downsampled)));
    return predict_one(svm, f.transpose());
  };
}

void SegmentConfig::validate() const {
  if (K == 0) throw std::invalid_argument("segment: K must be >= 1");
  validate_fov_scales(fov_scales);
  if (!(coverage_stop > 0.0 && coverage_stop <= 1.0)) throw std::invalid_argument("segment: coverage_stop must be in (0, 1]");
}

SegmentRun segment(const PointCloud& cloud, const KdTree& tree, const SnapshotClassifier& classify,
                   AdaptiveFovSelector& selector, const SegmentConfig& cfg) {
  cfg.validate();
  const std::size_t n = cloud.size();
  const std::size_t largest = cfg.K * static_cast<std::size_t>(cfg.fov_scales.back());
  if (largest > n) {
    throw std::invalid_argument("segment: largest field of view needs " + std::to_string(largest) +
                                " points, scene has " + std::to_string(n));
  }
  const int n_classes = cloud.n_classes > 0 ? cloud.n_classes : 1;
  const std::size_t max_iters = cfg.max_iters > 0 ? cfg.max_iters : std::max<std::size_t>(1, 200 * n / cfg.K);

  SegmentRun run{VoteTable(n, n_classes), 0, 0.0, false, {}, {}};
  Rng rng(cfg.seed);
  const double marks[] = {0.25, 0.5, 0.75, 1.0};
  std::size_t next_mark = 0;
  const auto palette = default_palette();

  auto emit_progress = [&](double fraction) {
    std::vector<int> labels(n);
    for (std::size_t p = 0; p < n; ++p) labels[p] = run.votes.argmax(static_cast<PointIndex>(p));
    const int pct = static_cast<int>(fraction * 100.0 + 0.5);
    export_colored_ply(cloud, labels, palette, cfg.progress_prefix + "_" + std::to_string(pct) + ".ply");
  };

  while (run.votes.coverage() < cfg.coverage_stop && run.iterations < max_iters) {
    const PointIndex anchor = random_anchor(rng, n);
    const auto hood = anchored_neighborhood(tree, cloud, anchor, largest);
    const double variance = presample_variance(cloud, hood);
    const int scale = selector.select(variance);
    if (std::find(cfg.fov_scales.begin(), cfg.fov_scales.end(), scale) == cfg.fov_scales.end()) {
      throw std::invalid_argument("segment: selector returned scale " + std::to_string(scale) +
                                  " that is not configured");
    }
    Snapshot s;
    s.anchor = anchor;
    s.fov_scale = scale;
    s.presampled.assign(hood.begin(), hood.begin() + static_cast<std::ptrdiff_t>(cfg.K * static_cast<std::size_t>(scale)));
    s.downsampled = downsample(s.presampled, cfg.K, anchor, rng);
    const int cls = classify(s);
    run.votes.add(s.presampled, cls);
    run.captures.push_back({run.iterations, anchor, scale, cls, s.presampled.size()});
    run.covered_trace.push_back(run.votes.n_covered());
    ++run.iterations;

    if (!cfg.progress_prefix.empty()) {
      while (next_mark < 4 && run.votes.coverage() >= marks[next_mark] * cfg.coverage_stop) {
        emit_progress(marks[next_mark]);
        ++next_mark;
      }
    }
  }
  run.coverage = run.votes.coverage();
  run.complete = run.coverage >= cfg.coverage_stop;
  return run;
}

Resolution resolve_votes(const VoteTable& votes, const KdTree& tree, const PointCloud& cloud,
                         std::size_t knn_k) {
  const std::size_t n = votes.n_points();
  if (n != cloud.size() || tree.size() != n) throw std::invalid_argument("resolve_votes: size mismatch");
  const int k_classes = votes.n_classes();

  std::vector<int> current(n);
  for (std::size_t p = 0; p < n; ++p) current[p] = votes.argmax(static_cast<PointIndex>(p));

  Resolution res;
  res.labels = current;
  std::vector<Neighbor> nn;
  std::vector<std::uint32_t> hist(static_cast<std::size_t>(k_classes));
  for (std::size_t p = 0; p < n; ++p) {
    const auto pi = static_cast<PointIndex>(p);
    if (votes.top_multiplicity(pi) < 2) continue;
    ++res.ties_resolved;

    std::fill(hist.begin(), hist.end(), 0u);
    tree.knn_into(cloud.positions[p], std::min(knn_k + 1, n), nn);
    std::size_t used = 0;
    for (const auto& nb : nn) {
      if (nb.index == pi || used == knn_k) continue;
      ++used;
      if (current[nb.index] != kUnlabeled) ++hist[static_cast<std::size_t>(current[nb.index])];
    }
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(k_classes));
    for (int c = 0; c < k_classes; ++c) counts[static_cast<std::size_t>(c)] = votes.count(pi, c);
    const auto top = std::max_element(hist.begin(), hist.end());
    if (*top > 0) ++counts[static_cast<std::size_t>(top - hist.begin())];
    res.labels[p] = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  }

  if (votes.n_covered() == 0) {
    throw std::invalid_argument("resolve_votes: no point is covered");
  }
  for (std::size_t p = 0; p < n; ++p) {
    if (votes.covered(static_cast<PointIndex>(p))) continue;
    for (std::size_t k = 16;; k *= 2) {
      k = std::min(k, n);
      tree.knn_into(cloud.positions[p], k, nn);
      const auto hit = std::find_if(nn.begin(), nn.end(),
                                    [&votes](const Neighbor& nb) { return votes.covered(nb.index); });
      if (hit != nn.end()) {
        res.labels[p] = res.labels[hit->index];
        break;
      }
      if (k == n) break;
    }
    ++res.inherited;
  }
  return res;
}

void save_capture_log(std::span<const CaptureRecord> captures, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "iter,anchor,fov_scale,predicted_class\n";
  for (const auto& c : captures) out << c.iter << ',' << c.anchor << ',' << c.fov_scale << ',' << c.predicted_class << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<CaptureRecord> load_capture_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != "iter,anchor,fov_scale,predicted_class") throw ParseError("bad capture log header", 1);
  std::vector<CaptureRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    CaptureRecord c;
    if (!(is >> c.iter >> c.anchor >> c.fov_scale >> c.predicted_class)) throw ParseError("bad capture record", n);
    out.push_back(c);
  }
  return out;
}

FineTuneResult fine_tune_for_scene(const EncoderModel& clusternet, const EncoderModel& contrastnet,
                                   const KMeansModel& kmeans, std::span<const NormalizedSet> new_sets,
                                   std::size_t n_finetune, const TrainConfig& cfg) {
  FineTuneResult out{clusternet, {}, {}, 0.0, 0.0};
  if (n_finetune == 0) return out;
  if (n_finetune > new_sets.size()) {
    throw std::invalid_argument("fine_tune_for_scene: asked for " + std::to_string(n_finetune) +
                                " samples, have " + std::to_string(new_sets.size()));
  }
  if (clusternet.config().head != HeadMode::kClassify || clusternet.n_outputs() != kmeans.n_clusters()) {
    throw std::invalid_argument("fine_tune_for_scene: ClusterNet head does not match the KMeans model");
  }
  const auto subset = new_sets.first(n_finetune);
  const FeatureMatrix feats = extract_features(contrastnet, subset);
  out.cluster_ids = assign(kmeans, feats);
  std::vector<LabeledSet> samples;
  samples.reserve(n_finetune);
  for (std::size_t i = 0; i < n_finetune; ++i) samples.push_back({subset[i], out.cluster_ids[i]});
  out.loss_before = mean_loss(clusternet, samples);
  TrainResult tr = train(clusternet, samples, cfg);
  out.model = std::move(tr.model);
  out.trace = std::move(tr.trace);
  out.loss_after = mean_loss(out.model, samples);
  return out;
}

}  // namespace snapseg
