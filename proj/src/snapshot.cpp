// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "snapseg/clustering.hpp"

namespace snapseg {

std::vector<PointIndex> anchored_neighborhood(const KdTree& tree, const PointCloud& cloud,
                                              PointIndex anchor, std::size_t n) {
  if (n == 0 || n > cloud.size()) {
    throw std::invalid_argument("neighbourhood of " + std::to_string(n) +
                                " points does not fit a scene of " +
                                std::to_string(cloud.size()));
  }
  std::vector<Neighbor> nn;
  tree.knn_into(cloud.positions[anchor], n, nn);
  std::vector<PointIndex> out;
  out.reserve(n);
  out.push_back(anchor);
  for (const auto& nb : nn) {
    if (nb.index != anchor && out.size() < n) out.push_back(nb.index);
  }
  return out;
}

std::vector<PointIndex> downsample(std::span<const PointIndex> presampled, std::size_t K,
                                   PointIndex anchor, Rng& rng) {
  if (K == 0 || K > presampled.size()) {
    throw std::invalid_argument("cannot down-sample " + std::to_string(presampled.size()) +
                                " points to " + std::to_string(K));
  }
  if (K == presampled.size()) return {presampled.begin(), presampled.end()};

  const auto it = std::find(presampled.begin(), presampled.end(), anchor);
  if (it == presampled.end()) throw std::invalid_argument("anchor missing from pre-sample");
  const std::size_t anchor_pos = static_cast<std::size_t>(it - presampled.begin());

  std::vector<std::size_t> pos;
  pos.reserve(presampled.size() - 1);
  for (std::size_t i = 0; i < presampled.size(); ++i) {
    if (i != anchor_pos) pos.push_back(i);
  }
  // partial Fisher-Yates: first K-1 slots become a uniform subset
  for (std::size_t i = 0; i + 1 < K; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  pos.resize(K - 1);
  pos.push_back(anchor_pos);
  std::sort(pos.begin(), pos.end());

  std::vector<PointIndex> out;
  out.reserve(K);
  for (std::size_t p : pos) out.push_back(presampled[p]);
  return out;
}

Snapshot sample_single_fov(const KdTree& tree, const PointCloud& cloud, PointIndex anchor,
                           std::size_t K, int presample_factor, Rng& rng) {
  if (presample_factor < 1) throw std::invalid_argument("presample_factor must be >= 1");
  Snapshot s;
  s.anchor = anchor;
  s.fov_scale = presample_factor;
  s.presampled = anchored_neighborhood(tree, cloud, anchor, K * static_cast<std::size_t>(presample_factor));
  s.downsampled = downsample(s.presampled, K, anchor, rng);
  return s;
}

void validate_fov_scales(std::span<const int> fov_scales) {
  if (fov_scales.empty() || fov_scales.front() != 1) {
    throw std::invalid_argument("fov_scales must start at 1");
  }
  for (std::size_t i = 1; i < fov_scales.size(); ++i) {
    if (fov_scales[i] <= fov_scales[i - 1]) {
      throw std::invalid_argument("fov_scales must be strictly increasing");
    }
  }
}

MultiFovSnapshot sample_multi_fov(const KdTree& tree, const PointCloud& cloud,
                                  PointIndex anchor, std::size_t K,
                                  std::span<const int> fov_scales, Rng& rng) {
  validate_fov_scales(fov_scales);
  const std::size_t largest = K * static_cast<std::size_t>(fov_scales.back());
  const auto hood = anchored_neighborhood(tree, cloud, anchor, largest);

  MultiFovSnapshot m;
  m.anchor = anchor;
  m.views.reserve(fov_scales.size());
  for (int scale : fov_scales) {
    Snapshot s;
    s.anchor = anchor;
    s.fov_scale = scale;
    s.presampled.assign(hood.begin(), hood.begin() + static_cast<std::ptrdiff_t>(K * static_cast<std::size_t>(scale)));
    s.downsampled = downsample(s.presampled, K, anchor, rng);
    m.views.push_back(std::move(s));
  }
  return m;
}

SnapshotLabel vote_label(std::span<const int> member_labels) {
  if (member_labels.empty()) throw std::invalid_argument("vote_label: empty snapshot");
  int max_label = -1;
  for (int l : member_labels) max_label = std::max(max_label, l);
  if (max_label < 0) return {kUnlabeled, 0.0};

  std::vector<std::size_t> counts(static_cast<std::size_t>(max_label) + 1, 0);
  for (int l : member_labels) {
    if (l >= 0) ++counts[static_cast<std::size_t>(l)];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return {static_cast<int>(best),
          static_cast<double>(counts[best]) / static_cast<double>(member_labels.size())};
}

SnapshotLabel label_snapshot(const PointCloud& cloud, const Snapshot& snapshot) {
  if (!cloud.has_labels()) throw std::invalid_argument("label_snapshot: cloud has no labels");
  std::vector<int> members;
  members.reserve(snapshot.downsampled.size());
  for (PointIndex i : snapshot.downsampled) members.push_back(cloud.labels[i]);
  return vote_label(members);
}

PurityReport purity_report(std::span<const SnapshotLabel> samples, int n_classes,
                           std::size_t n_runs) {
  if (samples.empty()) throw std::invalid_argument("purity_report: no samples");
  if (n_runs == 0) throw std::invalid_argument("purity_report: n_runs must be >= 1");

  PurityReport report;
  report.per_class.resize(static_cast<std::size_t>(n_classes));
  std::vector<double> sum(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<double> sum_sq(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(n_classes), 0);
  double all_sum = 0.0;
  double all_sq = 0.0;
  for (const auto& s : samples) {
    all_sum += s.purity;
    all_sq += s.purity * s.purity;
    if (s.class_id < 0 || s.class_id >= n_classes) continue;
    const auto c = static_cast<std::size_t>(s.class_id);
    sum[c] += s.purity;
    sum_sq[c] += s.purity * s.purity;
    ++count[c];
  }
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    auto& pc = report.per_class[c];
    if (count[c] == 0) continue;
    const double n = static_cast<double>(count[c]);
    pc.present = true;
    pc.mean_purity = sum[c] / n;
    pc.std_purity = std::sqrt(std::max(0.0, sum_sq[c] / n - pc.mean_purity * pc.mean_purity));
    pc.mean_count = n / static_cast<double>(n_runs);
  }
  const double n = static_cast<double>(samples.size());
  report.n_samples = samples.size();
  report.overall_mean = all_sum / n;
  report.overall_std = std::sqrt(std::max(0.0, all_sq / n - report.overall_mean * report.overall_mean));
  return report;
}

double presample_variance(const PointCloud& cloud, std::span<const PointIndex> presampled) {
  if (presampled.empty()) throw std::invalid_argument("presample_variance: empty pre-sample");
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (PointIndex i : presampled) centroid += cloud.positions[i];
  centroid /= static_cast<double>(presampled.size());
  double acc = 0.0;
  for (PointIndex i : presampled) acc += (cloud.positions[i] - centroid).squaredNorm();
  return acc / static_cast<double>(presampled.size());
}

AdaptiveFovSelector::AdaptiveFovSelector(std::vector<int> fov_scales, std::size_t warmup_min,
                                         std::size_t refit_interval, std::uint64_t seed)
    : fov_scales_(std::move(fov_scales)),
      warmup_min_(warmup_min),
      refit_interval_(refit_interval),
      seed_(seed) {
  if (fov_scales_.empty()) throw std::invalid_argument("selector needs at least one scale");
  std::sort(fov_scales_.begin(), fov_scales_.end());
  if (warmup_min_ < fov_scales_.size()) warmup_min_ = fov_scales_.size();
  if (refit_interval_ == 0) throw std::invalid_argument("refit_interval must be >= 1");
}

void AdaptiveFovSelector::refit() {
  FeatureMatrix x(static_cast<Eigen::Index>(history_.size()), 1);
  for (std::size_t i = 0; i < history_.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = history_[i];
  const auto model = fit_kmeans(x, static_cast<int>(fov_scales_.size()), seed_, 100, 0.0);
  centers_.resize(fov_scales_.size());
  for (std::size_t c = 0; c < centers_.size(); ++c) centers_[c] = model.centers(static_cast<Eigen::Index>(c), 0);
  std::sort(centers_.begin(), centers_.end());
  fitted_at_ = history_.size();
}

int AdaptiveFovSelector::lookup(double variance) const {
  if (centers_.empty()) return fov_scales_.front();
  std::size_t best = 0;
  for (std::size_t c = 1; c < centers_.size(); ++c) {
    if (std::abs(variance - centers_[c]) < std::abs(variance - centers_[best])) best = c;
  }
  return fov_scales_[best];
}

int AdaptiveFovSelector::select(double variance) {
  if (!(variance >= 0.0)) throw std::invalid_argument("variance must be >= 0");
  history_.push_back(variance);
  if (history_.size() < warmup_min_) return fov_scales_.front();
  if (centers_.empty() || history_.size() - fitted_at_ >= refit_interval_) refit();
  return lookup(variance);
}

int select_fov(AdaptiveFovSelector& selector, double presample_variance) {
  return selector.select(presample_variance);
}

void save_snapshot_set(const std::string& path, const SnapshotSetHeader& header,
                       std::span<const MultiFovSnapshot> snapshots) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "K " << header.K << "\nfov_scales";
  for (int s : header.fov_scales) out << ' ' << s;
  out << "\nseed " << header.seed << '\n';
  for (const auto& m : snapshots) {
    for (const auto& v : m.views) {
      out << v.anchor << ' ' << v.fov_scale;
      for (PointIndex i : v.downsampled) out << ' ' << i;
      out << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::pair<SnapshotSetHeader, std::vector<MultiFovSnapshot>> load_snapshot_set(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  SnapshotSetHeader header;
  std::string line;
  std::string key;

  auto header_line = [&](const char* expected, std::size_t line_no) {
    if (!std::getline(in, line)) throw ParseError("truncated snapshot header", line_no);
    std::istringstream ss(line);
    ss >> key;
    if (key != expected) throw ParseError(std::string("expected '") + expected + "'", line_no);
    return ss;
  };
  {
    auto ss = header_line("K", 1);
    if (!(ss >> header.K)) throw ParseError("bad K", 1);
  }
  {
    auto ss = header_line("fov_scales", 2);
    int s = 0;
    while (ss >> s) header.fov_scales.push_back(s);
    validate_fov_scales(header.fov_scales);
  }
  {
    auto ss = header_line("seed", 3);
    if (!(ss >> header.seed)) throw ParseError("bad seed", 3);
  }

  std::vector<MultiFovSnapshot> out;
  std::size_t line_no = 3;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    Snapshot v;
    if (!(ss >> v.anchor >> v.fov_scale)) throw ParseError("bad snapshot record", line_no);
    PointIndex idx = 0;
    while (ss >> idx) v.downsampled.push_back(idx);
    if (v.downsampled.size() != header.K) {
      throw ParseError("snapshot record has " + std::to_string(v.downsampled.size()) +
                           " indices, expected " + std::to_string(header.K),
                       line_no);
    }
    const bool continues = !out.empty() && out.back().anchor == v.anchor &&
                           out.back().views.back().fov_scale < v.fov_scale;
    if (!continues) {
      out.emplace_back();
      out.back().anchor = v.anchor;
    }
    out.back().views.push_back(std::move(v));
  }
  return {header, out};
}

}  // namespace snapseg
