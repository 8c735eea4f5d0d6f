// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_EVALUATION_HPP
#define SNAPSEG_EVALUATION_HPP

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace snapseg {

/// Rows are ground truth, columns predictions.
struct ConfusionMatrix {
  int n_classes = 0;
  std::vector<std::uint64_t> counts;  // row-major

  std::uint64_t at(int truth, int pred) const {
    return counts[static_cast<std::size_t>(truth) * static_cast<std::size_t>(n_classes) +
                  static_cast<std::size_t>(pred)];
  }
  std::uint64_t total() const;
};

/// Entries whose truth is kUnlabeled are skipped.
ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int n_classes);

struct Metrics {
  double oa = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  /// Class appears in the truth or the predictions.
  std::vector<bool> present;
  /// Class appears in the truth; these are the classes averaged.
  std::vector<bool> in_truth;
  double average_f = 0.0;
  std::uint64_t total = 0;
};

Metrics metrics(const ConfusionMatrix& cm);

struct SweepRow {
  double fraction = 0.0;
  std::size_t n_seeds = 0;
  double mean_oa = 0.0;
  double std_oa = 0.0;
  double mean_average_f = 0.0;
  std::vector<double> mean_f1;  // per class, over seeds where it was present
};

/// Calls `run(fraction, seed)` for every combination and aggregates per
/// fraction. Feature extraction is the caller's business, so it can be
/// reused across calls.
std::vector<SweepRow> label_fraction_sweep(const std::function<Metrics(double, std::uint64_t)>& run,
                                           std::span<const double> fractions,
                                           std::span<const std::uint64_t> seeds);

// Reports. CSVs start with a "# snapseg-<kind> v1" line.

void write_metrics_csv(const Metrics& m, std::span<const std::string> class_names, const std::string& path);
std::string format_metrics_table(const Metrics& m, std::span<const std::string> class_names);
void write_confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names,
                         const std::string& path);
void write_sweep_csv(std::span<const SweepRow> rows, std::span<const std::string> class_names,
                     const std::string& path);
std::string format_sweep_table(std::span<const SweepRow> rows, std::span<const std::string> class_names);

}  // namespace snapseg

#endif  // SNAPSEG_EVALUATION_HPP
