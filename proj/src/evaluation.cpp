// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "snapseg/common.hpp"

namespace snapseg {
namespace {

std::string name_of(std::span<const std::string> names, int c) {
  if (static_cast<std::size_t>(c) < names.size()) return names[static_cast<std::size_t>(c)];
  return "class_" + std::to_string(c);
}

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ConfusionMatrix confusion(std::span<const int> truth, std::span<const int> pred, int n_classes) {
  if (truth.size() != pred.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(truth.size()) + " truth labels but " +
                                std::to_string(pred.size()) + " predictions");
  }
  if (n_classes < 1) throw std::invalid_argument("confusion: n_classes must be >= 1");
  ConfusionMatrix cm;
  cm.n_classes = n_classes;
  cm.counts.assign(static_cast<std::size_t>(n_classes) * static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == kUnlabeled) continue;
    if (truth[i] < 0 || truth[i] >= n_classes || pred[i] < 0 || pred[i] >= n_classes) {
      throw std::invalid_argument("confusion: label out of range at index " + std::to_string(i));
    }
    ++cm.counts[static_cast<std::size_t>(truth[i]) * static_cast<std::size_t>(n_classes) +
                static_cast<std::size_t>(pred[i])];
  }
  return cm;
}

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  m.total = cm.total();
  if (m.total == 0) throw std::invalid_argument("metrics: empty confusion matrix");
  const int k = cm.n_classes;
  m.precision.assign(static_cast<std::size_t>(k), 0.0);
  m.recall.assign(static_cast<std::size_t>(k), 0.0);
  m.f1.assign(static_cast<std::size_t>(k), 0.0);
  m.present.assign(static_cast<std::size_t>(k), false);
  m.in_truth.assign(static_cast<std::size_t>(k), false);

  std::uint64_t diag = 0;
  double f_sum = 0.0;
  int f_n = 0;
  for (int c = 0; c < k; ++c) {
    std::uint64_t row = 0;
    std::uint64_t col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t tp = cm.at(c, c);
    diag += tp;
    const auto i = static_cast<std::size_t>(c);
    m.in_truth[i] = row > 0;
    m.present[i] = row > 0 || col > 0;
    const double p = col > 0 ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    const double r = row > 0 ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.precision[i] = p;
    m.recall[i] = r;
    m.f1[i] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    if (m.in_truth[i]) {
      f_sum += m.f1[i];
      ++f_n;
    }
  }
  m.oa = static_cast<double>(diag) / static_cast<double>(m.total);
  m.average_f = f_n > 0 ? f_sum / f_n : 0.0;
  return m;
}

std::vector<SweepRow> label_fraction_sweep(const std::function<Metrics(double, std::uint64_t)>& run,
                                           std::span<const double> fractions,
                                           std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("label_fraction_sweep: no seeds");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw std::invalid_argument("label_fraction_sweep: fraction outside (0, 1]");
  }
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    SweepRow row;
    row.fraction = f;
    row.n_seeds = seeds.size();
    std::vector<double> oas;
    std::vector<double> f_sum;
    std::vector<int> f_n;
    for (std::uint64_t s : seeds) {
      const Metrics m = run(f, s);
      oas.push_back(m.oa);
      row.mean_average_f += m.average_f;
      if (f_sum.size() < m.f1.size()) {
        f_sum.resize(m.f1.size(), 0.0);
        f_n.resize(m.f1.size(), 0);
      }
      for (std::size_t c = 0; c < m.f1.size(); ++c) {
        if (!m.present[c]) continue;
        f_sum[c] += m.f1[c];
        ++f_n[c];
      }
    }
    const double n = static_cast<double>(seeds.size());
    row.mean_oa = std::accumulate(oas.begin(), oas.end(), 0.0) / n;
    double var = 0.0;
    for (double v : oas) var += (v - row.mean_oa) * (v - row.mean_oa);
    row.std_oa = std::sqrt(var / n);
    row.mean_average_f /= n;
    row.mean_f1.resize(f_sum.size());
    for (std::size_t c = 0; c < f_sum.size(); ++c) row.mean_f1[c] = f_n[c] ? f_sum[c] / f_n[c] : std::nan("");
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_metrics_csv(const Metrics& m, std::span<const std::string> class_names, const std::string& path) {
  auto out = open_out(path);
  out << "# snapseg-metrics v1\n";
  out << "class,present,precision,recall,f1\n";
  for (std::size_t c = 0; c < m.f1.size(); ++c) {
    out << name_of(class_names, static_cast<int>(c)) << ',' << (m.present[c] ? 1 : 0) << ','
        << fmt(m.precision[c]) << ',' << fmt(m.recall[c]) << ',' << fmt(m.f1[c]) << '\n';
  }
  out << "overall_accuracy,1," << fmt(m.oa) << ',' << fmt(m.oa) << ',' << fmt(m.oa) << '\n';
  out << "average_f,1,,," << fmt(m.average_f) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string format_metrics_table(const Metrics& m, std::span<const std::string> class_names) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-14s %10s %10s %10s\n", "class", "precision", "recall", "F1");
  os << line;
  for (std::size_t c = 0; c < m.f1.size(); ++c) {
    const std::string name = name_of(class_names, static_cast<int>(c));
    if (!m.present[c]) {
      std::snprintf(line, sizeof(line), "%-14s %10s %10s %10s\n", name.c_str(), "-", "-", "-");
    } else {
      std::snprintf(line, sizeof(line), "%-14s %9.1f%% %9.1f%% %9.1f%%\n", name.c_str(),
                    100.0 * m.precision[c], 100.0 * m.recall[c], 100.0 * m.f1[c]);
    }
    os << line;
  }
  std::snprintf(line, sizeof(line), "overall accuracy %.2f%%  average F %.2f%%  (%llu points)\n",
                100.0 * m.oa, 100.0 * m.average_f, static_cast<unsigned long long>(m.total));
  os << line << "average F is taken over classes present in the ground truth\n";
  return os.str();
}

void write_confusion_csv(const ConfusionMatrix& cm, std::span<const std::string> class_names,
                         const std::string& path) {
  auto out = open_out(path);
  out << "# snapseg-confusion v1 rows=truth cols=prediction\n";
  out << "truth";
  for (int c = 0; c < cm.n_classes; ++c) out << ',' << name_of(class_names, c);
  out << '\n';
  for (int r = 0; r < cm.n_classes; ++r) {
    out << name_of(class_names, r);
    for (int c = 0; c < cm.n_classes; ++c) out << ',' << cm.at(r, c);
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_sweep_csv(std::span<const SweepRow> rows, std::span<const std::string> class_names,
                     const std::string& path) {
  auto out = open_out(path);
  out << "# snapseg-sweep v1\n";
  out << "fraction,n_seeds,mean_oa,std_oa,mean_average_f";
  const std::size_t k = rows.empty() ? 0 : rows.front().mean_f1.size();
  for (std::size_t c = 0; c < k; ++c) out << ",f1_" << name_of(class_names, static_cast<int>(c));
  out << '\n';
  for (const auto& r : rows) {
    out << fmt(r.fraction, "%.4f") << ',' << r.n_seeds << ',' << fmt(r.mean_oa) << ',' << fmt(r.std_oa) << ','
        << fmt(r.mean_average_f);
    for (double f : r.mean_f1) out << ',' << (std::isnan(f) ? std::string("") : fmt(f));
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string format_sweep_table(std::span<const SweepRow> rows, std::span<const std::string> class_names) {
  std::ostringstream os;
  char cell[64];
  std::snprintf(cell, sizeof(cell), "%-9s %8s %8s %8s", "labels", "OA", "std", "avg F");
  os << cell;
  const std::size_t k = rows.empty() ? 0 : rows.front().mean_f1.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::snprintf(cell, sizeof(cell), " %11.11s", name_of(class_names, static_cast<int>(c)).c_str());
    os << cell;
  }
  os << '\n';
  for (const auto& r : rows) {
    std::snprintf(cell, sizeof(cell), "%8.1f%% %7.2f%% %7.2f%% %7.2f%%", 100.0 * r.fraction, 100.0 * r.mean_oa,
                  100.0 * r.std_oa, 100.0 * r.mean_average_f);
    os << cell;
    for (double f : r.mean_f1) {
      if (std::isnan(f)) {
        std::snprintf(cell, sizeof(cell), " %11s", "-");
      } else {
        std::snprintf(cell, sizeof(cell), " %10.1f%%", 100.0 * f);
      }
      os << cell;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace snapseg
