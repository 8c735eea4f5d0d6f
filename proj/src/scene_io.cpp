// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/scene_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string_view>

namespace snapseg {
namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool is_blank(std::string_view line) {
  for (char c : line) {
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

double parse_double(std::string_view tok, std::size_t line_no) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected a number, got '" + std::string(tok) + "'", line_no);
  }
  if (!std::isfinite(v)) {
    throw ParseError("non-finite coordinate '" + std::string(tok) + "'", line_no);
  }
  return v;
}

int parse_int(std::string_view tok, std::size_t line_no) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw ParseError("expected an integer, got '" + std::string(tok) + "'", line_no);
  }
  return v;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void PointCloud::validate() const {
  if (positions.empty()) throw StructuralError("point cloud is empty");
  if (!labels.empty() && labels.size() != positions.size()) {
    throw StructuralError("label count " + std::to_string(labels.size()) +
                          " does not match point count " +
                          std::to_string(positions.size()));
  }
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (!positions[i].allFinite()) {
      throw StructuralError("non-finite position at point " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int l = labels[i];
    if (l != kUnlabeled && (l < 0 || l >= n_classes)) {
      throw StructuralError("label " + std::to_string(l) + " at point " +
                            std::to_string(i) + " outside [0, " +
                            std::to_string(n_classes) + ")");
    }
  }
}

SceneFormat parse_scene_format(const std::string& name) {
  if (name == "xyzl") return SceneFormat::kXyzl;
  if (name == "xyz_irgb_labels") return SceneFormat::kXyzIrgbLabels;
  throw std::invalid_argument("unknown scene format '" + name + "'");
}

std::vector<std::string> semantic3d_class_names() {
  return {"man-made terrain", "natural terrain", "high vegetation",
          "low vegetation",   "buildings",       "hard scape",
          "scanning artefacts", "cars"};
}

ClassRemap semantic3d_six_class_remap() {
  return ClassRemap{{0, 0, 1, 1, 2, 3, 4, 5},
                    {"terrain", "vegetation", "building", "hardscape",
                     "artefacts", "cars"}};
}

PointCloud load_scene(const std::string& points_path, const LoadOptions& options) {
  const bool semantic3d = options.format == SceneFormat::kXyzIrgbLabels;
  const std::size_t columns = semantic3d ? 7 : 4;

  PointCloud cloud;
  std::vector<int> inline_labels;
  {
    std::ifstream in = open_input(points_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      auto tok = split_ws(line);
      if (tok.size() != columns) {
        throw ParseError("expected " + std::to_string(columns) + " columns, got " +
                             std::to_string(tok.size()),
                         line_no);
      }
      Eigen::Vector3d p(parse_double(tok[0], line_no), parse_double(tok[1], line_no),
                        parse_double(tok[2], line_no));
      if (semantic3d) {
        // intensity and colour are validated, then dropped
        for (std::size_t c = 3; c < 7; ++c) parse_double(tok[c], line_no);
      } else {
        inline_labels.push_back(parse_int(tok[3], line_no));
      }
      cloud.positions.push_back(p);
    }
  }

  std::vector<int> raw_labels;
  if (options.labels_path) {
    std::ifstream in = open_input(*options.labels_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (is_blank(line)) continue;
      auto tok = split_ws(line);
      if (tok.size() != 1) throw ParseError("expected one label per line", line_no);
      raw_labels.push_back(parse_int(tok[0], line_no));
    }
    if (raw_labels.size() != cloud.positions.size()) {
      throw StructuralError("labels file has " + std::to_string(raw_labels.size()) +
                            " entries but points file has " +
                            std::to_string(cloud.positions.size()));
    }
  } else if (!semantic3d) {
    raw_labels = std::move(inline_labels);
  }

  if (semantic3d) {
    cloud.class_names = semantic3d_class_names();
    cloud.n_classes = 8;
    if (!raw_labels.empty()) {
      cloud.labels.reserve(raw_labels.size());
      for (int l : raw_labels) cloud.labels.push_back(l == 0 ? kUnlabeled : l - 1);
    }
  } else {
    cloud.labels = std::move(raw_labels);
    if (!options.class_names.empty()) {
      cloud.class_names = options.class_names;
    } else {
      int max_label = -1;
      for (int l : cloud.labels) max_label = std::max(max_label, l);
      for (int c = 0; c <= max_label; ++c) cloud.class_names.push_back("class_" + std::to_string(c));
    }
    cloud.n_classes = static_cast<int>(cloud.class_names.size());
  }
  cloud.validate();
  return cloud;
}

PointCloud remap_labels(const PointCloud& cloud, const ClassRemap& remap) {
  if (!cloud.has_labels()) throw StructuralError("cannot remap an unlabeled cloud");
  int image_size = 0;
  for (int target : remap.mapping) image_size = std::max(image_size, target + 1);
  if (!remap.new_names.empty()) image_size = static_cast<int>(remap.new_names.size());

  PointCloud out = cloud;
  for (int& l : out.labels) {
    if (l == kUnlabeled) continue;
    if (l < 0 || l >= static_cast<int>(remap.mapping.size())) {
      throw StructuralError("label " + std::to_string(l) + " is outside the remap domain [0, " +
                            std::to_string(remap.mapping.size()) + ")");
    }
    l = remap.mapping[static_cast<std::size_t>(l)];
  }
  out.n_classes = image_size;
  if (!remap.new_names.empty()) {
    out.class_names = remap.new_names;
  } else {
    out.class_names.clear();
    for (int c = 0; c < image_size; ++c) out.class_names.push_back("class_" + std::to_string(c));
  }
  return out;
}

std::vector<Rgb> default_palette() {
  // terrain, vegetation, building, hardscape, artefacts, cars; then extras
  return {{0, 255, 255}, {0, 200, 0},   {255, 220, 0},   {255, 140, 0},
          {255, 69, 0},  {220, 0, 0},   {128, 0, 255},   {0, 0, 255},
          {255, 0, 255}, {0, 128, 128}, {128, 128, 0},   {64, 64, 255}};
}

void export_colored_ply(const PointCloud& cloud, std::span<const int> labels,
                        std::span<const Rgb> palette, const std::string& path) {
  if (labels.size() != cloud.size()) {
    throw StructuralError("label count does not match point count");
  }
  if (palette.size() < static_cast<std::size_t>(cloud.n_classes)) {
    throw std::invalid_argument("palette has fewer colours than classes");
  }
  std::ofstream out = open_output(path);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\n"
         "end_header\n";
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const int l = labels[i];
    Rgb c = kUnlabeledColor;
    if (l != kUnlabeled) {
      if (l < 0 || static_cast<std::size_t>(l) >= palette.size()) {
        throw std::invalid_argument("label " + std::to_string(l) + " has no palette entry");
      }
      c = palette[static_cast<std::size_t>(l)];
    }
    const auto& p = cloud.positions[i];
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d %d %d\n", p.x(), p.y(), p.z(), c[0], c[1],
                  c[2]);
    out << buf;
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_xyzl(const PointCloud& cloud, const std::string& path) {
  std::ofstream out = open_output(path);
  char buf[160];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.positions[i];
    const int l = cloud.has_labels() ? cloud.labels[i] : kUnlabeled;
    std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %d\n", p.x(), p.y(), p.z(), l);
    out << buf;
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void save_labels(std::span<const int> labels, const std::string& path) {
  std::ofstream out = open_output(path);
  for (int l : labels) out << l << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<int> load_labels(const std::string& path) {
  std::ifstream in = open_input(path);
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto tok = split_ws(line);
    if (tok.size() != 1) throw ParseError("expected one label per line", line_no);
    labels.push_back(parse_int(tok[0], line_no));
  }
  return labels;
}

}  // namespace snapseg
