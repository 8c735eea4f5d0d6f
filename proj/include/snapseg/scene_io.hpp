// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_SCENE_IO_HPP
#define SNAPSEG_SCENE_IO_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapseg/common.hpp"

namespace snapseg {

/// A scene: point positions plus optional per-point class ids.
///
/// Positions are kept in double precision; large absolute survey coordinates
/// lose enough precision in float to perturb nearest-neighbour ties.
struct PointCloud {
  std::vector<Eigen::Vector3d> positions;
  /// Empty for unlabeled scenes, otherwise one id per point (or kUnlabeled).
  std::vector<int> labels;
  int n_classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return positions.size(); }
  bool has_labels() const { return !labels.empty(); }

  /// Throws StructuralError when an invariant is broken.
  void validate() const;
};

/// Maps every source class id onto a contiguous target id range.
struct ClassRemap {
  std::vector<int> mapping;  // mapping[old] = new
  std::vector<std::string> new_names;
};

enum class SceneFormat {
  /// "x y z intensity r g b" per line, labels in a parallel file where 0 is
  /// unlabeled and 1..8 are the eight Semantic3D classes.
  kXyzIrgbLabels,
  /// "x y z label" per line; label -1 means unlabeled.
  kXyzl,
};

SceneFormat parse_scene_format(const std::string& name);

struct LoadOptions {
  SceneFormat format = SceneFormat::kXyzl;
  std::optional<std::string> labels_path;
  /// Class table for kXyzl; inferred as class_<i> up to the largest id if
  /// empty.
  std::vector<std::string> class_names;
};

PointCloud load_scene(const std::string& points_path,
                      const LoadOptions& options = {});

/// The eight raw Semantic3D classes merged into terrain / vegetation /
/// building / hardscape / artefacts / cars.
ClassRemap semantic3d_six_class_remap();
std::vector<std::string> semantic3d_class_names();

PointCloud remap_labels(const PointCloud& cloud, const ClassRemap& remap);

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kUnlabeledColor{128, 128, 128};

/// Default colours, one per class of the six-class layout.
std::vector<Rgb> default_palette();

/// ASCII PLY 1.0, float xyz + uchar rgb, six decimal places.
void export_colored_ply(const PointCloud& cloud, std::span<const int> labels,
                        std::span<const Rgb> palette, const std::string& path);

/// Writes "x y z label" lines (six decimals), readable by load_scene.
void save_xyzl(const PointCloud& cloud, const std::string& path);

/// One integer per line, aligned with point order.
void save_labels(std::span<const int> labels, const std::string& path);
std::vector<int> load_labels(const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_SCENE_IO_HPP
