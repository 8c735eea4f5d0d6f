// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNAPSEG_SYNTH_SCENE_HPP
#define SNAPSEG_SYNTH_SCENE_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "snapseg/kvfile.hpp"
#include "snapseg/scene_io.hpp"

namespace snapseg {

/// Class ids of generated scenes (same order as the six-class remap).
enum SynthClass : int {
  kTerrain = 0,
  kVegetation = 1,
  kBuilding = 2,
  kHardscape = 3,
  kArtefact = 4,
  kCar = 5,
};
inline constexpr int kSynthClasses = 6;

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

/// Scene recipe. Horizontal extent is [0, extent]^2 with z up; densities are
/// points per square metre of sampled surface.
struct SceneSpec {
  std::uint64_t seed = 0;
  double extent = 100.0;
  double jitter_sigma = 0.02;

  double terrain_density = 9.0;  // 0 disables the ground plane

  int n_buildings = 6;
  Range building_footprint{12.0, 20.0};
  Range building_height{8.0, 14.0};
  double building_density = 8.0;

  int n_trees = 30;
  Range tree_radius{2.0, 3.5};
  Range trunk_height{1.5, 3.0};
  double tree_density = 14.0;

  int n_walls = 12;
  Range wall_length{6.0, 14.0};
  Range wall_height{1.2, 2.0};
  double wall_thickness = 0.3;
  double wall_density = 40.0;

  int n_cars = 10;
  Eigen::Vector3d car_size{4.5, 1.8, 1.5};
  double car_density = 45.0;

  int n_scatter = 6;
  int scatter_points = 700;
  double scatter_radius = 1.5;
  Range scatter_height{0.5, 3.0};

  /// Keeps a point with probability 1 / (1 + (d / falloff_d0)^2), d being the
  /// horizontal distance to the scanner. 0 disables thinning.
  double falloff_d0 = 0.0;
  Eigen::Vector2d scanner{50.0, 50.0};

  /// Minimum horizontal gap between placed objects.
  double clearance = 1.0;

  void validate() const;
  KeyValues to_kv() const;
  static SceneSpec from_kv(const KeyValues& kv);
};

/// Fixed six-class benchmark, about 190k points, dominated by terrain and
/// buildings with rare cars and scatter.
SceneSpec default_benchmark_spec();

enum class PrimitiveKind { kGround, kBox, kTree, kBlob };

/// A placed object. Boxes stand on the ground: `center` is the footprint
/// centre at z = 0, `size` is (length, width, height), `yaw` rotates about z.
/// Trees use size = (crown radius, trunk height, -); blobs use
/// size = (radius, -, -) with `center` the ball centre.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  int class_id = kTerrain;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Zero();
  double yaw = 0.0;
};

/// Deterministic placement of every object in the spec. Objects that cannot
/// be placed without overlap after many tries are dropped.
std::vector<Primitive> plan_layout(const SceneSpec& spec);

/// Surface samples of every primitive with Gaussian jitter, labeled by the
/// generating primitive.
PointCloud generate(const SceneSpec& spec);

/// Expected per-class counts of generate() without falloff: surface area
/// times density per object, terrain minus object footprints.
std::array<double, kSynthClasses> expected_class_counts(const SceneSpec& spec);

std::vector<std::string> synth_class_names();

SceneSpec load_scene_spec(const std::string& path);
void save_scene_spec(const SceneSpec& spec, const std::string& path);

}  // namespace snapseg

#endif  // SNAPSEG_SYNTH_SCENE_HPP
