// SPDX-FileCopyrightText: 2026 The snapseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "snapseg/synth_scene.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "snapseg/common.hpp"

namespace snapseg {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTrunkRadius = 0.15;
constexpr double kCrownLift = 0.8;  // crown centre sits this many radii above the trunk top
constexpr int kPlacementTries = 500;

constexpr std::uint64_t kLayoutSalt = 0x1a70;
constexpr std::uint64_t kGroundSalt = 0x6a0d;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
double uniform(Rng& rng, const Range& r) { return r.lo == r.hi ? r.lo : uniform(rng, r.lo, r.hi); }

Eigen::Vector3d unit_vector(Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  for (;;) {
    Eigen::Vector3d v(g(rng), g(rng), g(rng));
    const double n = v.norm();
    if (n > 1e-12) return v / n;
  }
}

double footprint_radius(const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::kBox:
      return 0.5 * std::hypot(p.size.x(), p.size.y());
    case PrimitiveKind::kTree:
    case PrimitiveKind::kBlob:
      return p.size.x();
    case PrimitiveKind::kGround:
      break;
  }
  return 0.0;
}

bool inside_footprint(const Primitive& box, double x, double y) {
  const double dx = x - box.center.x();
  const double dy = y - box.center.y();
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * box.size.x() && std::abs(v) <= 0.5 * box.size.y();
}

double box_area(const Eigen::Vector3d& size) {
  const double l = size.x(), w = size.y(), h = size.z();
  return l * w + 2.0 * l * h + 2.0 * w * h;
}

double tree_area(const Primitive& p) {
  const double r = p.size.x();
  return 4.0 * kPi * r * r + 2.0 * kPi * kTrunkRadius * p.size.y();
}

std::size_t surface_count(double area, double density) {
  return static_cast<std::size_t>(std::llround(area * density));
}

double density_of(const SceneSpec& spec, const Primitive& p) {
  switch (p.class_id) {
    case kBuilding:
      return spec.building_density;
    case kHardscape:
      return spec.wall_density;
    case kCar:
      return spec.car_density;
    case kVegetation:
      return spec.tree_density;
    default:
      return spec.terrain_density;
  }
}

/// Open box: top and four sides, local frame centred on the footprint.
Eigen::Vector3d sample_box(const Eigen::Vector3d& size, Rng& rng) {
  const double l = size.x(), w = size.y(), h = size.z();
  const double faces[3] = {l * w, 2.0 * l * h, 2.0 * w * h};
  const double pick = uniform(rng, 0.0, faces[0] + faces[1] + faces[2]);
  const double a = uniform(rng, 0.0, 1.0);
  const double b = uniform(rng, 0.0, 1.0);
  const double side = uniform(rng, 0.0, 1.0) < 0.5 ? -0.5 : 0.5;
  if (pick < faces[0]) return {(a - 0.5) * l, (b - 0.5) * w, h};
  if (pick < faces[0] + faces[1]) return {(a - 0.5) * l, side * w, b * h};
  return {side * l, (a - 0.5) * w, b * h};
}

void emit(PointCloud& cloud, const SceneSpec& spec, const Eigen::Vector3d& p, int label, Rng& rng) {
  if (spec.falloff_d0 > 0.0) {
    const double d = (p.head<2>() - spec.scanner).norm() / spec.falloff_d0;
    if (uniform(rng, 0.0, 1.0) >= 1.0 / (1.0 + d * d)) return;
  }
  Eigen::Vector3d q = p;
  if (spec.jitter_sigma > 0.0) {
    std::normal_distribution<double> g(0.0, spec.jitter_sigma);
    q += Eigen::Vector3d(g(rng), g(rng), g(rng));
  }
  cloud.positions.push_back(q);
  cloud.labels.push_back(label);
}

void check_range(const Range& r, const char* name, std::vector<std::string>& errors) {
  if (!(r.lo > 0.0) || !(r.hi >= r.lo)) errors.push_back(std::string(name) + ": need 0 < min <= max");
}

}  // namespace

void SceneSpec::validate() const {
  std::vector<std::string> errors;
  if (!(extent > 0.0)) errors.push_back("extent must be > 0");
  if (!(jitter_sigma >= 0.0)) errors.push_back("jitter_sigma must be >= 0");
  if (!(terrain_density >= 0.0)) errors.push_back("terrain_density must be >= 0");
  if (n_buildings < 0 || n_trees < 0 || n_walls < 0 || n_cars < 0 || n_scatter < 0) {
    errors.push_back("object counts must be >= 0");
  }
  if (n_buildings > 0) {
    check_range(building_footprint, "building_footprint", errors);
    check_range(building_height, "building_height", errors);
    if (!(building_density > 0.0)) errors.push_back("building_density must be > 0");
  }
  if (n_trees > 0) {
    check_range(tree_radius, "tree_radius", errors);
    check_range(trunk_height, "trunk_height", errors);
    if (!(tree_density > 0.0)) errors.push_back("tree_density must be > 0");
  }
  if (n_walls > 0) {
    check_range(wall_length, "wall_length", errors);
    check_range(wall_height, "wall_height", errors);
    if (!(wall_thickness > 0.0)) errors.push_back("wall_thickness must be > 0");
    if (!(wall_density > 0.0)) errors.push_back("wall_density must be > 0");
  }
  if (n_cars > 0) {
    if (!(car_size.minCoeff() > 0.0)) errors.push_back("car size must be > 0");
    if (!(car_density > 0.0)) errors.push_back("car_density must be > 0");
  }
  if (n_scatter > 0) {
    if (scatter_points < 1) errors.push_back("scatter_points must be >= 1");
    if (!(scatter_radius > 0.0)) errors.push_back("scatter_radius must be > 0");
    check_range(scatter_height, "scatter_height", errors);
  }
  if (!(falloff_d0 >= 0.0)) errors.push_back("falloff_d0 must be >= 0");
  if (!(clearance >= 0.0)) errors.push_back("clearance must be >= 0");
  if (terrain_density == 0.0 && n_buildings + n_trees + n_walls + n_cars + n_scatter == 0) {
    errors.push_back("scene has no primitives");
  }
  if (!errors.empty()) {
    std::string msg = "invalid scene spec:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
  }
}

KeyValues SceneSpec::to_kv() const {
  KeyValues kv;
  auto d = [&kv](const std::string& k, double v) { kv.set(k, format_double(v)); };
  auto i = [&kv](const std::string& k, long long v) { kv.set(k, std::to_string(v)); };
  auto r = [&d](const std::string& k, const Range& v) {
    d(k + "_min", v.lo);
    d(k + "_max", v.hi);
  };
  kv.set("seed", std::to_string(seed));
  d("extent", extent);
  d("jitter_sigma", jitter_sigma);
  d("terrain_density", terrain_density);
  i("n_buildings", n_buildings);
  r("building_footprint", building_footprint);
  r("building_height", building_height);
  d("building_density", building_density);
  i("n_trees", n_trees);
  r("tree_radius", tree_radius);
  r("trunk_height", trunk_height);
  d("tree_density", tree_density);
  i("n_walls", n_walls);
  r("wall_length", wall_length);
  r("wall_height", wall_height);
  d("wall_thickness", wall_thickness);
  d("wall_density", wall_density);
  i("n_cars", n_cars);
  d("car_length", car_size.x());
  d("car_width", car_size.y());
  d("car_height", car_size.z());
  d("car_density", car_density);
  i("n_scatter", n_scatter);
  i("scatter_points", scatter_points);
  d("scatter_radius", scatter_radius);
  r("scatter_height", scatter_height);
  d("falloff_d0", falloff_d0);
  d("scanner_x", scanner.x());
  d("scanner_y", scanner.y());
  d("clearance", clearance);
  return kv;
}

SceneSpec SceneSpec::from_kv(const KeyValues& kv) {
  const SceneSpec base;
  const std::set<std::string> known = [&base] {
    std::set<std::string> keys;
    const KeyValues defaults = base.to_kv();
    for (const auto& [k, v] : defaults.entries()) keys.insert(k);
    return keys;
  }();
  for (const auto& [k, v] : kv.entries()) {
    if (!known.count(k)) throw std::invalid_argument("scene spec: unknown key '" + k + "'");
  }
  SceneSpec s;
  auto d = [&kv](const std::string& k, double fallback) { return kv.get_double(k, fallback); };
  auto i = [&kv](const std::string& k, int fallback) { return static_cast<int>(kv.get_int(k, fallback)); };
  auto r = [&d](const std::string& k, const Range& fallback) {
    return Range{d(k + "_min", fallback.lo), d(k + "_max", fallback.hi)};
  };
  s.seed = kv.get_uint64("seed", base.seed);
  s.extent = d("extent", base.extent);
  s.jitter_sigma = d("jitter_sigma", base.jitter_sigma);
  s.terrain_density = d("terrain_density", base.terrain_density);
  s.n_buildings = i("n_buildings", base.n_buildings);
  s.building_footprint = r("building_footprint", base.building_footprint);
  s.building_height = r("building_height", base.building_height);
  s.building_density = d("building_density", base.building_density);
  s.n_trees = i("n_trees", base.n_trees);
  s.tree_radius = r("tree_radius", base.tree_radius);
  s.trunk_height = r("trunk_height", base.trunk_height);
  s.tree_density = d("tree_density", base.tree_density);
  s.n_walls = i("n_walls", base.n_walls);
  s.wall_length = r("wall_length", base.wall_length);
  s.wall_height = r("wall_height", base.wall_height);
  s.wall_thickness = d("wall_thickness", base.wall_thickness);
  s.wall_density = d("wall_density", base.wall_density);
  s.n_cars = i("n_cars", base.n_cars);
  s.car_size = {d("car_length", base.car_size.x()), d("car_width", base.car_size.y()),
                d("car_height", base.car_size.z())};
  s.car_density = d("car_density", base.car_density);
  s.n_scatter = i("n_scatter", base.n_scatter);
  s.scatter_points = i("scatter_points", base.scatter_points);
  s.scatter_radius = d("scatter_radius", base.scatter_radius);
  s.scatter_height = r("scatter_height", base.scatter_height);
  s.falloff_d0 = d("falloff_d0", base.falloff_d0);
  s.scanner = {d("scanner_x", base.scanner.x()), d("scanner_y", base.scanner.y())};
  s.clearance = d("clearance", base.clearance);
  s.validate();
  return s;
}

SceneSpec default_benchmark_spec() {
  SceneSpec s;
  s.extent = 135.0;
  s.terrain_density = 4.0;
  s.n_buildings = 4;
  s.building_footprint = {14.0, 20.0};
  s.building_density = 14.0;
  s.n_trees = 8;
  s.tree_density = 40.0;
  s.n_walls = 6;
  s.wall_density = 90.0;
  s.n_cars = 4;
  s.car_density = 110.0;
  s.n_scatter = 3;
  s.scatter_points = 1400;
  s.scanner = {67.5, 67.5};
  return s;
}

std::vector<std::string> synth_class_names() {
  return {"terrain", "vegetation", "building", "hardscape", "artefacts", "cars"};
}

std::vector<Primitive> plan_layout(const SceneSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, kLayoutSalt));
  std::vector<Primitive> placed;

  auto place = [&](Primitive p) {
    const double r = footprint_radius(p);
    const double lo = r;
    const double hi = spec.extent - r;
    if (hi < lo) return;
    for (int attempt = 0; attempt < kPlacementTries; ++attempt) {
      const double x = uniform(rng, lo, hi);
      const double y = uniform(rng, lo, hi);
      bool free = true;
      for (const auto& q : placed) {
        const double gap = std::hypot(x - q.center.x(), y - q.center.y()) - r - footprint_radius(q);
        if (gap < spec.clearance) {
          free = false;
          break;
        }
      }
      if (free) {
        p.center.x() = x;
        p.center.y() = y;
        placed.push_back(p);
        return;
      }
    }
  };

  for (int i = 0; i < spec.n_buildings; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kBox;
    p.class_id = kBuilding;
    p.size = {uniform(rng, spec.building_footprint), uniform(rng, spec.building_footprint),
              uniform(rng, spec.building_height)};
    p.yaw = uniform(rng, 0.0, kPi);
    place(p);
  }
  for (int i = 0; i < spec.n_walls; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kBox;
    p.class_id = kHardscape;
    p.size = {uniform(rng, spec.wall_length), spec.wall_thickness, uniform(rng, spec.wall_height)};
    p.yaw = uniform(rng, 0.0, kPi);
    place(p);
  }
  for (int i = 0; i < spec.n_cars; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kBox;
    p.class_id = kCar;
    p.size = spec.car_size;
    p.yaw = uniform(rng, 0.0, kPi);
    place(p);
  }
  for (int i = 0; i < spec.n_trees; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kTree;
    p.class_id = kVegetation;
    p.size = {uniform(rng, spec.tree_radius), uniform(rng, spec.trunk_height), 0.0};
    place(p);
  }
  for (int i = 0; i < spec.n_scatter; ++i) {
    Primitive p;
    p.kind = PrimitiveKind::kBlob;
    p.class_id = kArtefact;
    p.size = {spec.scatter_radius, 0.0, 0.0};
    p.center.z() = uniform(rng, spec.scatter_height);
    place(p);
  }
  return placed;
}

PointCloud generate(const SceneSpec& spec) {
  const std::vector<Primitive> layout = plan_layout(spec);
  PointCloud cloud;
  cloud.n_classes = kSynthClasses;
  cloud.class_names = synth_class_names();

  if (spec.terrain_density > 0.0) {
    Rng rng(derive_seed(spec.seed, kGroundSalt));
    const std::size_t n = surface_count(spec.extent * spec.extent, spec.terrain_density);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = uniform(rng, 0.0, spec.extent);
      const double y = uniform(rng, 0.0, spec.extent);
      bool covered = false;
      for (const auto& p : layout) {
        if (p.kind == PrimitiveKind::kBox && inside_footprint(p, x, y)) {
          covered = true;
          break;
        }
      }
      if (!covered) emit(cloud, spec, {x, y, 0.0}, kTerrain, rng);
    }
  }

  for (std::size_t k = 0; k < layout.size(); ++k) {
    const Primitive& p = layout[k];
    Rng rng(derive_seed(spec.seed, 1000 + k));
    switch (p.kind) {
      case PrimitiveKind::kBox: {
        const std::size_t n = surface_count(box_area(p.size), density_of(spec, p));
        const double c = std::cos(p.yaw);
        const double s = std::sin(p.yaw);
        for (std::size_t i = 0; i < n; ++i) {
          const Eigen::Vector3d q = sample_box(p.size, rng);
          const Eigen::Vector3d w(p.center.x() + c * q.x() - s * q.y(), p.center.y() + s * q.x() + c * q.y(), q.z());
          emit(cloud, spec, w, p.class_id, rng);
        }
        break;
      }
      case PrimitiveKind::kTree: {
        const double r = p.size.x();
        const double trunk = p.size.y();
        const double crown = 4.0 * kPi * r * r;
        const double side = 2.0 * kPi * kTrunkRadius * trunk;
        const std::size_t n = surface_count(crown + side, spec.tree_density);
        const Eigen::Vector3d centre(p.center.x(), p.center.y(), trunk + kCrownLift * r);
        for (std::size_t i = 0; i < n; ++i) {
          Eigen::Vector3d w;
          if (uniform(rng, 0.0, crown + side) < crown) {
            w = centre + r * unit_vector(rng);
          } else {
            const double a = uniform(rng, 0.0, 2.0 * kPi);
            w = {p.center.x() + kTrunkRadius * std::cos(a), p.center.y() + kTrunkRadius * std::sin(a),
                 uniform(rng, 0.0, trunk)};
          }
          emit(cloud, spec, w, kVegetation, rng);
        }
        break;
      }
      case PrimitiveKind::kBlob: {
        for (int i = 0; i < spec.scatter_points; ++i) {
          const double rr = p.size.x() * std::cbrt(uniform(rng, 0.0, 1.0));
          emit(cloud, spec, p.center + rr * unit_vector(rng), kArtefact, rng);
        }
        break;
      }
      case PrimitiveKind::kGround:
        break;
    }
  }
  return cloud;
}

std::array<double, kSynthClasses> expected_class_counts(const SceneSpec& spec) {
  const std::vector<Primitive> layout = plan_layout(spec);
  std::array<double, kSynthClasses> out{};
  double ground = spec.extent * spec.extent;
  for (const auto& p : layout) {
    switch (p.kind) {
      case PrimitiveKind::kBox:
        ground -= p.size.x() * p.size.y();
        out[static_cast<std::size_t>(p.class_id)] +=
            static_cast<double>(surface_count(box_area(p.size), density_of(spec, p)));
        break;
      case PrimitiveKind::kTree:
        out[kVegetation] += static_cast<double>(surface_count(tree_area(p), spec.tree_density));
        break;
      case PrimitiveKind::kBlob:
        out[kArtefact] += spec.scatter_points;
        break;
      case PrimitiveKind::kGround:
        break;
    }
  }
  out[kTerrain] = ground * spec.terrain_density;
  return out;
}

SceneSpec load_scene_spec(const std::string& path) { return SceneSpec::from_kv(KeyValues::load(path)); }

void save_scene_spec(const SceneSpec& spec, const std::string& path) { spec.to_kv().save(path); }

}  // namespace snapseg
