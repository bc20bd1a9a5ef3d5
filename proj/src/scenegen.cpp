#include "racklay/scenegen.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace racklay {

namespace {

constexpr std::uint64_t kCameraStream = 1000;
constexpr std::uint64_t kClutterStream = 2000;

[[noreturn]] void reject(const std::string& what) {
  throw std::invalid_argument("invalid scene config: " + what);
}

double full_extent_x(const BoxSpec& spec, double yaw_rad) {
  return spec.width_m * std::abs(std::cos(yaw_rad)) + spec.depth_m * std::abs(std::sin(yaw_rad));
}

double full_extent_z(const BoxSpec& spec, double yaw_rad) {
  return spec.width_m * std::abs(std::sin(yaw_rad)) + spec.depth_m * std::abs(std::cos(yaw_rad));
}

struct Candidate {
  BoxSpec spec;
  double yaw_deg;
  double extent_x;
  double extent_z;
};

std::vector<ClutterObject> make_clutter(const SceneConfig& cfg, SplitMix64& rng) {
  std::vector<ClutterObject> out;
  const double width = rng.uniform(1.5, 3.0);
  const double depth = cfg.shelf_depth_m;
  const double lateral = rng.uniform(-1.5, 1.5);
  const double front_z = cfg.shelf_depth_m / 2.0 + cfg.camera.distance_min_m -
                         cfg.clutter_min_distance_m - rng.uniform(0.0, 1.0);
  const double center_z = front_z - depth / 2.0;
  const int levels = 4;
  const double t = cfg.shelf_thickness_m;
  for (int i = 0; i < levels; ++i) {
    const double top = cfg.bottom_shelf_height_m + i * cfg.inter_shelf_height_m;
    out.push_back({Cuboid{{lateral, top - t / 2.0, center_z}, {width / 2.0, t / 2.0, depth / 2.0}, 0.0},
                   100});
    SceneConfig sub = cfg;
    sub.randomize_occupancy = true;
    sub.density = 1.0;
    const auto stacks = place_stacks(width, depth, cfg.inter_shelf_height_m - t, sub, rng);
    for (const Stack& s : stacks) {
      const double h = s.height_m();
      out.push_back({Cuboid{{lateral + s.center_x_m, top + h / 2.0, center_z + s.center_z_m},
                            {s.spec.width_m / 2.0, h / 2.0, s.spec.depth_m / 2.0},
                            deg_to_rad(s.yaw_deg)},
                     s.spec.color_id});
    }
  }
  return out;
}

}  // namespace

std::vector<BoxSpec> default_box_catalog() {
  return {
      {0.500, 0.500, 0.375, 0}, {0.500, 0.625, 0.500, 1}, {0.625, 0.500, 0.375, 2}, {0.625, 0.625, 0.500, 3},
      {0.750, 0.500, 0.375, 4}, {0.750, 0.625, 0.375, 5}, {0.875, 0.750, 0.500, 6}, {0.500, 0.750, 0.500, 7},
  };
}

RotatedRect Stack::footprint() const {
  return {center_x_m, center_z_m, spec.width_m / 2.0, spec.depth_m / 2.0, deg_to_rad(yaw_deg)};
}

double SceneDescription::slab_height_m(int shelf) const {
  if (shelf + 1 >= static_cast<int>(shelves.size())) return config.inter_shelf_height_m;
  return config.inter_shelf_height_m - config.shelf_thickness_m;
}

void validate(const SceneConfig& cfg) {
  if (cfg.max_shelves < 1) reject("max_shelves must be >= 1");
  if (cfg.num_shelves < 1 || cfg.num_shelves > cfg.max_shelves) {
    reject("num_shelves must lie in [1, max_shelves]");
  }
  if (!(cfg.shelf_width_m > 0.0) || !(cfg.shelf_depth_m > 0.0) || !(cfg.inter_shelf_height_m > 0.0) ||
      !(cfg.shelf_thickness_m > 0.0)) {
    reject("shelf dimensions must be positive");
  }
  if (cfg.shelf_thickness_m >= cfg.inter_shelf_height_m) {
    reject("shelf thickness must be smaller than the inter-shelf height");
  }
  if (!(cfg.bottom_shelf_height_m > 0.0)) reject("bottom_shelf_height_m must be positive");
  if (!(cfg.density >= 0.0 && cfg.density <= 1.0)) reject("density must lie in [0, 1]");
  if (cfg.max_stack_layers < 1) reject("max_stack_layers must be >= 1");
  if (!(cfg.min_gap_m >= 0.0)) reject("min_gap_m must be >= 0");
  if (!(cfg.rot_amplitude_deg >= 0.0 && cfg.rot_amplitude_deg < 45.0)) {
    reject("rot_amplitude_deg must lie in [0, 45)");
  }
  if (!(cfg.depth_jitter_m >= 0.0)) reject("depth_jitter_m must be >= 0");
  if (cfg.max_placement_attempts < 1) reject("max_placement_attempts must be >= 1");
  if (cfg.box_catalog.empty()) reject("box_catalog is empty");
  const double slab = cfg.inter_shelf_height_m - cfg.shelf_thickness_m;
  for (std::size_t i = 0; i < cfg.box_catalog.size(); ++i) {
    const BoxSpec& b = cfg.box_catalog[i];
    std::ostringstream tag;
    tag << "box_catalog[" << i << "] (" << b.width_m << " x " << b.depth_m << " x " << b.height_m
        << " m)";
    if (!(b.width_m > 0.0) || !(b.depth_m > 0.0) || !(b.height_m > 0.0)) {
      reject(tag.str() + " has a non-positive dimension");
    }
    if (b.width_m >= cfg.shelf_width_m || b.depth_m >= cfg.shelf_depth_m || b.height_m >= slab) {
      reject(tag.str() + " does not fit on a " + std::to_string(cfg.shelf_width_m) + " x " +
             std::to_string(cfg.shelf_depth_m) + " m shelf with " + std::to_string(slab) +
             " m clearance");
    }
  }
  const CameraRanges& c = cfg.camera;
  if (!(c.fx > 0.0) || !(c.fy > 0.0) || c.image_width < 1 || c.image_height < 1) {
    reject("camera intrinsics must be positive");
  }
  if (!(c.distance_min_m > 0.0) || c.distance_max_m < c.distance_min_m) {
    reject("camera distance range is empty or non-positive");
  }
  if (c.height_frac_max < c.height_frac_min || c.lateral_max_m < c.lateral_min_m) {
    reject("camera height/lateral range is empty");
  }
}

std::vector<Stack> place_stacks(double shelf_width_m, double shelf_depth_m,
                                double max_stack_height_m, const SceneConfig& params,
                                SplitMix64& rng, double* target_occupancy) {
  const double u = params.randomize_occupancy ? rng.uniform() : 1.0;
  const double target = u * params.density;
  if (target_occupancy != nullptr) *target_occupancy = target;
  const double target_width = target * shelf_width_m;
  const double r = params.rot_amplitude_deg;
  const double gap = params.min_gap_m;

  std::vector<Candidate> chosen;
  double used = 0.0;
  int rejections = 0;
  while (rejections < params.max_placement_attempts) {
    const auto pick = rng.uniform_int(0, static_cast<std::int64_t>(params.box_catalog.size()) - 1);
    const BoxSpec& spec = params.box_catalog[static_cast<std::size_t>(pick)];
    const double yaw_deg = r > 0.0 ? rng.uniform(-r, r) : 0.0;
    const double yaw = deg_to_rad(yaw_deg);
    const Candidate c{spec, yaw_deg, full_extent_x(spec, yaw), full_extent_z(spec, yaw)};
    // Round to the nearest stack: stop once the next stack would overshoot
    // the target by more than half its width.
    if (used + c.extent_x / 2.0 >= target_width) break;
    const double with_gaps = used + c.extent_x + gap * static_cast<double>(chosen.size());
    if (c.extent_z > shelf_depth_m || with_gaps > shelf_width_m || spec.height_m > max_stack_height_m) {
      ++rejections;
      continue;
    }
    chosen.push_back(c);
    used += c.extent_x;
  }

  std::vector<Stack> stacks;
  if (chosen.empty()) return stacks;

  // Spread the remaining width over the n + 1 slots (flat Dirichlet).
  const std::size_t n = chosen.size();
  const double free_width =
      std::max(0.0, shelf_width_m - used - gap * static_cast<double>(n - 1));
  std::vector<double> cuts(n);
  for (double& v : cuts) v = rng.uniform() * free_width;
  std::sort(cuts.begin(), cuts.end());
  std::vector<double> slack(n + 1);
  double prev = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    slack[i] = cuts[i] - prev;
    prev = cuts[i];
  }
  slack[n] = free_width - prev;

  double cursor = -shelf_width_m / 2.0 + slack[0];
  for (std::size_t i = 0; i < n; ++i) {
    const Candidate& c = chosen[i];
    Stack s;
    s.spec = c.spec;
    s.yaw_deg = c.yaw_deg;
    s.center_x_m = cursor + c.extent_x / 2.0;
    const double back_room = std::min(params.depth_jitter_m, shelf_depth_m - c.extent_z);
    s.center_z_m = shelf_depth_m / 2.0 - c.extent_z / 2.0 - rng.uniform() * back_room;
    const int fit = static_cast<int>(std::floor(max_stack_height_m / c.spec.height_m + 1e-12));
    const int layer_cap = std::max(1, std::min(params.max_stack_layers, fit));
    s.layers = static_cast<int>(rng.uniform_int(1, layer_cap));
    stacks.push_back(s);
    cursor += c.extent_x + gap + slack[i + 1];
  }
  return stacks;
}

SceneDescription generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  SceneDescription scene;
  scene.config = cfg;
  scene.rack_pose = RackPose{};
  scene.shelves.resize(static_cast<std::size_t>(cfg.num_shelves));
  for (int i = 0; i < cfg.num_shelves; ++i) {
    Shelf& shelf = scene.shelves[static_cast<std::size_t>(i)];
    shelf.height_above_ground_m = cfg.bottom_shelf_height_m + i * cfg.inter_shelf_height_m;
  }
  for (int i = 0; i < cfg.num_shelves; ++i) {
    Shelf& shelf = scene.shelves[static_cast<std::size_t>(i)];
    SplitMix64 rng = substream(seed, static_cast<std::uint64_t>(i) + 1);
    shelf.stacks = place_stacks(cfg.shelf_width_m, cfg.shelf_depth_m, scene.slab_height_m(i), cfg, rng,
                                &shelf.target_occupancy);
  }
  if (cfg.background_clutter) {
    SplitMix64 rng = substream(seed, kClutterStream);
    scene.clutter = make_clutter(cfg, rng);
  }
  return scene;
}

CameraModel sample_camera(const SceneConfig& cfg, SplitMix64& rng) {
  const CameraRanges& r = cfg.camera;
  CameraModel cam;
  cam.fx = r.fx;
  cam.fy = r.fy;
  cam.image_width = r.image_width;
  cam.image_height = r.image_height;
  cam.cx = r.image_width / 2.0;
  cam.cy = r.image_height / 2.0;
  cam.yaw_deg = 0.0;
  const double distance = rng.uniform(r.distance_min_m, r.distance_max_m);
  const double bottom = cfg.bottom_shelf_height_m;
  const double top = bottom + (cfg.num_shelves - 1) * cfg.inter_shelf_height_m;
  const double lo = bottom - r.margin_below_m;
  const double hi = top + r.margin_above_m;
  const double frac = rng.uniform(r.height_frac_min, r.height_frac_max);
  const double lateral = rng.uniform(r.lateral_min_m, r.lateral_max_m);
  cam.position = {lateral, std::max(0.05, lo + frac * (hi - lo)), cfg.shelf_depth_m / 2.0 + distance};
  return cam;
}

double occupancy_fraction(const Shelf& shelf, double shelf_width_m) {
  double covered = 0.0;
  for (const Stack& s : shelf.stacks) covered += 2.0 * s.footprint().extent_x();
  return covered / shelf_width_m;
}

SceneConfig sample_scene_config(const SceneConfig& base, const SceneVariation& v, SplitMix64& rng) {
  SceneConfig cfg = base;
  cfg.num_shelves = static_cast<int>(rng.uniform_int(v.num_shelves_min, v.num_shelves_max));
  cfg.num_shelves = std::clamp(cfg.num_shelves, 1, cfg.max_shelves);
  cfg.shelf_width_m = rng.uniform(v.shelf_width_min_m, v.shelf_width_max_m);
  cfg.inter_shelf_height_m = rng.uniform(v.inter_shelf_height_min_m, v.inter_shelf_height_max_m);
  cfg.max_stack_layers = static_cast<int>(rng.uniform_int(v.max_stack_layers_min, v.max_stack_layers_max));
  cfg.background_clutter = rng.uniform() < v.clutter_probability;
  return cfg;
}

Vec3 rack_to_world(const RackPose& pose, const Vec3& p) {
  const double yaw = deg_to_rad(pose.yaw_deg);
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {pose.position.x + c * p.x + s * p.z, pose.position.y + p.y, pose.position.z - s * p.x + c * p.z};
}

}  // namespace racklay
