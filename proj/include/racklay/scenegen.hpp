#pragma once

#include <cstdint>
#include <vector>

#include "racklay/camera.hpp"
#include "racklay/geometry.hpp"
#include "racklay/rng.hpp"

namespace racklay {

struct BoxSpec {
  double width_m = 0.5;
  double depth_m = 0.5;
  double height_m = 0.3;
  int color_id = 0;

  friend bool operator==(const BoxSpec&, const BoxSpec&) = default;
};

// Six cardboard boxes followed by two crates. Every dimension is a multiple
// of the 12.5 cm layout cell; the smallest side spans 4 cells in plan and
// the shortest box 3 rows in the front view.
std::vector<BoxSpec> default_box_catalog();

// Camera placement ranges. Height is sampled as a fraction along the span
// [bottom shelf - margin_below, top shelf + margin_above].
struct CameraRanges {
  double fx = 110.0;
  double fy = 110.0;
  int image_width = 128;
  int image_height = 128;
  double distance_min_m = 2.6;  // horizontal distance to the rack front face
  double distance_max_m = 3.2;
  double margin_below_m = 1.0;
  double margin_above_m = 1.0;
  double height_frac_min = 0.0;
  double height_frac_max = 1.0;
  double lateral_min_m = 0.0;
  double lateral_max_m = 0.0;

  friend bool operator==(const CameraRanges&, const CameraRanges&) = default;
};

struct SceneConfig {
  int num_shelves = 4;
  int max_shelves = 4;  // R, the channel capacity of the layout tensors
  double shelf_width_m = 2.2;
  double shelf_depth_m = 0.8;
  double inter_shelf_height_m = 0.7;
  double shelf_thickness_m = 0.05;
  double bottom_shelf_height_m = 0.15;  // top surface of shelf 0 above ground
  double density = 1.0;
  bool randomize_occupancy = true;  // target fraction = U[0,1] * density when set
  int max_stack_layers = 3;
  double min_gap_m = 0.25;
  double rot_amplitude_deg = 5.0;
  double depth_jitter_m = 0.1;  // stacks sit at most this far back from the front edge
  int max_placement_attempts = 32;
  std::vector<BoxSpec> box_catalog = default_box_catalog();
  bool background_clutter = false;
  double clutter_min_distance_m = 7.5;  // 1.5 x the default detection range
  CameraRanges camera;

  friend bool operator==(const SceneConfig&, const SceneConfig&) = default;
};

struct Stack {
  BoxSpec spec;
  double center_x_m = 0.0;  // shelf frame: origin at the rack center
  double center_z_m = 0.0;
  double yaw_deg = 0.0;
  int layers = 1;

  double height_m() const { return spec.height_m * layers; }
  RotatedRect footprint() const;

  friend bool operator==(const Stack&, const Stack&) = default;
};

struct Shelf {
  double height_above_ground_m = 0.0;  // top surface of the shelf board
  double target_occupancy = 0.0;       // sampled width fraction the placement aimed for
  std::vector<Stack> stacks;

  friend bool operator==(const Shelf&, const Shelf&) = default;
};

struct RackPose {
  Vec3 position;  // rack center at ground level
  double yaw_deg = 0.0;

  friend bool operator==(const RackPose&, const RackPose&) = default;
};

struct ClutterObject {
  Cuboid box;  // world frame
  int color_id = 0;

  friend bool operator==(const ClutterObject& a, const ClutterObject& b) {
    return a.color_id == b.color_id && a.box.center == b.box.center && a.box.half == b.box.half &&
           a.box.yaw_rad == b.box.yaw_rad;
  }
};

struct SceneDescription {
  SceneConfig config;
  std::vector<Shelf> shelves;  // bottom-up
  RackPose rack_pose;
  std::vector<ClutterObject> clutter;

  // Free height above shelf i: up to the next board's underside, or the
  // configured inter-shelf height for the top shelf.
  double slab_height_m(int shelf) const;

  friend bool operator==(const SceneDescription&, const SceneDescription&) = default;
};

// Throws std::invalid_argument describing the first violated invariant.
void validate(const SceneConfig& cfg);

SceneDescription generate_scene(const SceneConfig& cfg, std::uint64_t seed);

// Stacks for one shelf. Stacks are swept left to right with at least
// min_gap_m between neighbouring footprints; candidates that would violate
// depth containment or the width budget are rejected and redrawn, up to
// max_placement_attempts rejections.
std::vector<Stack> place_stacks(double shelf_width_m, double shelf_depth_m,
                                double max_stack_height_m, const SceneConfig& params,
                                SplitMix64& rng, double* target_occupancy = nullptr);

CameraModel sample_camera(const SceneConfig& cfg, SplitMix64& rng);

// Fraction of the shelf width covered by stack footprints.
double occupancy_fraction(const Shelf& shelf, double shelf_width_m);

// Per-scene parameter variation used when generating datasets.
struct SceneVariation {
  int num_shelves_min = 2;
  int num_shelves_max = 4;
  double shelf_width_min_m = 1.8;
  double shelf_width_max_m = 2.6;
  double inter_shelf_height_min_m = 0.6;
  double inter_shelf_height_max_m = 0.9;
  int max_stack_layers_min = 1;
  int max_stack_layers_max = 3;
  double clutter_probability = 0.5;

  friend bool operator==(const SceneVariation&, const SceneVariation&) = default;
};

SceneConfig sample_scene_config(const SceneConfig& base, const SceneVariation& variation,
                                SplitMix64& rng);

// Shelf-frame point to world frame.
Vec3 rack_to_world(const RackPose& pose, const Vec3& p);

}  // namespace racklay
