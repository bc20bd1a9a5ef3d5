#pragma once

// Slow, obviously-correct reference implementations used by the unit tests
// and the acceptance suite. Nothing here is shared with the production code
// beyond the public types.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "racklay/geometry.hpp"
#include "racklay/gtlayout.hpp"
#include "racklay/reason3d.hpp"
#include "racklay/render.hpp"
#include "racklay/scenegen.hpp"

namespace racklay::oracle {

// Per-pixel ray cast through pixel centers. The nearest hit wins; on exact
// depth ties the earlier object wins, like a strict z-test in draw order.
inline RenderOutput raycast(const std::vector<SceneObject>& objects, const CameraModel& cam, int width, int height) {
  RenderOutput out;
  out.image = Image(width, height, kBackgroundColor);
  out.object_ids.assign(static_cast<std::size_t>(width) * height, -1);
  const double yaw = deg_to_rad(cam.yaw_deg);
  const Vec3 right{std::cos(yaw), 0.0, -std::sin(yaw)};
  const Vec3 down{0.0, -1.0, 0.0};
  const Vec3 forward{-std::sin(yaw), 0.0, -std::cos(yaw)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Direction with unit forward component: the ray parameter is camera depth.
      const Vec3 dir = right * ((x + 0.5 - cam.cx) / cam.fx) + down * ((y + 0.5 - cam.cy) / cam.fy) + forward;
      double best = std::numeric_limits<double>::infinity();
      int best_id = -1;
      Vec3 best_normal;
      for (std::size_t id = 0; id < objects.size(); ++id) {
        const Cuboid& b = objects[id].box;
        const double c = std::cos(b.yaw_rad);
        const double s = std::sin(b.yaw_rad);
        // World to box-local: rotate by -yaw about y (box local x maps to (c, 0, -s)).
        auto local = [&](const Vec3& v) { return Vec3{c * v.x - s * v.z, v.y, s * v.x + c * v.z}; };
        const Vec3 o = local(cam.position - b.center);
        const Vec3 d = local(dir);
        double t0 = -std::numeric_limits<double>::infinity();
        double t1 = std::numeric_limits<double>::infinity();
        int axis = -1;
        double sign = 0.0;
        bool miss = false;
        const double oc[3] = {o.x, o.y, o.z};
        const double dc[3] = {d.x, d.y, d.z};
        const double hc[3] = {b.half.x, b.half.y, b.half.z};
        for (int a = 0; a < 3 && !miss; ++a) {
          if (dc[a] == 0.0) {
            if (std::abs(oc[a]) > hc[a]) miss = true;
            continue;
          }
          double ta = (-hc[a] - oc[a]) / dc[a];
          double tb = (hc[a] - oc[a]) / dc[a];
          double sa = -1.0;
          if (ta > tb) {
            std::swap(ta, tb);
            sa = 1.0;
          }
          if (ta > t0) {
            t0 = ta;
            axis = a;
            sign = sa;
          }
          t1 = std::min(t1, tb);
          if (t0 > t1) miss = true;
        }
        if (miss || axis < 0 || t0 <= 0.0) continue;
        if (t0 < best) {
          best = t0;
          best_id = static_cast<int>(id);
          const Vec3 n_local = axis == 0 ? Vec3{sign, 0, 0} : axis == 1 ? Vec3{0, sign, 0} : Vec3{0, 0, sign};
          // Box-local normal back to world.
          best_normal = {c * n_local.x + s * n_local.z, n_local.y, -s * n_local.x + c * n_local.z};
        }
      }
      if (best_id >= 0) {
        out.object_ids[static_cast<std::size_t>(y) * width + x] = best_id;
        out.image.set(x, y, shade(objects[static_cast<std::size_t>(best_id)].color, best_normal));
      }
    }
  }
  return out;
}

// Visible set recomputed from the pinhole formula directly.
inline std::vector<int> visible_shelves(const SceneDescription& scene, const CameraModel& cam,
                                        const DetectionWindow& window) {
  std::vector<int> out;
  const double yaw = deg_to_rad(cam.yaw_deg);
  for (std::size_t i = 0; i < scene.shelves.size(); ++i) {
    const Vec3 p = rack_to_world(scene.rack_pose,
                                 {0.0, scene.shelves[i].height_above_ground_m, scene.config.shelf_depth_m / 2.0});
    const Vec3 d = p - cam.position;
    const double X = std::cos(yaw) * d.x - std::sin(yaw) * d.z;
    const double Y = -d.y;
    const double Z = -std::sin(yaw) * d.x - std::cos(yaw) * d.z;
    if (Z <= 0.0) continue;
    const double u = cam.fx * X / Z + cam.cx;
    const double v = cam.fy * Y / Z + cam.cy;
    const double dist = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    if (u >= 0.0 && u < cam.image_width && v >= 0.0 && v < cam.image_height && dist <= window.range_m) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

inline bool in_footprint(const Stack& s, double x, double z) {
  const double yaw = deg_to_rad(s.yaw_deg);
  const double dx = x - s.center_x_m;
  const double dz = z - s.center_z_m;
  const double lx = std::cos(yaw) * dx - std::sin(yaw) * dz;
  const double lz = std::sin(yaw) * dx + std::cos(yaw) * dz;
  return std::abs(lx) <= s.spec.width_m / 2.0 && std::abs(lz) <= s.spec.depth_m / 2.0;
}

// Every cell tested against every stack, no bounding-box pruning.
inline LayoutTensor top_layout(const SceneDescription& scene, const CameraModel& cam, const DetectionWindow& w) {
  const SceneConfig& cfg = scene.config;
  LayoutTensor g(View::Top, cfg.max_shelves, w.grid_size, w.extent_m);
  const double cell = w.extent_m / w.grid_size;
  for (int shelf : visible_shelves(scene, cam, w)) {
    if (shelf >= g.channels) continue;
    g.visible[static_cast<std::size_t>(shelf)] = 1;
    for (int r = 0; r < w.grid_size; ++r) {
      const double z = -w.extent_m / 2.0 + (r + 0.5) * cell;
      for (int c = 0; c < w.grid_size; ++c) {
        const double x = -w.extent_m / 2.0 + (c + 0.5) * cell;
        if (std::abs(x) > cfg.shelf_width_m / 2.0 || std::abs(z) > cfg.shelf_depth_m / 2.0) continue;
        std::uint8_t label = kUnoccupied;
        for (const Stack& s : scene.shelves[static_cast<std::size_t>(shelf)].stacks) {
          if (in_footprint(s, x, z)) label = kOccupied;
        }
        g.set(shelf, r, c, label);
      }
    }
  }
  return g;
}

// Front view: a column is occupied up to the stack top when any cell center
// of that column in the top grid lies inside the footprint.
inline LayoutTensor front_layout(const SceneDescription& scene, const CameraModel& cam, const DetectionWindow& w) {
  const SceneConfig& cfg = scene.config;
  LayoutTensor g(View::Front, cfg.max_shelves, w.grid_size, w.extent_m);
  const double cell = w.extent_m / w.grid_size;
  const int surface = w.grid_size / 2 + static_cast<int>(std::lround(0.5 / cell));
  for (int shelf : visible_shelves(scene, cam, w)) {
    if (shelf >= g.channels) continue;
    g.visible[static_cast<std::size_t>(shelf)] = 1;
    const double slab = scene.slab_height_m(shelf);
    for (int c = 0; c < w.grid_size; ++c) {
      const double x = -w.extent_m / 2.0 + (c + 0.5) * cell;
      if (std::abs(x) > cfg.shelf_width_m / 2.0) continue;
      double top = -1.0;
      for (const Stack& s : scene.shelves[static_cast<std::size_t>(shelf)].stacks) {
        for (int r = 0; r < w.grid_size; ++r) {
          if (in_footprint(s, x, -w.extent_m / 2.0 + (r + 0.5) * cell)) top = std::max(top, s.height_m());
        }
      }
      for (int r = 0; r < w.grid_size; ++r) {
        const double h = (surface - r - 0.5) * cell;
        if (h < 0.0 || h >= slab) continue;
        g.set(shelf, r, c, h <= top ? kOccupied : kUnoccupied);
      }
    }
  }
  return g;
}

inline double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, std::uint8_t id) {
  double inter = 0.0;
  double uni = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == id;
    const bool g = gt[i] == id;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0.0 ? 1.0 : inter / uni;
}

// O(n^2): one operating point per distinct score, thresholding at >= t.
inline std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> gt) {
  double positives = 0.0;
  for (auto v : gt) positives += v != 0;
  if (positives == 0.0) return std::nullopt;
  std::vector<double> thresholds(scores.begin(), scores.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double ap = 0.0;
  double prev_recall = 0.0;
  for (double t : thresholds) {
    double tp = 0.0;
    double n = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        n += 1.0;
        tp += gt[i] != 0;
      }
    }
    const double recall = tp / positives;
    ap += (recall - prev_recall) * (tp / n);
    prev_recall = recall;
  }
  return ap;
}

// Recursive flood fill count with 4-connectivity.
inline int flood_fill_count(const BinaryGrid& g) {
  std::vector<std::uint8_t> seen(g.cells.size(), 0);
  int count = 0;
  std::vector<std::pair<int, int>> stack;
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      if (!g.at(r, c) || seen[static_cast<std::size_t>(r) * g.cols + c]) continue;
      ++count;
      stack.push_back({r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        if (y < 0 || x < 0 || y >= g.rows || x >= g.cols) continue;
        auto& s = seen[static_cast<std::size_t>(y) * g.cols + x];
        if (s || !g.at(y, x)) continue;
        s = 1;
        stack.push_back({y + 1, x});
        stack.push_back({y - 1, x});
        stack.push_back({y, x + 1});
        stack.push_back({y, x - 1});
      }
    }
  }
  return count;
}

inline bool grid_at(const BinaryGrid& g, int r, int c) {
  return r >= 0 && c >= 0 && r < g.rows && c < g.cols && g.at(r, c);
}

// X (+) B: p is set when some x in X lies within the square around p.
inline bool in_dilation(const BinaryGrid& g, int r, int c, int radius) {
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (grid_at(g, r + dr, c + dc)) return true;
    }
  }
  return false;
}

// X (-) B: p is set when the whole square around p lies in X.
inline bool in_erosion(const BinaryGrid& g, int r, int c, int radius) {
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (!grid_at(g, r + dr, c + dc)) return false;
    }
  }
  return true;
}

inline BinaryGrid minkowski_dilate(const BinaryGrid& g, int radius) {
  BinaryGrid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out.set(r, c, in_dilation(g, r, c, radius));
  }
  return out;
}

inline BinaryGrid minkowski_erode(const BinaryGrid& g, int radius) {
  BinaryGrid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out.set(r, c, in_erosion(g, r, c, radius));
  }
  return out;
}

// (X (-) B) (+) B evaluated pointwise on the unbounded lattice.
inline BinaryGrid minkowski_open(const BinaryGrid& g, int radius) {
  BinaryGrid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      bool v = false;
      for (int dr = -radius; dr <= radius && !v; ++dr) {
        for (int dc = -radius; dc <= radius && !v; ++dc) v = in_erosion(g, r + dr, c + dc, radius);
      }
      out.set(r, c, v);
    }
  }
  return out;
}

// (X (+) B) (-) B evaluated pointwise on the unbounded lattice.
inline BinaryGrid minkowski_close(const BinaryGrid& g, int radius) {
  BinaryGrid out(g.rows, g.cols);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      bool v = true;
      for (int dr = -radius; dr <= radius && v; ++dr) {
        for (int dc = -radius; dc <= radius && v; ++dc) v = in_dilation(g, r + dr, c + dc, radius);
      }
      out.set(r, c, v);
    }
  }
  return out;
}

// Free volume from the true scene: W * Dp * H per shelf minus every stack's volume.
inline double analytic_free_cm3(const SceneDescription& scene, int shelf) {
  const SceneConfig& cfg = scene.config;
  double free = cfg.shelf_width_m * cfg.shelf_depth_m * cfg.inter_shelf_height_m;
  for (const Stack& s : scene.shelves[static_cast<std::size_t>(shelf)].stacks) {
    free -= s.spec.width_m * s.spec.depth_m * s.height_m();
  }
  return std::max(0.0, free) * 1e6;
}

}  // namespace racklay::oracle

namespace racklay::oracle {

// Random scene and camera for the rasterizer comparison: varied rack
// dimensions, clutter, a lateral offset and a small camera yaw.
struct RenderCase {
  SceneDescription scene;
  CameraModel camera;
};

inline RenderCase random_render_case(std::uint64_t seed, int size) {
  SplitMix64 rng = substream(seed, 77);
  SceneConfig base;
  base.camera.image_width = base.camera.image_height = size;
  base.camera.fx = base.camera.fy = 110.0 * size / 128.0;
  base.camera.lateral_min_m = -0.8;
  base.camera.lateral_max_m = 0.8;
  SceneVariation var;
  var.clutter_probability = 0.5;
  const SceneConfig cfg = sample_scene_config(base, var, rng);
  RenderCase c{generate_scene(cfg, rng.next()), sample_camera(cfg, rng)};
  c.camera.yaw_deg = rng.uniform(-12.0, 12.0);
  return c;
}

}  // namespace racklay::oracle
