#include "racklay/gtlayout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace racklay {

namespace {

// Inclusive range of cell indices whose centers may fall in [lo, hi].
std::pair<int, int> cell_span(double lo, double hi, const LayoutTensor& grid) {
  const double s = grid.cell_m();
  const double origin = -grid.extent_m / 2.0;
  const int first = std::max(0, static_cast<int>(std::floor((lo - origin) / s - 0.5)));
  const int last = std::min(grid.size - 1, static_cast<int>(std::ceil((hi - origin) / s - 0.5)));
  return {first, last};
}

bool in_shelf_x(const SceneConfig& cfg, double x) { return std::abs(x) <= cfg.shelf_width_m / 2.0; }

void mark_visible(LayoutTensor& grid, const std::vector<int>& visible) {
  for (int i : visible) {
    if (i >= 0 && i < grid.channels) grid.visible[static_cast<std::size_t>(i)] = 1;
  }
}

}  // namespace

const char* view_name(View v) { return v == View::Top ? "top" : "front"; }

View parse_view(const std::string& name) {
  if (name == "top") return View::Top;
  if (name == "front") return View::Front;
  throw std::invalid_argument("unknown view '" + name + "' (expected top or front)");
}

LayoutTensor::LayoutTensor(View v, int r, int d, double extent)
    : view(v),
      channels(r),
      size(d),
      extent_m(extent),
      cells(static_cast<std::size_t>(r) * d * d, kBackground),
      visible(static_cast<std::size_t>(r), 0) {}

int LayoutTensor::front_surface_row() const {
  return size / 2 + static_cast<int>(std::lround(0.5 / cell_m()));
}

double metric_scale(double extent_m, int grid_size) {
  if (grid_size <= 0) throw std::invalid_argument("grid size must be positive");
  return 100.0 * extent_m / grid_size;
}

std::vector<int> visible_shelf_set(const SceneDescription& scene, const CameraModel& cam,
                                   const DetectionWindow& window) {
  std::vector<int> out;
  const double front_z = scene.config.shelf_depth_m / 2.0;
  for (std::size_t i = 0; i < scene.shelves.size(); ++i) {
    const Vec3 edge_mid =
        rack_to_world(scene.rack_pose, {0.0, scene.shelves[i].height_above_ground_m, front_z});
    const auto p = try_project(cam, edge_mid);
    if (!p) continue;
    const bool in_image = p->u >= 0.0 && p->u < cam.image_width && p->v >= 0.0 && p->v < cam.image_height;
    const Vec3 d = edge_mid - cam.position;
    const bool in_range = std::sqrt(dot(d, d)) <= window.range_m;
    if (in_image && in_range) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<int> footprint_columns(const LayoutTensor& grid, const Stack& stack) {
  const RotatedRect rect = stack.footprint();
  const double ex = rect.extent_x();
  const double ez = rect.extent_z();
  const auto [c0, c1] = cell_span(rect.center_x - ex, rect.center_x + ex, grid);
  const auto [r0, r1] = cell_span(rect.center_z - ez, rect.center_z + ez, grid);
  std::vector<int> cols;
  for (int c = c0; c <= c1; ++c) {
    for (int r = r0; r <= r1; ++r) {
      if (rect.contains(grid.col_x(c), grid.row_z(r))) {
        cols.push_back(c);
        break;
      }
    }
  }
  return cols;
}

LayoutTensor top_layout(const SceneDescription& scene, const CameraModel& cam,
                        const DetectionWindow& window) {
  const SceneConfig& cfg = scene.config;
  LayoutTensor grid(View::Top, cfg.max_shelves, window.grid_size, window.extent_m);
  const auto visible = visible_shelf_set(scene, cam, window);
  mark_visible(grid, visible);
  const auto [c0, c1] = cell_span(-cfg.shelf_width_m / 2.0, cfg.shelf_width_m / 2.0, grid);
  const auto [r0, r1] = cell_span(-cfg.shelf_depth_m / 2.0, cfg.shelf_depth_m / 2.0, grid);
  for (int shelf : visible) {
    if (shelf >= grid.channels) continue;
    for (int r = r0; r <= r1; ++r) {
      if (std::abs(grid.row_z(r)) > cfg.shelf_depth_m / 2.0) continue;
      for (int c = c0; c <= c1; ++c) {
        if (in_shelf_x(cfg, grid.col_x(c))) grid.set(shelf, r, c, kUnoccupied);
      }
    }
    for (const Stack& s : scene.shelves[static_cast<std::size_t>(shelf)].stacks) {
      const RotatedRect rect = s.footprint();
      const auto [sc0, sc1] = cell_span(rect.center_x - rect.extent_x(), rect.center_x + rect.extent_x(), grid);
      const auto [sr0, sr1] = cell_span(rect.center_z - rect.extent_z(), rect.center_z + rect.extent_z(), grid);
      for (int r = sr0; r <= sr1; ++r) {
        for (int c = sc0; c <= sc1; ++c) {
          if (grid.at(shelf, r, c) == kUnoccupied && rect.contains(grid.col_x(c), grid.row_z(r))) {
            grid.set(shelf, r, c, kOccupied);
          }
        }
      }
    }
  }
  return grid;
}

LayoutTensor front_layout(const SceneDescription& scene, const CameraModel& cam,
                          const DetectionWindow& window) {
  const SceneConfig& cfg = scene.config;
  LayoutTensor grid(View::Front, cfg.max_shelves, window.grid_size, window.extent_m);
  const auto visible = visible_shelf_set(scene, cam, window);
  mark_visible(grid, visible);
  const auto [c0, c1] = cell_span(-cfg.shelf_width_m / 2.0, cfg.shelf_width_m / 2.0, grid);
  for (int shelf : visible) {
    if (shelf >= grid.channels) continue;
    const double slab = scene.slab_height_m(shelf);
    for (int r = 0; r < grid.size; ++r) {
      const double h = grid.row_height(r);
      if (h < 0.0 || h >= slab) continue;
      for (int c = c0; c <= c1; ++c) {
        if (in_shelf_x(cfg, grid.col_x(c))) grid.set(shelf, r, c, kUnoccupied);
      }
    }
    for (const Stack& s : scene.shelves[static_cast<std::size_t>(shelf)].stacks) {
      const double top = s.height_m();
      for (int c : footprint_columns(grid, s)) {
        for (int r = 0; r < grid.size; ++r) {
          const double h = grid.row_height(r);
          if (h >= 0.0 && h <= top && grid.at(shelf, r, c) == kUnoccupied) grid.set(shelf, r, c, kOccupied);
        }
      }
    }
  }
  return grid;
}

}  // namespace racklay
