#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "racklay/gtlayout.hpp"
#include "racklay/io.hpp"
#include "racklay/metrics.hpp"
#include "racklay/scenegen.hpp"

namespace racklay {

// Row-major binary mask; nonzero = set.
struct BinaryGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;

  BinaryGrid() = default;
  BinaryGrid(int r, int c) : rows(r), cols(c), cells(static_cast<std::size_t>(r) * c, 0) {}

  bool at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool v) { cells[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
  std::size_t count() const;

  friend bool operator==(const BinaryGrid&, const BinaryGrid&) = default;
};

BinaryGrid class_mask(const LayoutTensor& layout, int channel, EvalClass c);

// Minkowski operations with a (2r+1)^2 square. The set lives on the infinite
// lattice (nothing outside the grid is set); results are cropped to the grid.
BinaryGrid dilate(const BinaryGrid& g, int radius);
BinaryGrid erode(const BinaryGrid& g, int radius);
BinaryGrid morph_open(const BinaryGrid& g, int radius);
BinaryGrid morph_close(const BinaryGrid& g, int radius);

struct Components {
  std::vector<int> labels;  // 0 = unset, components numbered from 1 in row-major first-touch order
  int count = 0;
};

Components connected_components(const BinaryGrid& g);

// Half-open cell bounds: columns [min_u, max_u), rows [min_v, max_v).
struct Rect {
  View view = View::Top;
  int shelf = 0;
  int min_u = 0;
  int min_v = 0;
  int max_u = 0;
  int max_v = 0;

  int width() const { return max_u - min_u; }
  int height() const { return max_v - min_v; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Bounding rectangles of the components of the class mask after morph_open(1).
std::vector<Rect> extract_rects(const LayoutTensor& layout, int channel, EvalClass c);

// Components of the occupied mask after morph_open(1).
int count_stacks(const LayoutTensor& layout, int channel);

// Reconstructed stack in the shelf frame, centimetres.
struct FusedCuboid {
  int shelf = 0;
  double center_x_cm = 0.0;
  double center_z_cm = 0.0;
  double width_cm = 0.0;   // along x
  double depth_cm = 0.0;   // along z
  double height_cm = 0.0;
  Rect top;
  Rect front;

  double volume_cm3() const { return width_cm * depth_cm * height_cm; }
};

struct FusionResult {
  std::vector<FusedCuboid> cuboids;
  int unmatched_top = 0;
  int unmatched_front = 0;
};

// Overlap ratio of the column intervals: |intersection| / |union|.
double x_overlap_ratio(const Rect& a, const Rect& b);

// Greedy matching by maximal column-interval overlap ratio; ties go to the
// leftmost top rect, then the leftmost front rect. Pairs with no overlap are
// never matched. `grid` supplies the metric frame of the cells.
FusionResult fuse_views(const std::vector<Rect>& top_rects, const std::vector<Rect>& front_rects,
                        double cm_per_cell, const LayoutTensor& grid);

struct ShelfVolume {
  double capacity_cm3 = 0.0;
  double free_cm3 = 0.0;
};

ShelfVolume shelf_free_volume(const std::vector<FusedCuboid>& cuboids, double width_cm, double depth_cm,
                              double inter_shelf_height_cm);

// Shelf dimensions used for the capacity. Taken from the scene when known,
// otherwise estimated from the rack-class rectangles of the layouts.
struct ShelfGeometry {
  double width_cm = 0.0;
  double depth_cm = 0.0;
  double inter_shelf_height_cm = 0.0;
  std::string source;  // "scene" or "layout"
};

struct ShelfReport {
  int shelf = 0;
  int stack_count = 0;
  std::vector<FusedCuboid> cuboids;
  ShelfGeometry geometry;
  double capacity_cm3 = 0.0;
  double free_cm3 = 0.0;
  int unmatched_top = 0;
  int unmatched_front = 0;
};

struct RackReport {
  int shelf_count = 0;
  int total_stacks = 0;
  double total_free_cm3 = 0.0;
  std::vector<ShelfReport> shelves;
};

// Shelves considered are the channels with any rack-class cell in the top view.
// `shelf_geometry(i)` may return the true dimensions of shelf i.
RackReport reason_rack(const LayoutTensor& top, const LayoutTensor& front,
                       const std::function<std::optional<ShelfGeometry>(int)>& shelf_geometry = {},
                       double shelf_thickness_cm = 5.0);

ShelfGeometry geometry_from_scene(const SceneDescription& scene, int shelf);

std::string report_sentence(const RackReport& report);
Json to_json(const RackReport& report);

}  // namespace racklay
