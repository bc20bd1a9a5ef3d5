#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "racklay/camera.hpp"
#include "racklay/scenegen.hpp"

namespace racklay {

enum class View { Top, Front };

const char* view_name(View v);
View parse_view(const std::string& name);

enum Label : std::uint8_t { kBackground = 0, kUnoccupied = 1, kOccupied = 2 };
inline constexpr int kNumLabels = 3;

// R channels of D x D labels. Channel i is shelf i counted from the bottom.
//
// Top view: column c spans x (rack width), row r spans z from the back
// (row 0) toward the camera. Front view: same columns; row r spans height
// above the shelf surface, top of the grid first. The shelf surface sits on
// the row boundary `front_surface_row()`, 0.5 m below the grid center.
struct LayoutTensor {
  View view = View::Top;
  int channels = 0;
  int size = 0;
  double extent_m = 8.0;
  std::vector<std::uint8_t> cells;
  std::vector<std::uint8_t> visible;  // per channel, 1 if the shelf is in the visible set

  LayoutTensor() = default;
  LayoutTensor(View view, int channels, int size, double extent_m);

  std::size_t index(int channel, int row, int col) const {
    return (static_cast<std::size_t>(channel) * size + row) * size + col;
  }
  std::uint8_t at(int channel, int row, int col) const { return cells[index(channel, row, col)]; }
  void set(int channel, int row, int col, std::uint8_t label) { cells[index(channel, row, col)] = label; }

  std::span<const std::uint8_t> channel(int c) const {
    return {cells.data() + static_cast<std::size_t>(c) * size * size,
            static_cast<std::size_t>(size) * size};
  }
  std::span<std::uint8_t> channel(int c) {
    return {cells.data() + static_cast<std::size_t>(c) * size * size,
            static_cast<std::size_t>(size) * size};
  }

  double cell_m() const { return extent_m / size; }
  // Metric coordinates of cell centers in the shelf frame.
  double col_x(int col) const { return -extent_m / 2.0 + (col + 0.5) * cell_m(); }
  double row_z(int row) const { return -extent_m / 2.0 + (row + 0.5) * cell_m(); }
  int front_surface_row() const;
  // Height of a front-view cell center above the shelf surface.
  double row_height(int row) const { return (front_surface_row() - row - 0.5) * cell_m(); }

  friend bool operator==(const LayoutTensor&, const LayoutTensor&) = default;
};

// Range of detection d and the region of interest Omega (a square of side
// extent_m centered on the rack, discretised into grid_size cells).
struct DetectionWindow {
  double range_m = 5.0;
  double extent_m = 8.0;
  int grid_size = 64;
};

// Shelves whose front-edge midpoint projects inside the image and lies
// within range_m of the camera.
std::vector<int> visible_shelf_set(const SceneDescription& scene, const CameraModel& cam,
                                   const DetectionWindow& window);

LayoutTensor top_layout(const SceneDescription& scene, const CameraModel& cam,
                        const DetectionWindow& window);

LayoutTensor front_layout(const SceneDescription& scene, const CameraModel& cam,
                          const DetectionWindow& window);

// Centimetres per layout cell.
double metric_scale(double extent_m, int grid_size);

// Columns of the top-view grid touched by a stack footprint (cell-center rule).
std::vector<int> footprint_columns(const LayoutTensor& grid, const Stack& stack);

}  // namespace racklay
