#include "racklay/reason3d.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace racklay {

namespace {

void check_radius(int radius) {
  if (radius < 0) throw std::invalid_argument("morphology radius must be >= 0");
}

// Padded copy so Minkowski ops see the lattice beyond the grid edge.
BinaryGrid pad(const BinaryGrid& g, int p) {
  BinaryGrid out(g.rows + 2 * p, g.cols + 2 * p);
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) out.set(r + p, c + p, g.at(r, c));
  }
  return out;
}

BinaryGrid crop(const BinaryGrid& g, int p) {
  BinaryGrid out(g.rows - 2 * p, g.cols - 2 * p);
  for (int r = 0; r < out.rows; ++r) {
    for (int c = 0; c < out.cols; ++c) out.set(r, c, g.at(r + p, c + p));
  }
  return out;
}

// Separable square max/min filter; out-of-grid cells count as unset.
BinaryGrid square_filter(const BinaryGrid& g, int radius, bool dilation) {
  auto pass = [&](const BinaryGrid& in, bool horizontal) {
    BinaryGrid out(in.rows, in.cols);
    for (int r = 0; r < in.rows; ++r) {
      for (int c = 0; c < in.cols; ++c) {
        bool v = !dilation;
        for (int k = -radius; k <= radius; ++k) {
          const int rr = horizontal ? r : r + k;
          const int cc = horizontal ? c + k : c;
          const bool inside = rr >= 0 && rr < in.rows && cc >= 0 && cc < in.cols;
          const bool bit = inside && in.at(rr, cc);
          if (dilation && bit) {
            v = true;
            break;
          }
          if (!dilation && !bit) {
            v = false;
            break;
          }
        }
        out.set(r, c, v);
      }
    }
    return out;
  };
  return pass(pass(g, true), false);
}

ShelfGeometry geometry_from_layout(const LayoutTensor& top, const LayoutTensor& front, int shelf,
                                   bool topmost, double thickness_cm) {
  const double s = metric_scale(top.extent_m, top.size);
  ShelfGeometry g;
  g.source = "layout";
  const auto top_rack = extract_rects(top, shelf, EvalClass::Rack);
  for (const Rect& r : top_rack) {
    g.width_cm = std::max(g.width_cm, r.width() * s);
    g.depth_cm = std::max(g.depth_cm, r.height() * s);
  }
  const auto front_rack = extract_rects(front, shelf, EvalClass::Rack);
  double band = 0.0;
  for (const Rect& r : front_rack) band = std::max(band, r.height() * s);
  g.inter_shelf_height_cm = band > 0.0 ? band + (topmost ? 0.0 : thickness_cm) : 0.0;
  return g;
}

}  // namespace

std::size_t BinaryGrid::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t v) { return v != 0; }));
}

BinaryGrid class_mask(const LayoutTensor& layout, int channel, EvalClass c) {
  BinaryGrid g(layout.size, layout.size);
  const auto ch = layout.channel(channel);
  for (std::size_t i = 0; i < ch.size(); ++i) g.cells[i] = in_class(ch[i], c) ? 1 : 0;
  return g;
}

BinaryGrid dilate(const BinaryGrid& g, int radius) {
  check_radius(radius);
  return radius == 0 ? g : square_filter(g, radius, true);
}

BinaryGrid erode(const BinaryGrid& g, int radius) {
  check_radius(radius);
  return radius == 0 ? g : square_filter(g, radius, false);
}

BinaryGrid morph_open(const BinaryGrid& g, int radius) {
  check_radius(radius);
  if (radius == 0) return g;
  return crop(dilate(erode(pad(g, 2 * radius), radius), radius), 2 * radius);
}

BinaryGrid morph_close(const BinaryGrid& g, int radius) {
  check_radius(radius);
  if (radius == 0) return g;
  return crop(erode(dilate(pad(g, 2 * radius), radius), radius), 2 * radius);
}

Components connected_components(const BinaryGrid& g) {
  Components out;
  out.labels.assign(g.cells.size(), 0);
  std::queue<int> frontier;
  for (int start = 0; start < static_cast<int>(g.cells.size()); ++start) {
    if (!g.cells[static_cast<std::size_t>(start)] || out.labels[static_cast<std::size_t>(start)]) continue;
    const int label = ++out.count;
    out.labels[static_cast<std::size_t>(start)] = label;
    frontier.push(start);
    while (!frontier.empty()) {
      const int i = frontier.front();
      frontier.pop();
      const int r = i / g.cols;
      const int c = i % g.cols;
      const int nbrs[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[0] >= g.rows || n[1] < 0 || n[1] >= g.cols) continue;
        const auto j = static_cast<std::size_t>(n[0] * g.cols + n[1]);
        if (g.cells[j] && !out.labels[j]) {
          out.labels[j] = label;
          frontier.push(static_cast<int>(j));
        }
      }
    }
  }
  return out;
}

std::vector<Rect> extract_rects(const LayoutTensor& layout, int channel, EvalClass c) {
  const BinaryGrid mask = morph_open(class_mask(layout, channel, c), 1);
  const Components comps = connected_components(mask);
  std::vector<Rect> rects(static_cast<std::size_t>(comps.count));
  for (Rect& r : rects) {
    r.view = layout.view;
    r.shelf = channel;
    r.min_u = mask.cols;
    r.min_v = mask.rows;
  }
  for (int row = 0; row < mask.rows; ++row) {
    for (int col = 0; col < mask.cols; ++col) {
      const int label = comps.labels[static_cast<std::size_t>(row) * mask.cols + col];
      if (label == 0) continue;
      Rect& r = rects[static_cast<std::size_t>(label - 1)];
      r.min_u = std::min(r.min_u, col);
      r.min_v = std::min(r.min_v, row);
      r.max_u = std::max(r.max_u, col + 1);
      r.max_v = std::max(r.max_v, row + 1);
    }
  }
  return rects;
}

int count_stacks(const LayoutTensor& layout, int channel) {
  return connected_components(morph_open(class_mask(layout, channel, EvalClass::Box), 1)).count;
}

double x_overlap_ratio(const Rect& a, const Rect& b) {
  const int inter = std::min(a.max_u, b.max_u) - std::max(a.min_u, b.min_u);
  if (inter <= 0) return 0.0;
  const int uni = std::max(a.max_u, b.max_u) - std::min(a.min_u, b.min_u);
  return static_cast<double>(inter) / static_cast<double>(uni);
}

FusionResult fuse_views(const std::vector<Rect>& top_rects, const std::vector<Rect>& front_rects, double cm_per_cell,
                        const LayoutTensor& grid) {
  struct Pair {
    double ratio;
    std::size_t t;
    std::size_t f;
  };
  std::vector<Pair> pairs;
  for (std::size_t t = 0; t < top_rects.size(); ++t) {
    for (std::size_t f = 0; f < front_rects.size(); ++f) {
      const double r = x_overlap_ratio(top_rects[t], front_rects[f]);
      if (r > 0.0) pairs.push_back({r, t, f});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    if (a.ratio != b.ratio) return a.ratio > b.ratio;
    const auto ka = std::make_tuple(top_rects[a.t].min_u, front_rects[a.f].min_u);
    const auto kb = std::make_tuple(top_rects[b.t].min_u, front_rects[b.f].min_u);
    return ka < kb;
  });
  std::vector<bool> used_t(top_rects.size(), false);
  std::vector<bool> used_f(front_rects.size(), false);
  FusionResult out;
  const double half_extent_cm = 50.0 * grid.extent_m;
  for (const Pair& p : pairs) {
    if (used_t[p.t] || used_f[p.f]) continue;
    used_t[p.t] = used_f[p.f] = true;
    const Rect& t = top_rects[p.t];
    const Rect& f = front_rects[p.f];
    FusedCuboid c;
    c.shelf = t.shelf;
    c.top = t;
    c.front = f;
    c.width_cm = t.width() * cm_per_cell;
    c.depth_cm = t.height() * cm_per_cell;
    c.height_cm = f.height() * cm_per_cell;
    c.center_x_cm = -half_extent_cm + 0.5 * (t.min_u + t.max_u) * cm_per_cell;
    c.center_z_cm = -half_extent_cm + 0.5 * (t.min_v + t.max_v) * cm_per_cell;
    out.cuboids.push_back(c);
  }
  std::sort(out.cuboids.begin(), out.cuboids.end(),
            [](const FusedCuboid& a, const FusedCuboid& b) { return a.top.min_u < b.top.min_u; });
  out.unmatched_top = static_cast<int>(std::count(used_t.begin(), used_t.end(), false));
  out.unmatched_front = static_cast<int>(std::count(used_f.begin(), used_f.end(), false));
  return out;
}

ShelfVolume shelf_free_volume(const std::vector<FusedCuboid>& cuboids, double width_cm, double depth_cm,
                              double inter_shelf_height_cm) {
  ShelfVolume v;
  v.capacity_cm3 = width_cm * depth_cm * inter_shelf_height_cm;
  double used = 0.0;
  for (const auto& c : cuboids) used += c.volume_cm3();
  v.free_cm3 = std::max(0.0, v.capacity_cm3 - used);
  return v;
}

ShelfGeometry geometry_from_scene(const SceneDescription& scene, int shelf) {
  if (shelf < 0 || shelf >= static_cast<int>(scene.shelves.size())) {
    throw std::out_of_range("shelf index outside scene");
  }
  return {100.0 * scene.config.shelf_width_m, 100.0 * scene.config.shelf_depth_m,
          100.0 * scene.config.inter_shelf_height_m, "scene"};
}

RackReport reason_rack(const LayoutTensor& top, const LayoutTensor& front,
                       const std::function<std::optional<ShelfGeometry>(int)>& shelf_geometry,
                       double shelf_thickness_cm) {
  if (top.view != View::Top || front.view != View::Front || top.channels != front.channels ||
      top.size != front.size) {
    throw std::invalid_argument("reason_rack needs matching top and front layouts");
  }
  const double s = metric_scale(top.extent_m, top.size);
  std::vector<int> present;
  for (int ch = 0; ch < top.channels; ++ch) {
    if (!extract_rects(top, ch, EvalClass::Rack).empty()) present.push_back(ch);
  }
  RackReport report;
  for (int ch : present) {
    ShelfReport sr;
    sr.shelf = ch;
    const auto fused = fuse_views(extract_rects(top, ch, EvalClass::Box), extract_rects(front, ch, EvalClass::Box), s, top);
    sr.cuboids = fused.cuboids;
    sr.unmatched_top = fused.unmatched_top;
    sr.unmatched_front = fused.unmatched_front;
    sr.stack_count = static_cast<int>(sr.cuboids.size());
    std::optional<ShelfGeometry> g;
    if (shelf_geometry) g = shelf_geometry(ch);
    sr.geometry = g ? *g : geometry_from_layout(top, front, ch, ch == present.back(), shelf_thickness_cm);
    const ShelfVolume v =
        shelf_free_volume(sr.cuboids, sr.geometry.width_cm, sr.geometry.depth_cm, sr.geometry.inter_shelf_height_cm);
    sr.capacity_cm3 = v.capacity_cm3;
    sr.free_cm3 = v.free_cm3;
    report.total_stacks += sr.stack_count;
    report.total_free_cm3 += sr.free_cm3;
    report.shelves.push_back(std::move(sr));
  }
  report.shelf_count = static_cast<int>(report.shelves.size());
  return report;
}

std::string report_sentence(const RackReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "Rack has %d shelves, %d box stacks, and %.0f cm³ of free space available",
                r.shelf_count, r.total_stacks, std::round(r.total_free_cm3));
  return buf;
}

Json to_json(const RackReport& r) {
  Json shelves = Json::array();
  for (const auto& s : r.shelves) {
    Json cuboids = Json::array();
    for (const auto& c : s.cuboids) {
      cuboids.push_back({{"center_x_cm", c.center_x_cm},
                         {"center_z_cm", c.center_z_cm},
                         {"width_cm", c.width_cm},
                         {"depth_cm", c.depth_cm},
                         {"height_cm", c.height_cm},
                         {"volume_cm3", c.volume_cm3()}});
    }
    shelves.push_back({{"shelf", s.shelf},
                       {"stack_count", s.stack_count},
                       {"cuboids", cuboids},
                       {"geometry",
                        {{"width_cm", s.geometry.width_cm},
                         {"depth_cm", s.geometry.depth_cm},
                         {"inter_shelf_height_cm", s.geometry.inter_shelf_height_cm},
                         {"source", s.geometry.source}}},
                       {"capacity_cm3", s.capacity_cm3},
                       {"free_cm3", s.free_cm3},
                       {"unmatched_top", s.unmatched_top},
                       {"unmatched_front", s.unmatched_front}});
  }
  return {{"version", kSchemaVersion},
          {"shelf_count", r.shelf_count},
          {"total_stacks", r.total_stacks},
          {"total_free_cm3", r.total_free_cm3},
          {"sentence", report_sentence(r)},
          {"shelves", shelves}};
}

}  // namespace racklay
