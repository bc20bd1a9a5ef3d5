#include "racklay/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace racklay {

namespace {

constexpr double kNearPlane = 0.05;
constexpr double kPostSize = 0.06;
constexpr double kAmbient = 0.45;
constexpr double kDiffuse = 0.55;

constexpr std::array<Rgb, 8> kBoxColors{{
    {196, 154, 108}, {170, 125, 80}, {215, 180, 130}, {150, 105, 65},
    {230, 200, 150}, {185, 140, 95}, {200, 45, 40}, {40, 120, 200},
}};
constexpr std::array<Rgb, 4> kLevelTints{{{205, 110, 35}, {225, 185, 40}, {120, 185, 70}, {70, 170, 170}}};
constexpr Rgb kPostColor{60, 80, 150};
constexpr Rgb kClutterBoardColor{135, 135, 140};

Rgb palette_color(int color_id) {
  if (color_id >= 0 && color_id < static_cast<int>(kBoxColors.size())) {
    return kBoxColors[static_cast<std::size_t>(color_id)];
  }
  return kClutterBoardColor;
}

Cuboid world_box(const RackPose& pose, Vec3 center, Vec3 half, double yaw_rad) {
  return {rack_to_world(pose, center), half, yaw_rad + deg_to_rad(pose.yaw_deg)};
}

// Sutherland-Hodgman against Z >= near.
std::vector<Vec3> clip_near(const std::array<Vec3, 3>& tri) {
  std::vector<Vec3> out;
  out.reserve(4);
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = tri[static_cast<std::size_t>(i)];
    const Vec3& b = tri[static_cast<std::size_t>((i + 1) % 3)];
    const bool a_in = a.z >= kNearPlane;
    const bool b_in = b.z >= kNearPlane;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double t = (kNearPlane - a.z) / (b.z - a.z);
      out.push_back(a + (b - a) * t);
    }
  }
  return out;
}

struct ScreenVertex {
  double x;
  double y;
  double inv_z;
};

bool is_top_left(const ScreenVertex& a, const ScreenVertex& b) {
  // Triangles are normalised to positive signed area in a y-down frame.
  const bool top = a.y == b.y && b.x < a.x;
  const bool left = b.y < a.y;
  return top || left;
}

class Rasterizer {
 public:
  Rasterizer(int width, int height)
      : width_(width),
        height_(height),
        depth_(static_cast<std::size_t>(width) * height, 0.0),
        ids_(static_cast<std::size_t>(width) * height, -1),
        colors_(static_cast<std::size_t>(width) * height, kBackgroundColor) {}

  void triangle(ScreenVertex v0, ScreenVertex v1, ScreenVertex v2, int id, Rgb color) {
    double area = edge(v0, v1, v2.x, v2.y);
    if (area == 0.0) return;
    if (area < 0.0) {
      std::swap(v1, v2);
      area = -area;
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({v0.x, v1.x, v2.x}))));
    const int x1 = std::min(width_ - 1, static_cast<int>(std::ceil(std::max({v0.x, v1.x, v2.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({v0.y, v1.y, v2.y}))));
    const int y1 = std::min(height_ - 1, static_cast<int>(std::ceil(std::max({v0.y, v1.y, v2.y}))));
    const bool tl0 = is_top_left(v1, v2);
    const bool tl1 = is_top_left(v2, v0);
    const bool tl2 = is_top_left(v0, v1);
    for (int y = y0; y <= y1; ++y) {
      const double py = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double px = x + 0.5;
        const double w0 = edge(v1, v2, px, py);
        const double w1 = edge(v2, v0, px, py);
        const double w2 = edge(v0, v1, px, py);
        if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) continue;
        const double inv_z = (w0 * v0.inv_z + w1 * v1.inv_z + w2 * v2.inv_z) / area;
        const auto i = static_cast<std::size_t>(y) * width_ + x;
        if (inv_z > depth_[i]) {
          depth_[i] = inv_z;
          ids_[i] = id;
          colors_[i] = color;
        }
      }
    }
  }

  RenderOutput finish() {
    RenderOutput out;
    out.image = Image(width_, height_, kBackgroundColor);
    for (int y = 0; y < height_; ++y) {
      for (int x = 0; x < width_; ++x) {
        out.image.set(x, y, colors_[static_cast<std::size_t>(y) * width_ + x]);
      }
    }
    out.object_ids = std::move(ids_);
    return out;
  }

 private:
  static double edge(const ScreenVertex& a, const ScreenVertex& b, double px, double py) {
    return (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
  }
  static bool covers(double w, bool top_left) { return w > 0.0 || (w == 0.0 && top_left); }

  int width_;
  int height_;
  std::vector<double> depth_;  // 1/Z, 0 = infinitely far
  std::vector<int> ids_;
  std::vector<Rgb> colors_;
};

}  // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3) {
  for (std::size_t i = 0; i < pixels.size(); i += 3) {
    pixels[i] = fill.r;
    pixels[i + 1] = fill.g;
    pixels[i + 2] = fill.b;
  }
}

Vec3 light_direction() { return normalized(Vec3{0.35, 0.8, 0.5}); }

Rgb shade(Rgb base, const Vec3& normal) {
  const double lambert = std::max(0.0, dot(normalized(normal), light_direction()));
  const double k = kAmbient + kDiffuse * lambert;
  auto channel = [k](std::uint8_t c) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(c * k), 0L, 255L));
  };
  return {channel(base.r), channel(base.g), channel(base.b)};
}

std::vector<SceneObject> scene_objects(const SceneDescription& scene) {
  std::vector<SceneObject> out;
  const SceneConfig& cfg = scene.config;
  const RackPose& pose = scene.rack_pose;
  if (scene.shelves.empty()) return out;
  const double w = cfg.shelf_width_m;
  const double d = cfg.shelf_depth_m;
  const double t = cfg.shelf_thickness_m;
  for (std::size_t i = 0; i < scene.shelves.size(); ++i) {
    const Shelf& shelf = scene.shelves[i];
    const double top = shelf.height_above_ground_m;
    SceneObject board;
    board.box = world_box(pose, {0.0, top - t / 2.0, 0.0}, {w / 2.0, t / 2.0, d / 2.0}, 0.0);
    board.color = kLevelTints[i % kLevelTints.size()];
    board.kind = ObjectKind::ShelfBoard;
    board.shelf = static_cast<int>(i);
    out.push_back(board);
    for (std::size_t k = 0; k < shelf.stacks.size(); ++k) {
      const Stack& s = shelf.stacks[k];
      const double h = s.height_m();
      SceneObject obj;
      obj.box = world_box(pose, {s.center_x_m, top + h / 2.0, s.center_z_m},
                          {s.spec.width_m / 2.0, h / 2.0, s.spec.depth_m / 2.0}, deg_to_rad(s.yaw_deg));
      obj.color = palette_color(s.spec.color_id);
      obj.kind = ObjectKind::Stack;
      obj.shelf = static_cast<int>(i);
      obj.index = static_cast<int>(k);
      out.push_back(obj);
    }
  }
  const double post_top = scene.shelves.back().height_above_ground_m + 0.1;
  const double p = kPostSize;
  int post_index = 0;
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      SceneObject post;
      post.box = world_box(pose, {sx * (w / 2.0 + p / 2.0), post_top / 2.0, sz * (d / 2.0 - p / 2.0)},
                           {p / 2.0, post_top / 2.0, p / 2.0}, 0.0);
      post.color = kPostColor;
      post.kind = ObjectKind::Post;
      post.index = post_index++;
      out.push_back(post);
    }
  }
  for (std::size_t k = 0; k < scene.clutter.size(); ++k) {
    SceneObject obj;
    obj.box = scene.clutter[k].box;
    obj.color = palette_color(scene.clutter[k].color_id);
    obj.kind = ObjectKind::Clutter;
    obj.index = static_cast<int>(k);
    out.push_back(obj);
  }
  return out;
}

RenderOutput rasterize_objects(const std::vector<SceneObject>& objects, const CameraModel& cam,
                               int width, int height) {
  Rasterizer raster(width, height);
  // Quads of the 8 corners (bottom 0..3, top 4..7).
  static constexpr std::array<std::array<int, 4>, 6> kFaces{{
      {0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7},
  }};
  for (std::size_t id = 0; id < objects.size(); ++id) {
    const Cuboid& box = objects[id].box;
    const auto corners = box.corners();
    std::array<Vec3, 8> cam_corners;
    for (std::size_t i = 0; i < 8; ++i) cam_corners[i] = to_camera_frame(cam, corners[i]);
    for (const auto& face : kFaces) {
      const Vec3& a = corners[static_cast<std::size_t>(face[0])];
      Vec3 normal = cross(corners[static_cast<std::size_t>(face[1])] - a,
                          corners[static_cast<std::size_t>(face[2])] - a);
      const Vec3 face_center = (a + corners[static_cast<std::size_t>(face[2])]) * 0.5;
      if (dot(normal, face_center - box.center) < 0.0) normal = normal * -1.0;
      const Rgb color = shade(objects[id].color, normal);
      for (const auto& tri_index : {std::array<int, 3>{face[0], face[1], face[2]},
                                    std::array<int, 3>{face[0], face[2], face[3]}}) {
        const std::array<Vec3, 3> tri{cam_corners[static_cast<std::size_t>(tri_index[0])],
                                      cam_corners[static_cast<std::size_t>(tri_index[1])],
                                      cam_corners[static_cast<std::size_t>(tri_index[2])]};
        const auto poly = clip_near(tri);
        if (poly.size() < 3) continue;
        std::vector<ScreenVertex> screen;
        screen.reserve(poly.size());
        for (const Vec3& p : poly) {
          const Projection q = project_camera_point(cam, p);
          screen.push_back({q.u, q.v, 1.0 / p.z});
        }
        for (std::size_t k = 1; k + 1 < screen.size(); ++k) {
          raster.triangle(screen[0], screen[k], screen[k + 1], static_cast<int>(id), color);
        }
      }
    }
  }
  return raster.finish();
}

Image rasterize(const SceneDescription& scene, const CameraModel& cam, int width, int height) {
  return rasterize_objects(scene_objects(scene), cam, width, height).image;
}

void draw_wireframe(Image& image, const CameraModel& cam, const Cuboid& box, Rgb color) {
  static constexpr std::array<std::array<int, 2>, 12> kEdges{{
      {0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6}, {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7},
  }};
  const auto corners = box.corners();
  for (const auto& e : kEdges) {
    const auto a = try_project(cam, corners[static_cast<std::size_t>(e[0])]);
    const auto b = try_project(cam, corners[static_cast<std::size_t>(e[1])]);
    if (!a || !b) continue;
    const double len = std::max(std::abs(b->u - a->u), std::abs(b->v - a->v));
    const int steps = std::max(1, static_cast<int>(std::ceil(len)));
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      const int x = static_cast<int>(std::floor(a->u + t * (b->u - a->u)));
      const int y = static_cast<int>(std::floor(a->v + t * (b->v - a->v)));
      if (x >= 0 && y >= 0 && x < image.width && y < image.height) image.set(x, y, color);
    }
  }
}

}  // namespace racklay
