#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "racklay/camera.hpp"
#include "racklay/geometry.hpp"
#include "racklay/scenegen.hpp"

namespace racklay {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// Row-major RGB, 8 bits per channel.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int w, int h, Rgb fill = {});

  Rgb at(int x, int y) const {
    const auto i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto i = 3 * (static_cast<std::size_t>(y) * width + x);
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

enum class ObjectKind { ShelfBoard, Post, Stack, Clutter };

struct SceneObject {
  Cuboid box;  // world frame
  Rgb color;
  ObjectKind kind = ObjectKind::Stack;
  int shelf = -1;
  int index = -1;
};

inline constexpr Rgb kBackgroundColor{178, 190, 200};

// Every renderable cuboid of the scene: shelf boards, uprights, stacks, clutter.
// Boards carry a per-level tint so the shelf index is recoverable from the image.
std::vector<SceneObject> scene_objects(const SceneDescription& scene);

struct RenderOutput {
  Image image;
  std::vector<int> object_ids;  // index into the object list, -1 for background
};

// Z-buffered, flat-shaded rasterisation of the given objects.
RenderOutput rasterize_objects(const std::vector<SceneObject>& objects, const CameraModel& cam,
                               int width, int height);

Image rasterize(const SceneDescription& scene, const CameraModel& cam, int width, int height);

// Unit direction pointing toward the light.
Vec3 light_direction();

// Flat-shaded face color for a face normal.
Rgb shade(Rgb base, const Vec3& normal);

// Outline of a cuboid drawn on top of an image (used for overlays).
void draw_wireframe(Image& image, const CameraModel& cam, const Cuboid& box, Rgb color);

}  // namespace racklay
