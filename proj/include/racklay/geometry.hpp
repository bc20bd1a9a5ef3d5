#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace racklay {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(const Vec3& a, double s) { return {a.x * s, a.y * s, a.z * s}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline Vec3 normalized(const Vec3& v) {
  const double len = std::sqrt(dot(v, v));
  return len > 0.0 ? v * (1.0 / len) : v;
}

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

// Rectangle in a horizontal plane, rotated by yaw about the vertical axis.
// Coordinates are (x, z); yaw is counter-clockwise looking down +y.
struct RotatedRect {
  double center_x = 0.0;
  double center_z = 0.0;
  double half_w = 0.0;  // along the local x axis
  double half_d = 0.0;  // along the local z axis
  double yaw_rad = 0.0;

  // Closed containment test in the rectangle's local frame.
  bool contains(double x, double z) const {
    const double c = std::cos(yaw_rad);
    const double s = std::sin(yaw_rad);
    const double dx = x - center_x;
    const double dz = z - center_z;
    const double lx = c * dx - s * dz;
    const double lz = s * dx + c * dz;
    return std::abs(lx) <= half_w && std::abs(lz) <= half_d;
  }

  // Half extents of the axis-aligned bounding box.
  double extent_x() const {
    return half_w * std::abs(std::cos(yaw_rad)) + half_d * std::abs(std::sin(yaw_rad));
  }
  double extent_z() const {
    return half_w * std::abs(std::sin(yaw_rad)) + half_d * std::abs(std::cos(yaw_rad));
  }

  // Corners in counter-clockwise order (x, z).
  std::array<std::array<double, 2>, 4> corners() const;
};

// Separation between two rectangles' footprints: zero when they overlap.
double footprint_distance(const RotatedRect& a, const RotatedRect& b);

// Cuboid with a vertical yaw axis. `center` is the geometric center.
struct Cuboid {
  Vec3 center;
  Vec3 half;  // half extents along the local axes
  double yaw_rad = 0.0;

  RotatedRect footprint() const { return {center.x, center.z, half.x, half.z, yaw_rad}; }
  double volume() const { return 8.0 * half.x * half.y * half.z; }
  std::array<Vec3, 8> corners() const;
};

}  // namespace racklay
