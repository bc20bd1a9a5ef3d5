#include "racklay/geometry.hpp"

#include <algorithm>
#include <limits>

namespace racklay {

namespace {

using Point2 = std::array<double, 2>;

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double abx = b[0] - a[0];
  const double abz = b[1] - a[1];
  const double len2 = abx * abx + abz * abz;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p[0] - a[0]) * abx + (p[1] - a[1]) * abz) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const double dx = p[0] - (a[0] + t * abx);
  const double dz = p[1] - (a[1] + t * abz);
  return std::sqrt(dx * dx + dz * dz);
}

// Separating-axis overlap test for two convex quads.
bool quads_overlap(const std::array<Point2, 4>& a, const std::array<Point2, 4>& b) {
  for (const auto* poly : {&a, &b}) {
    for (int i = 0; i < 4; ++i) {
      const Point2& p0 = (*poly)[i];
      const Point2& p1 = (*poly)[(i + 1) % 4];
      const double nx = p1[1] - p0[1];
      const double nz = p0[0] - p1[0];
      double amin = std::numeric_limits<double>::infinity();
      double amax = -amin;
      double bmin = amin;
      double bmax = -amin;
      for (const Point2& q : a) {
        const double d = q[0] * nx + q[1] * nz;
        amin = std::min(amin, d);
        amax = std::max(amax, d);
      }
      for (const Point2& q : b) {
        const double d = q[0] * nx + q[1] * nz;
        bmin = std::min(bmin, d);
        bmax = std::max(bmax, d);
      }
      if (amax < bmin || bmax < amin) return false;
    }
  }
  return true;
}

}  // namespace

std::array<std::array<double, 2>, 4> RotatedRect::corners() const {
  const double c = std::cos(yaw_rad);
  const double s = std::sin(yaw_rad);
  // Inverse of the rotation used by contains().
  auto to_world = [&](double lx, double lz) -> Point2 {
    return {center_x + c * lx + s * lz, center_z - s * lx + c * lz};
  };
  return {to_world(-half_w, -half_d), to_world(half_w, -half_d), to_world(half_w, half_d),
          to_world(-half_w, half_d)};
}

double footprint_distance(const RotatedRect& a, const RotatedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  if (quads_overlap(ca, cb)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_distance(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment_distance(cb[i], ca[j], ca[(j + 1) % 4]));
    }
  }
  return best;
}

std::array<Vec3, 8> Cuboid::corners() const {
  const auto fp = footprint().corners();
  std::array<Vec3, 8> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = {fp[i][0], center.y - half.y, fp[i][1]};
    out[i + 4] = {fp[i][0], center.y + half.y, fp[i][1]};
  }
  return out;
}

}  // namespace racklay
