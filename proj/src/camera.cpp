#include "racklay/camera.hpp"

#include <cmath>
#include <sstream>

namespace racklay {

namespace {

struct Basis {
  Vec3 right;
  Vec3 down;
  Vec3 forward;
};

Basis camera_basis(const CameraModel& cam) {
  const double yaw = deg_to_rad(cam.yaw_deg);
  const double s = std::sin(yaw);
  const double c = std::cos(yaw);
  return {{c, 0.0, -s}, {0.0, -1.0, 0.0}, {-s, 0.0, -c}};
}

}  // namespace

Vec3 to_camera_frame(const CameraModel& cam, const Vec3& world) {
  const Basis b = camera_basis(cam);
  const Vec3 d = world - cam.position;
  return {dot(d, b.right), dot(d, b.down), dot(d, b.forward)};
}

Vec3 from_camera_frame(const CameraModel& cam, const Vec3& p) {
  const Basis b = camera_basis(cam);
  return cam.position + b.right * p.x + b.down * p.y + b.forward * p.z;
}

Projection project_camera_point(const CameraModel& cam, const Vec3& p) {
  if (!(p.z > 0.0)) {
    std::ostringstream msg;
    msg << "point (" << p.x << ", " << p.y << ", " << p.z << ") is behind the camera";
    throw BehindCameraError(msg.str());
  }
  return {cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy, p.z};
}

Projection project(const CameraModel& cam, const Vec3& world) {
  return project_camera_point(cam, to_camera_frame(cam, world));
}

std::optional<Projection> try_project(const CameraModel& cam, const Vec3& world) {
  const Vec3 p = to_camera_frame(cam, world);
  if (!(p.z > 0.0)) return std::nullopt;
  return Projection{cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy, p.z};
}

Vec3 unproject(const CameraModel& cam, double u, double v, double depth) {
  const Vec3 p{(u - cam.cx) * depth / cam.fx, (v - cam.cy) * depth / cam.fy, depth};
  return from_camera_frame(cam, p);
}

}  // namespace racklay
