#pragma once

#include <optional>
#include <stdexcept>

#include "racklay/geometry.hpp"

namespace racklay {

// Pinhole camera whose image plane is orthogonal to the ground: pitch and
// roll are fixed at zero, only yaw about the world vertical is free.
//
// World frame: x right along the rack face, y up, z out of the rack face
// toward the camera. Camera frame: X right, Y down, Z forward (optical axis).
struct CameraModel {
  double fx = 110.0;
  double fy = 110.0;
  double cx = 64.0;
  double cy = 64.0;
  Vec3 position{0.0, 1.5, 3.5};
  double yaw_deg = 0.0;
  int image_width = 128;
  int image_height = 128;

  double pitch_deg() const { return 0.0; }
  double roll_deg() const { return 0.0; }
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

class BehindCameraError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

Vec3 to_camera_frame(const CameraModel& cam, const Vec3& world);
Vec3 from_camera_frame(const CameraModel& cam, const Vec3& camera_point);

// Pinhole projection of a camera-frame point. Throws BehindCameraError for Z <= 0.
Projection project_camera_point(const CameraModel& cam, const Vec3& camera_point);

// Pinhole projection of a world point. Throws BehindCameraError for Z <= 0.
Projection project(const CameraModel& cam, const Vec3& world);

// Non-throwing variant; empty when the point is not in front of the camera.
std::optional<Projection> try_project(const CameraModel& cam, const Vec3& world);

// World point at pixel (u, v) and camera-frame depth.
Vec3 unproject(const CameraModel& cam, double u, double v, double depth);

}  // namespace racklay
