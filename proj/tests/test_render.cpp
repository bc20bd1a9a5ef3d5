#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "racklay/camera.hpp"
#include "racklay/io.hpp"
#include "racklay/render.hpp"

namespace racklay {
namespace {

TEST(Camera, OpticalAxisProjectsToPrincipalPoint) {
  CameraModel cam;
  cam.yaw_deg = 17.0;
  for (double z : {0.1, 1.0, 7.5}) {
    const Projection p = project_camera_point(cam, {0.0, 0.0, z});
    EXPECT_DOUBLE_EQ(p.u, cam.cx);
    EXPECT_DOUBLE_EQ(p.v, cam.cy);
    EXPECT_DOUBLE_EQ(p.depth, z);
  }
}

TEST(Camera, WorkedProjectionExample) {
  CameraModel cam;
  cam.fx = cam.fy = 100.0;
  cam.cx = cam.cy = 64.0;
  const Projection p = project_camera_point(cam, {1.0, 0.0, 2.0});
  EXPECT_DOUBLE_EQ(p.u, 114.0);
  EXPECT_DOUBLE_EQ(p.v, 64.0);
}

TEST(Camera, UnprojectInvertsProject) {
  SplitMix64 rng(4);
  for (int i = 0; i < 200; ++i) {
    CameraModel cam;
    cam.yaw_deg = rng.uniform(-40.0, 40.0);
    cam.position = {rng.uniform(-1, 1), rng.uniform(0, 2), rng.uniform(2, 4)};
    const Vec3 p{rng.uniform(-1, 1), rng.uniform(0, 2), rng.uniform(-0.5, 0.5)};
    const Projection q = project(cam, p);
    const Vec3 back = unproject(cam, q.u, q.v, q.depth);
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
    EXPECT_NEAR(back.z, p.z, 1e-9);
  }
}

TEST(Camera, BehindCameraIsRejected) {
  CameraModel cam;
  EXPECT_THROW(project(cam, cam.position + Vec3{0.0, 0.0, 1.0}), BehindCameraError);
  EXPECT_THROW(project(cam, cam.position), BehindCameraError);
  EXPECT_FALSE(try_project(cam, cam.position + Vec3{0.0, 0.0, 1.0}).has_value());
}

TEST(Render, EmptySceneIsBackground) {
  const Image img = rasterize(SceneDescription{}, CameraModel{}, 128, 128);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) ASSERT_EQ(img.at(x, y), kBackgroundColor);
  }
}

TEST(Render, NearerStackWinsOverlap) {
  CameraModel cam;
  cam.position = {0.0, 0.5, 4.0};
  SceneObject far{{{0.0, 0.5, 0.0}, {0.5, 0.5, 0.5}, 0.0}, {200, 0, 0}};
  SceneObject near{{{0.2, 0.5, 1.5}, {0.2, 0.2, 0.2}, 0.0}, {0, 0, 200}};
  for (const auto& objects : {std::vector{far, near}, std::vector{near, far}}) {
    const RenderOutput out = rasterize_objects(objects, cam, 128, 128);
    const auto q = project(cam, near.box.center + Vec3{0.0, 0.0, near.box.half.z});
    const int id = out.object_ids[static_cast<std::size_t>(q.v) * 128 + static_cast<std::size_t>(q.u)];
    EXPECT_EQ(objects[static_cast<std::size_t>(id)].color.b, 200);
    EXPECT_EQ(out.image.at(static_cast<int>(q.u), static_cast<int>(q.v)), shade(near.color, {0, 0, 1}));
  }
}

TEST(Render, SingleCuboidMatchesRayCast) {
  CameraModel cam;
  cam.fx = cam.fy = 55.0;
  cam.cx = cam.cy = 32.0;
  cam.position = {0.1, 1.3, 3.0};
  const std::vector<SceneObject> objects{{{{0.0, 0.6, 0.0}, {0.4, 0.3, 0.35}, 0.0}, {180, 120, 60}}};
  const RenderOutput a = rasterize_objects(objects, cam, 64, 64);
  const RenderOutput b = oracle::raycast(objects, cam, 64, 64);
  EXPECT_EQ(a.object_ids, b.object_ids);
  EXPECT_EQ(a.image, b.image);
  EXPECT_GT(std::count(a.object_ids.begin(), a.object_ids.end(), 0), 100);
}

TEST(Render, RandomScenesMatchRayCast) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = oracle::random_render_case(seed, 64);
    const auto objects = scene_objects(c.scene);
    const RenderOutput a = rasterize_objects(objects, c.camera, 64, 64);
    const RenderOutput b = oracle::raycast(objects, c.camera, 64, 64);
    int mismatches = 0;
    for (std::size_t i = 0; i < a.object_ids.size(); ++i) mismatches += a.object_ids[i] != b.object_ids[i];
    EXPECT_EQ(mismatches, 0) << "seed " << seed;
    EXPECT_EQ(a.image, b.image) << "seed " << seed;
  }
}

TEST(Render, Deterministic) {
  const auto c = oracle::random_render_case(3, 128);
  EXPECT_EQ(rasterize(c.scene, c.camera, 128, 128), rasterize(c.scene, c.camera, 128, 128));
}

TEST(Render, RemovingAnObjectOnlyChangesItsPixels) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = oracle::random_render_case(seed, 64);
    auto objects = scene_objects(c.scene);
    const RenderOutput full = rasterize_objects(objects, c.camera, 64, 64);
    SplitMix64 rng(seed);
    const auto victim = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(objects.size()) - 1));
    auto fewer = objects;
    fewer.erase(fewer.begin() + static_cast<std::ptrdiff_t>(victim));
    const RenderOutput part = rasterize_objects(fewer, c.camera, 64, 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const int id = full.object_ids[static_cast<std::size_t>(y) * 64 + x];
        if (id == static_cast<int>(victim)) continue;
        ASSERT_EQ(full.image.at(x, y), part.image.at(x, y)) << "seed " << seed << " pixel " << x << "," << y;
      }
    }
  }
}

TEST(Render, OnlyUpwardFacesGetFullLight) {
  const Rgb base{100, 100, 100};
  EXPECT_EQ(shade(base, light_direction()), (Rgb{100, 100, 100}));
  EXPECT_EQ(shade(base, light_direction() * -1.0), (Rgb{45, 45, 45}));
}

TEST(Render, PpmRoundTrip) {
  const auto c = oracle::random_render_case(5, 64);
  const Image img = rasterize(c.scene, c.camera, 64, 48);
  const auto path = std::filesystem::temp_directory_path() / "racklay_render_test.ppm";
  write_ppm(path, img);
  EXPECT_EQ(read_ppm(path), img);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace racklay
