#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "racklay/gtlayout.hpp"
#include "racklay/io.hpp"
#include "racklay/scenegen.hpp"

namespace racklay {
namespace {

SceneConfig single_box_config(double width, double box_w, double gap) {
  SceneConfig cfg;
  cfg.shelf_width_m = width;
  cfg.density = 1.0;
  cfg.randomize_occupancy = false;
  cfg.rot_amplitude_deg = 0.0;
  cfg.min_gap_m = gap;
  cfg.box_catalog = {{box_w, 0.5, 0.375, 0}};
  return cfg;
}

// Largest n with n boxes and n - 1 gaps inside the width, found by trying every n.
int brute_capacity(double width, double box_w, double gap) {
  int best = 0;
  for (int n = 1; n < 1000; ++n) {
    if (n * box_w + (n - 1) * gap <= width + 1e-12) best = n;
  }
  return best;
}

TEST(SceneGen, ZeroDensityGivesEmptyShelves) {
  SceneConfig cfg;
  cfg.density = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const Shelf& s : generate_scene(cfg, seed).shelves) EXPECT_TRUE(s.stacks.empty());
  }
}

TEST(SceneGen, SameSeedSameScene) {
  SceneConfig cfg;
  cfg.background_clutter = true;
  const auto a = generate_scene(cfg, 42);
  const auto b = generate_scene(cfg, 42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_NE(to_json(a).dump(), to_json(generate_scene(cfg, 43)).dump());
}

TEST(SceneGen, FullDensityMatchesGreedyCapacity) {
  for (double width : {1.8, 2.0, 2.2, 2.6}) {
    for (double box_w : {0.5, 0.625, 0.75}) {
      for (double gap : {0.25, 0.375}) {
        const SceneConfig cfg = single_box_config(width, box_w, gap);
        const int expected = static_cast<int>(std::floor((width + gap) / (box_w + gap) + 1e-12));
        ASSERT_EQ(expected, brute_capacity(width, box_w, gap));
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
          for (const Shelf& s : generate_scene(cfg, seed).shelves) {
            EXPECT_EQ(static_cast<int>(s.stacks.size()), expected)
                << "width " << width << " box " << box_w << " gap " << gap;
          }
        }
      }
    }
  }
}

TEST(SceneGen, GapWiderThanShelfAllowsOneStack) {
  SceneConfig cfg;
  cfg.min_gap_m = 3.0;
  cfg.randomize_occupancy = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const Shelf& s : generate_scene(cfg, seed).shelves) EXPECT_LE(s.stacks.size(), 1u);
  }
}

TEST(SceneGen, ZeroRotationAmplitudeGivesZeroYaw) {
  SceneConfig cfg;
  cfg.rot_amplitude_deg = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const Shelf& s : generate_scene(cfg, seed).shelves) {
      for (const Stack& st : s.stacks) EXPECT_EQ(st.yaw_deg, 0.0);
    }
  }
}

TEST(SceneGen, StackInvariantsHoldOnEveryScene) {
  SplitMix64 rng(9);
  const SceneVariation var;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const SceneConfig cfg = sample_scene_config(SceneConfig{}, var, rng);
    const SceneDescription scene = generate_scene(cfg, seed);
    ASSERT_EQ(static_cast<int>(scene.shelves.size()), cfg.num_shelves);
    for (std::size_t i = 0; i < scene.shelves.size(); ++i) {
      const Shelf& shelf = scene.shelves[i];
      EXPECT_NEAR(shelf.height_above_ground_m, cfg.bottom_shelf_height_m + i * cfg.inter_shelf_height_m, 1e-12);
      for (std::size_t a = 0; a < shelf.stacks.size(); ++a) {
        const Stack& s = shelf.stacks[a];
        EXPECT_LE(std::abs(s.yaw_deg), cfg.rot_amplitude_deg);
        EXPECT_GE(s.layers, 1);
        EXPECT_LE(s.layers, cfg.max_stack_layers);
        EXPECT_LE(s.height_m(), scene.slab_height_m(static_cast<int>(i)));
        for (const auto& c : s.footprint().corners()) {
          EXPECT_LE(std::abs(c[0]), cfg.shelf_width_m / 2.0 + 1e-9);
          EXPECT_LE(std::abs(c[1]), cfg.shelf_depth_m / 2.0 + 1e-9);
        }
        for (std::size_t b = a + 1; b < shelf.stacks.size(); ++b) {
          EXPECT_GE(footprint_distance(s.footprint(), shelf.stacks[b].footprint()), cfg.min_gap_m - 1e-9);
        }
      }
    }
  }
}

TEST(SceneGen, MeanOccupancyAtHalfDensity) {
  SceneConfig cfg;
  cfg.density = 0.5;
  double sum = 0.0;
  int n = 0;
  for (std::uint64_t seed = 0; n < 1000; ++seed) {
    for (const Shelf& s : generate_scene(cfg, seed).shelves) {
      sum += occupancy_fraction(s, cfg.shelf_width_m);
      ++n;
    }
  }
  EXPECT_NEAR(sum / n, 0.25, 0.05);
}

TEST(SceneGen, TargetOccupancyIsUniformTimesDensity) {
  SceneConfig cfg;
  cfg.density = 0.7;
  std::vector<double> u;
  for (std::uint64_t seed = 0; u.size() < 1200; ++seed) {
    for (const Shelf& s : generate_scene(cfg, seed).shelves) u.push_back(s.target_occupancy / cfg.density);
  }
  std::sort(u.begin(), u.end());
  double ks = 0.0;
  const double n = static_cast<double>(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    ks = std::max({ks, std::abs((i + 1) / n - u[i]), std::abs(u[i] - i / n)});
  }
  // 5% critical value of the one-sample KS statistic.
  EXPECT_LT(ks, 1.36 / std::sqrt(n));
}

TEST(SceneGen, ValidateRejectsBadConfigs) {
  SceneConfig cfg;
  cfg.density = 1.5;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.num_shelves = 5;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  cfg = {};
  cfg.box_catalog = {{3.0, 0.5, 0.3, 0}};
  EXPECT_THROW(generate_scene(cfg, 1), std::invalid_argument);
  cfg = {};
  cfg.shelf_depth_m = -1.0;
  EXPECT_THROW(validate(cfg), std::invalid_argument);
  EXPECT_NO_THROW(validate(SceneConfig{}));
}

TEST(SceneGen, DefaultCatalogSpansThreeCells) {
  const double cell = metric_scale(8.0, 64) / 100.0;
  const auto catalog = default_box_catalog();
  EXPECT_EQ(catalog.size(), 8u);
  for (const BoxSpec& b : catalog) {
    EXPECT_GE(std::min(b.width_m, b.depth_m), 3 * cell);
    EXPECT_GE(b.height_m, 3 * cell);
  }
}

TEST(SceneGen, CameraIsLevel) {
  SceneConfig cfg;
  SplitMix64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const CameraModel cam = sample_camera(cfg, rng);
    EXPECT_EQ(cam.pitch_deg(), 0.0);
    EXPECT_EQ(cam.roll_deg(), 0.0);
    EXPECT_GE(cam.position.z - cfg.shelf_depth_m / 2.0, cfg.camera.distance_min_m);
    EXPECT_LE(cam.position.z - cfg.shelf_depth_m / 2.0, cfg.camera.distance_max_m);
  }
}

TEST(SceneGen, FarMidRackCameraSeesEveryShelf) {
  SceneConfig cfg;
  cfg.camera.distance_min_m = cfg.camera.distance_max_m = 3.2;
  cfg.camera.height_frac_min = cfg.camera.height_frac_max = 0.5;
  SplitMix64 rng(1);
  const CameraModel cam = sample_camera(cfg, rng);
  const auto scene = generate_scene(cfg, 1);
  const DetectionWindow w;
  EXPECT_EQ(oracle::visible_shelves(scene, cam, w).size(), 4u);
  EXPECT_EQ(visible_shelf_set(scene, cam, w), oracle::visible_shelves(scene, cam, w));
}

TEST(SceneGen, LowCloseCameraSeesFewerShelves) {
  SceneConfig cfg;
  cfg.camera.distance_min_m = cfg.camera.distance_max_m = 1.0;
  cfg.camera.height_frac_min = cfg.camera.height_frac_max = 1.0 / 4.1;  // near the bottom shelf
  SplitMix64 rng(1);
  const CameraModel cam = sample_camera(cfg, rng);
  const auto scene = generate_scene(cfg, 1);
  const auto vis = visible_shelf_set(scene, cam, DetectionWindow{});
  EXPECT_LT(vis.size(), 4u);
  EXPECT_FALSE(vis.empty());
  EXPECT_EQ(vis, oracle::visible_shelves(scene, cam, DetectionWindow{}));
}

TEST(SceneGen, CameraSweepCoversOneToAllShelves) {
  SceneConfig cfg;
  SplitMix64 rng(5);
  std::vector<int> seen(5, 0);
  for (int i = 0; i < 300; ++i) {
    const CameraModel cam = sample_camera(cfg, rng);
    seen[visible_shelf_set(generate_scene(cfg, 1), cam, DetectionWindow{}).size()] = 1;
  }
  for (int k = 1; k <= 4; ++k) EXPECT_TRUE(seen[static_cast<std::size_t>(k)]) << k << " visible shelves never sampled";
}

TEST(SceneGen, ClutterStaysBeyondRange) {
  SceneConfig cfg;
  cfg.background_clutter = true;
  SplitMix64 rng(2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const CameraModel cam = sample_camera(cfg, rng);
    const auto scene = generate_scene(cfg, seed);
    ASSERT_FALSE(scene.clutter.empty());
    for (const auto& c : scene.clutter) {
      EXPECT_GE(cam.position.z - (c.box.center.z + c.box.footprint().extent_z()), cfg.clutter_min_distance_m - 1e-9);
    }
  }
}

}  // namespace
}  // namespace racklay
