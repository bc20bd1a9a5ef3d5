#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "oracles.hpp"
#include "racklay/gtlayout.hpp"
#include "racklay/io.hpp"

namespace racklay {
namespace {

SceneDescription one_shelf_scene(std::vector<Stack> stacks) {
  SceneDescription s;
  s.config.num_shelves = 1;
  s.shelves.push_back({s.config.bottom_shelf_height_m, 0.0, std::move(stacks)});
  return s;
}

Stack aligned_stack(double w, double d, double h, int layers, double x = 0.0, double z = 0.0) {
  return {{w, d, h, 0}, x, z, 0.0, layers};
}

int count_label(const LayoutTensor& g, int channel, std::uint8_t label) {
  int n = 0;
  for (auto v : g.channel(channel)) n += v == label;
  return n;
}

TEST(GtLayout, MetricScale) {
  EXPECT_DOUBLE_EQ(metric_scale(8.0, 512), 1.5625);
  EXPECT_DOUBLE_EQ(metric_scale(8.0, 64), 12.5);
  EXPECT_DOUBLE_EQ(metric_scale(1.0, 100), 1.0);
  EXPECT_THROW(metric_scale(8.0, 0), std::invalid_argument);
}

TEST(GtLayout, AlignedHalfMetreStackCoversSixteenCells) {
  const auto scene = one_shelf_scene({aligned_stack(0.5, 0.5, 0.375, 1)});
  const auto top = top_layout(scene, CameraModel{}, DetectionWindow{});
  ASSERT_TRUE(top.visible[0]);
  EXPECT_EQ(count_label(top, 0, kOccupied), 16);
}

TEST(GtLayout, TwoQuarterMetreLayersAreFourRowsTall) {
  const auto scene = one_shelf_scene({aligned_stack(0.5, 0.5, 0.25, 2)});
  const auto front = front_layout(scene, CameraModel{}, DetectionWindow{});
  std::set<int> rows;
  std::set<int> cols;
  for (int r = 0; r < front.size; ++r) {
    for (int c = 0; c < front.size; ++c) {
      if (front.at(0, r, c) == kOccupied) {
        rows.insert(r);
        cols.insert(c);
      }
    }
  }
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_EQ(cols.size(), 4u);
  EXPECT_EQ(*rows.rbegin(), front.front_surface_row() - 1);
}

TEST(GtLayout, EmptyShelf) {
  const auto scene = one_shelf_scene({});
  const auto top = top_layout(scene, CameraModel{}, DetectionWindow{});
  const auto front = front_layout(scene, CameraModel{}, DetectionWindow{});
  const double cell = top.cell_m();
  const SceneConfig& cfg = scene.config;
  EXPECT_EQ(count_label(top, 0, kOccupied), 0);
  EXPECT_EQ(count_label(top, 0, kUnoccupied),
            static_cast<int>(std::lround(cfg.shelf_width_m / cell) * std::lround(cfg.shelf_depth_m / cell)));
  EXPECT_EQ(count_label(front, 0, kOccupied), 0);
  // The band covers every row whose center lies in [0, slab).
  int band_rows = 0;
  for (int r = 0; r < front.size; ++r) {
    const double h = front.row_height(r);
    band_rows += h >= 0.0 && h < scene.slab_height_m(0);
  }
  EXPECT_EQ(count_label(front, 0, kUnoccupied), band_rows * static_cast<int>(std::lround(cfg.shelf_width_m / cell)));
  for (int ch = 1; ch < top.channels; ++ch) {
    EXPECT_EQ(count_label(top, ch, kBackground), top.size * top.size);
    EXPECT_EQ(count_label(front, ch, kBackground), front.size * front.size);
  }
}

TEST(GtLayout, RackBeyondRangeIsInvisible) {
  const auto scene = generate_scene(SceneConfig{}, 1);
  CameraModel cam;
  cam.position = {0.0, 1.2, 9.0};
  EXPECT_TRUE(visible_shelf_set(scene, cam, DetectionWindow{}).empty());
  const auto top = top_layout(scene, cam, DetectionWindow{});
  EXPECT_EQ(count_label(top, 0, kBackground) + count_label(top, 1, kBackground) + count_label(top, 2, kBackground) +
                count_label(top, 3, kBackground),
            4 * 64 * 64);
}

TEST(GtLayout, InvisibleShelvesAreBackground) {
  SceneConfig cfg;
  cfg.camera.distance_min_m = cfg.camera.distance_max_m = 1.0;
  cfg.camera.height_frac_min = cfg.camera.height_frac_max = 0.2;
  SplitMix64 rng(1);
  const CameraModel cam = sample_camera(cfg, rng);
  const auto scene = generate_scene(cfg, 11);
  const auto vis = visible_shelf_set(scene, cam, DetectionWindow{});
  ASSERT_LT(vis.size(), 4u);
  for (const auto& g : {top_layout(scene, cam, DetectionWindow{}), front_layout(scene, cam, DetectionWindow{})}) {
    for (int ch = 0; ch < g.channels; ++ch) {
      const bool visible = std::find(vis.begin(), vis.end(), ch) != vis.end();
      EXPECT_EQ(g.visible[static_cast<std::size_t>(ch)] != 0, visible);
      if (!visible) EXPECT_EQ(count_label(g, ch, kBackground), g.size * g.size);
    }
  }
}

class RandomScenes : public ::testing::TestWithParam<int> {};

TEST_P(RandomScenes, MatchBruteForceAndInvariantsHold) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  SplitMix64 rng = substream(seed, 5);
  const SceneConfig cfg = sample_scene_config(SceneConfig{}, SceneVariation{}, rng);
  const auto scene = generate_scene(cfg, seed);
  const CameraModel cam = sample_camera(cfg, rng);
  const DetectionWindow w;
  const auto top = top_layout(scene, cam, w);
  const auto front = front_layout(scene, cam, w);
  EXPECT_EQ(top, oracle::top_layout(scene, cam, w));
  EXPECT_EQ(front, oracle::front_layout(scene, cam, w));
  for (int ch = 0; ch < top.channels; ++ch) {
    std::set<int> top_cols;
    std::set<int> front_cols;
    for (int r = 0; r < top.size; ++r) {
      for (int c = 0; c < top.size; ++c) {
        ASSERT_LT(top.at(ch, r, c), kNumLabels);
        ASSERT_LT(front.at(ch, r, c), kNumLabels);
        if (top.at(ch, r, c) == kOccupied) {
          top_cols.insert(c);
          EXPECT_LE(std::abs(top.col_x(c)), cfg.shelf_width_m / 2.0);
          EXPECT_LE(std::abs(top.row_z(r)), cfg.shelf_depth_m / 2.0);
        }
        if (front.at(ch, r, c) == kOccupied) {
          front_cols.insert(c);
          EXPECT_GE(front.row_height(r), 0.0);
          EXPECT_LT(front.row_height(r), scene.slab_height_m(ch));
        }
      }
    }
    EXPECT_EQ(top_cols, front_cols) << "shelf " << ch;
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomScenes, ::testing::Range(0, 30));

TEST(GtLayout, LayoutFilesRoundTrip) {
  const auto scene = generate_scene(SceneConfig{}, 4);
  const CameraModel cam;
  const auto top = top_layout(scene, cam, DetectionWindow{});
  const auto dir = std::filesystem::temp_directory_path() / "racklay_layout_test";
  std::filesystem::create_directories(dir);
  write_layout(dir, "top", top, cam);
  EXPECT_EQ(read_layout(dir, "top"), top);
  const Json meta = read_json(dir / "top.json");
  EXPECT_EQ(meta.at("view"), "top");
  EXPECT_DOUBLE_EQ(meta.at("cm_per_cell").get<double>(), 12.5);
  const GrayImage pgm = read_pgm(dir / "top_0.pgm");
  EXPECT_EQ(pgm.maxval, 2);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace racklay
