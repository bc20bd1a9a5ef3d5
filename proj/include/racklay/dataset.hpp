#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "racklay/gtlayout.hpp"
#include "racklay/io.hpp"
#include "racklay/racklaynet.hpp"
#include "racklay/scenegen.hpp"

namespace racklay {

inline constexpr int kManifestVersion = 1;

enum class Split { Train, Val, Test };
const char* split_name(Split s);
Split parse_split(const std::string& name);

// Everything `gen` needs. `vary` draws per-scene parameters from `variation`
// on top of `scene`; otherwise every scene uses `scene` as is.
struct GenConfig {
  SceneConfig scene;
  SceneVariation variation;
  bool vary = true;
  DetectionWindow window;
  std::array<int, 3> split_ratio{4, 1, 1};  // train : val : test

  friend bool operator==(const GenConfig&, const GenConfig&) = default;
};

Json to_json(const GenConfig& cfg);
GenConfig gen_config_from_json(const Json& j, const GenConfig& base = {});

struct ManifestSample {
  int index = 0;
  Split split = Split::Train;
  std::uint64_t seed = 0;
  std::string image;
  std::vector<std::string> top;
  std::vector<std::string> front;
  std::string top_meta;
  std::string front_meta;
  std::string scene;
  std::string camera;
  int num_shelves = 0;
  std::vector<int> visible;

  friend bool operator==(const ManifestSample&, const ManifestSample&) = default;
};

struct DatasetManifest {
  int version = kManifestVersion;
  std::uint64_t seed = 0;
  int channels = 4;
  int grid_size = 64;
  double extent_m = 8.0;
  double range_m = 5.0;
  int image_width = 128;
  int image_height = 128;
  std::array<int, 3> split_ratio{4, 1, 1};
  Json generator;  // the GenConfig used
  std::vector<ManifestSample> samples;

  std::vector<int> indices(Split s) const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

Json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const Json& j);
DatasetManifest read_manifest(const std::filesystem::path& path);

// Contiguous split: the first block is train, then val, then test. The val
// and test blocks get floor(count * ratio / total) samples each.
std::vector<Split> assign_splits(int count, const std::array<int, 3>& ratio);

// Per-sample seed derived from the dataset seed.
std::uint64_t sample_seed(std::uint64_t dataset_seed, int index);

struct GeneratedSample {
  SceneDescription scene;
  CameraModel camera;
  Image image;
  LayoutTensor top;
  LayoutTensor front;
};

GeneratedSample generate_sample(const GenConfig& cfg, std::uint64_t seed);

// Worker count from RACKLAY_WORKERS, else the hardware concurrency.
int worker_count();
// Runs fn(i) for i in [0, n) on the worker pool; rethrows the first failure.
void parallel_for(int n, const std::function<void(int)>& fn);

DatasetManifest generate_dataset(const GenConfig& cfg, int count, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

// Checks that every referenced file exists and parses.
void verify_manifest(const DatasetManifest& m, const std::filesystem::path& root);

Sample load_sample(const DatasetManifest& m, const std::filesystem::path& root, int index);
std::vector<Sample> load_samples(const DatasetManifest& m, const std::filesystem::path& root,
                                 const std::vector<int>& indices);
SceneDescription load_scene(const DatasetManifest& m, const std::filesystem::path& root, int index);

}  // namespace racklay
