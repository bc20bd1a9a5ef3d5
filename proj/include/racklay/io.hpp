#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "racklay/camera.hpp"
#include "racklay/gtlayout.hpp"
#include "racklay/render.hpp"
#include "racklay/scenegen.hpp"
#include "json.hpp"

namespace racklay {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// Binary P6, maxval 255.
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

struct GrayImage {
  int width = 0;
  int height = 0;
  int maxval = 255;
  std::vector<std::uint8_t> pixels;
};

// Binary P5 with maxval <= 255.
void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

Json to_json(const BoxSpec& b);
Json to_json(const SceneConfig& cfg);
Json to_json(const SceneVariation& v);
Json to_json(const SceneDescription& scene);
Json to_json(const CameraModel& cam);

BoxSpec box_spec_from_json(const Json& j);
// Missing keys keep the values of `base`, so partial config files work.
SceneConfig scene_config_from_json(const Json& j, const SceneConfig& base = {});
SceneVariation scene_variation_from_json(const Json& j, const SceneVariation& base = {});
SceneDescription scene_from_json(const Json& j);
CameraModel camera_from_json(const Json& j);

// Channel i goes to `<stem>_<i>.pgm` (maxval 2) and the sidecar to `<stem>.json`.
void write_layout(const std::filesystem::path& dir, const std::string& stem, const LayoutTensor& layout,
                  const CameraModel& cam);
LayoutTensor read_layout(const std::filesystem::path& dir, const std::string& stem);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace racklay
