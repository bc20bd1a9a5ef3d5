#include "racklay/dataset.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace racklay {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kVariationStream = 3000;
constexpr std::uint64_t kCameraStream = 1000;

std::string sample_dir_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return std::string("samples/") + buf;
}

std::vector<std::string> channel_paths(const std::string& dir, const std::string& stem, int channels) {
  std::vector<std::string> out;
  for (int c = 0; c < channels; ++c) out.push_back(dir + "/" + stem + "_" + std::to_string(c) + ".pgm");
  return out;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw std::runtime_error("manifest references missing file " + p.string());
}

}  // namespace

const char* split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

Json to_json(const GenConfig& c) {
  return {{"scene", to_json(c.scene)},
          {"variation", to_json(c.variation)},
          {"vary", c.vary},
          {"window", {{"range_m", c.window.range_m}, {"extent_m", c.window.extent_m}, {"grid_size", c.window.grid_size}}},
          {"split_ratio", c.split_ratio}};
}

GenConfig gen_config_from_json(const Json& j, const GenConfig& base) {
  GenConfig c = base;
  if (j.contains("scene")) c.scene = scene_config_from_json(j.at("scene"), base.scene);
  if (j.contains("variation")) c.variation = scene_variation_from_json(j.at("variation"), base.variation);
  if (j.contains("vary")) c.vary = j.at("vary").get<bool>();
  if (j.contains("window")) {
    const Json& w = j.at("window");
    c.window.range_m = w.value("range_m", c.window.range_m);
    c.window.extent_m = w.value("extent_m", c.window.extent_m);
    c.window.grid_size = w.value("grid_size", c.window.grid_size);
  }
  if (j.contains("split_ratio")) c.split_ratio = j.at("split_ratio").get<std::array<int, 3>>();
  if (!(c.window.range_m > 0.0) || !(c.window.extent_m > 0.0) || c.window.grid_size < 1) {
    throw std::invalid_argument("invalid detection window");
  }
  return c;
}

std::vector<int> DatasetManifest::indices(Split s) const {
  std::vector<int> out;
  for (const auto& m : samples) {
    if (m.split == s) out.push_back(m.index);
  }
  return out;
}

Json to_json(const DatasetManifest& m) {
  Json samples = Json::array();
  for (const auto& s : m.samples) {
    samples.push_back({{"index", s.index},
                       {"split", split_name(s.split)},
                       {"seed", s.seed},
                       {"image", s.image},
                       {"top", s.top},
                       {"front", s.front},
                       {"top_meta", s.top_meta},
                       {"front_meta", s.front_meta},
                       {"scene", s.scene},
                       {"camera", s.camera},
                       {"num_shelves", s.num_shelves},
                       {"visible", s.visible}});
  }
  return {{"version", m.version},
          {"seed", m.seed},
          {"channels", m.channels},
          {"grid_size", m.grid_size},
          {"extent_m", m.extent_m},
          {"range_m", m.range_m},
          {"image_width", m.image_width},
          {"image_height", m.image_height},
          {"split_ratio", m.split_ratio},
          {"generator", m.generator},
          {"samples", samples}};
}

DatasetManifest manifest_from_json(const Json& j) {
  DatasetManifest m;
  m.version = j.at("version").get<int>();
  if (m.version != kManifestVersion) {
    throw std::runtime_error("unsupported manifest version " + std::to_string(m.version));
  }
  m.seed = j.at("seed").get<std::uint64_t>();
  m.channels = j.at("channels").get<int>();
  m.grid_size = j.at("grid_size").get<int>();
  m.extent_m = j.at("extent_m").get<double>();
  m.range_m = j.at("range_m").get<double>();
  m.image_width = j.at("image_width").get<int>();
  m.image_height = j.at("image_height").get<int>();
  m.split_ratio = j.at("split_ratio").get<std::array<int, 3>>();
  m.generator = j.at("generator");
  for (const auto& s : j.at("samples")) {
    ManifestSample o;
    o.index = s.at("index").get<int>();
    o.split = parse_split(s.at("split").get<std::string>());
    o.seed = s.at("seed").get<std::uint64_t>();
    o.image = s.at("image").get<std::string>();
    o.top = s.at("top").get<std::vector<std::string>>();
    o.front = s.at("front").get<std::vector<std::string>>();
    o.top_meta = s.at("top_meta").get<std::string>();
    o.front_meta = s.at("front_meta").get<std::string>();
    o.scene = s.at("scene").get<std::string>();
    o.camera = s.at("camera").get<std::string>();
    o.num_shelves = s.at("num_shelves").get<int>();
    o.visible = s.at("visible").get<std::vector<int>>();
    m.samples.push_back(std::move(o));
  }
  return m;
}

DatasetManifest read_manifest(const fs::path& path) { return manifest_from_json(read_json(path)); }

std::vector<Split> assign_splits(int count, const std::array<int, 3>& ratio) {
  const int total = ratio[0] + ratio[1] + ratio[2];
  if (count < 0 || total <= 0 || ratio[0] < 0 || ratio[1] < 0 || ratio[2] < 0) {
    throw std::invalid_argument("invalid split ratio or count");
  }
  const int n_val = count * ratio[1] / total;
  const int n_test = count * ratio[2] / total;
  const int n_train = count - n_val - n_test;
  std::vector<Split> out(static_cast<std::size_t>(count), Split::Train);
  for (int i = n_train; i < n_train + n_val; ++i) out[static_cast<std::size_t>(i)] = Split::Val;
  for (int i = n_train + n_val; i < count; ++i) out[static_cast<std::size_t>(i)] = Split::Test;
  return out;
}

std::uint64_t sample_seed(std::uint64_t dataset_seed, int index) {
  return substream(dataset_seed, static_cast<std::uint64_t>(index) + 1).next();
}

GeneratedSample generate_sample(const GenConfig& cfg, std::uint64_t seed) {
  SceneConfig scene_cfg = cfg.scene;
  if (cfg.vary) {
    SplitMix64 vrng = substream(seed, kVariationStream);
    scene_cfg = sample_scene_config(cfg.scene, cfg.variation, vrng);
  }
  GeneratedSample s;
  s.scene = generate_scene(scene_cfg, seed);
  SplitMix64 crng = substream(seed, kCameraStream);
  s.camera = sample_camera(scene_cfg, crng);
  s.image = rasterize(s.scene, s.camera, s.camera.image_width, s.camera.image_height);
  s.top = top_layout(s.scene, s.camera, cfg.window);
  s.front = front_layout(s.scene, s.camera, cfg.window);
  return s;
}

int worker_count() {
  if (const char* env = std::getenv("RACKLAY_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
    throw std::invalid_argument("RACKLAY_WORKERS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, const std::function<void(int)>& fn) {
  const int workers = std::min(worker_count(), std::max(n, 1));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

DatasetManifest generate_dataset(const GenConfig& cfg, int count, std::uint64_t seed, const fs::path& out_dir) {
  validate(cfg.scene);
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  std::error_code ec;
  fs::create_directories(out_dir / "samples", ec);
  if (ec) throw std::runtime_error("cannot create " + (out_dir / "samples").string() + ": " + ec.message());

  DatasetManifest m;
  m.seed = seed;
  m.channels = cfg.scene.max_shelves;
  m.grid_size = cfg.window.grid_size;
  m.extent_m = cfg.window.extent_m;
  m.range_m = cfg.window.range_m;
  m.image_width = cfg.scene.camera.image_width;
  m.image_height = cfg.scene.camera.image_height;
  m.split_ratio = cfg.split_ratio;
  m.generator = to_json(cfg);
  m.samples.resize(static_cast<std::size_t>(count));
  const auto splits = assign_splits(count, cfg.split_ratio);

  parallel_for(count, [&](int i) {
    const std::uint64_t s = sample_seed(seed, i);
    const GeneratedSample g = generate_sample(cfg, s);
    const std::string rel = sample_dir_name(i);
    const fs::path dir = out_dir / rel;
    fs::create_directories(dir);
    write_ppm(dir / "image.ppm", g.image);
    write_layout(dir, "top", g.top, g.camera);
    write_layout(dir, "front", g.front, g.camera);
    write_json(dir / "scene.json", to_json(g.scene));
    write_json(dir / "camera.json", to_json(g.camera));

    ManifestSample& ms = m.samples[static_cast<std::size_t>(i)];
    ms.index = i;
    ms.split = splits[static_cast<std::size_t>(i)];
    ms.seed = s;
    ms.image = rel + "/image.ppm";
    ms.top = channel_paths(rel, "top", m.channels);
    ms.front = channel_paths(rel, "front", m.channels);
    ms.top_meta = rel + "/top.json";
    ms.front_meta = rel + "/front.json";
    ms.scene = rel + "/scene.json";
    ms.camera = rel + "/camera.json";
    ms.num_shelves = static_cast<int>(g.scene.shelves.size());
    ms.visible = visible_shelf_set(g.scene, g.camera, cfg.window);
  });
  write_json(out_dir / "manifest.json", to_json(m));
  return m;
}

void verify_manifest(const DatasetManifest& m, const fs::path& root) {
  for (const auto& s : m.samples) {
    for (const auto& p : {s.image, s.top_meta, s.front_meta, s.scene, s.camera}) require_file(root / p);
    for (const auto& p : s.top) require_file(root / p);
    for (const auto& p : s.front) require_file(root / p);
    const Sample loaded = load_sample(m, root, s.index);
    if (loaded.image.width != m.image_width || loaded.image.height != m.image_height) {
      throw std::runtime_error("image size mismatch in " + s.image);
    }
    if (loaded.top.channels != m.channels || loaded.top.size != m.grid_size) {
      throw std::runtime_error("layout shape mismatch in " + s.top_meta);
    }
    scene_from_json(read_json(root / s.scene));
    camera_from_json(read_json(root / s.camera));
  }
}

Sample load_sample(const DatasetManifest& m, const fs::path& root, int index) {
  if (index < 0 || index >= static_cast<int>(m.samples.size())) {
    throw std::out_of_range("sample index " + std::to_string(index) + " outside manifest");
  }
  const ManifestSample& s = m.samples[static_cast<std::size_t>(index)];
  const fs::path dir = (root / s.top_meta).parent_path();
  Sample out;
  out.image = read_ppm(root / s.image);
  out.top = read_layout(dir, "top");
  out.front = read_layout(dir, "front");
  return out;
}

std::vector<Sample> load_samples(const DatasetManifest& m, const fs::path& root, const std::vector<int>& indices) {
  std::vector<Sample> out(indices.size());
  parallel_for(static_cast<int>(indices.size()),
               [&](int i) { out[static_cast<std::size_t>(i)] = load_sample(m, root, indices[static_cast<std::size_t>(i)]); });
  return out;
}

SceneDescription load_scene(const DatasetManifest& m, const fs::path& root, int index) {
  return scene_from_json(read_json(root / m.samples.at(static_cast<std::size_t>(index)).scene));
}

}  // namespace racklay
