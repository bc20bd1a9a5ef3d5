#include "racklay/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace racklay {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void io_fail(const std::string& what, const fs::path& path) {
  throw std::runtime_error(what + ": " + path.string());
}

// Reads the whitespace/comment separated header fields of a PNM file.
int pnm_field(std::istream& is, const fs::path& path) {
  int c = is.peek();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
    } else {
      is.get();
    }
    c = is.peek();
  }
  int v = 0;
  if (!(is >> v)) io_fail("malformed PNM header", path);
  return v;
}

std::vector<std::uint8_t> pnm_read(const fs::path& path, const char* magic, int& w, int& h, int& maxval,
                                   int components) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail("cannot open", path);
  std::string m(2, '\0');
  if (!is.read(m.data(), 2) || m != magic) io_fail(std::string("expected ") + magic + " file", path);
  w = pnm_field(is, path);
  h = pnm_field(is, path);
  maxval = pnm_field(is, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) io_fail("unsupported PNM dimensions", path);
  is.get();
  std::vector<std::uint8_t> data(static_cast<std::size_t>(w) * h * components);
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size()))) {
    io_fail("truncated PNM data", path);
  }
  return data;
}

void pnm_write(const fs::path& path, const char* magic, int w, int h, int maxval,
               const std::vector<std::uint8_t>& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) io_fail("cannot write", path);
  os << magic << '\n' << w << ' ' << h << '\n' << maxval << '\n';
  os.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!os) io_fail("failed writing", path);
}

Json vec_json(const Vec3& v) { return Json::array({v.x, v.y, v.z}); }
Vec3 vec_from(const Json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Json cuboid_json(const Cuboid& c) {
  return {{"center", vec_json(c.center)}, {"half_extents", vec_json(c.half)}, {"yaw_rad", c.yaw_rad}};
}
Cuboid cuboid_from(const Json& j) {
  return {vec_from(j.at("center")), vec_from(j.at("half_extents")), j.at("yaw_rad").get<double>()};
}

}  // namespace

void write_ppm(const fs::path& path, const Image& image) {
  pnm_write(path, "P6", image.width, image.height, 255, image.pixels);
}

Image read_ppm(const fs::path& path) {
  Image img;
  int maxval = 0;
  img.pixels = pnm_read(path, "P6", img.width, img.height, maxval, 3);
  if (maxval != 255) io_fail("expected maxval 255", path);
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  pnm_write(path, "P5", image.width, image.height, image.maxval, image.pixels);
}

GrayImage read_pgm(const fs::path& path) {
  GrayImage img;
  img.pixels = pnm_read(path, "P5", img.width, img.height, img.maxval, 1);
  return img;
}

Json to_json(const BoxSpec& b) {
  return {{"width_m", b.width_m}, {"depth_m", b.depth_m}, {"height_m", b.height_m}, {"color_id", b.color_id}};
}

BoxSpec box_spec_from_json(const Json& j) {
  BoxSpec b;
  b.width_m = j.at("width_m").get<double>();
  b.depth_m = j.at("depth_m").get<double>();
  b.height_m = j.at("height_m").get<double>();
  take(j, "color_id", b.color_id);
  return b;
}

Json to_json(const SceneConfig& c) {
  Json catalog = Json::array();
  for (const auto& b : c.box_catalog) catalog.push_back(to_json(b));
  const CameraRanges& r = c.camera;
  return {
      {"num_shelves", c.num_shelves},
      {"max_shelves", c.max_shelves},
      {"shelf_width_m", c.shelf_width_m},
      {"shelf_depth_m", c.shelf_depth_m},
      {"inter_shelf_height_m", c.inter_shelf_height_m},
      {"shelf_thickness_m", c.shelf_thickness_m},
      {"bottom_shelf_height_m", c.bottom_shelf_height_m},
      {"density", c.density},
      {"randomize_occupancy", c.randomize_occupancy},
      {"max_stack_layers", c.max_stack_layers},
      {"min_gap_m", c.min_gap_m},
      {"rot_amplitude_deg", c.rot_amplitude_deg},
      {"depth_jitter_m", c.depth_jitter_m},
      {"max_placement_attempts", c.max_placement_attempts},
      {"box_catalog", catalog},
      {"background_clutter", c.background_clutter},
      {"clutter_min_distance_m", c.clutter_min_distance_m},
      {"camera",
       {{"fx", r.fx},
        {"fy", r.fy},
        {"image_width", r.image_width},
        {"image_height", r.image_height},
        {"distance_min_m", r.distance_min_m},
        {"distance_max_m", r.distance_max_m},
        {"margin_below_m", r.margin_below_m},
        {"margin_above_m", r.margin_above_m},
        {"height_frac_min", r.height_frac_min},
        {"height_frac_max", r.height_frac_max},
        {"lateral_min_m", r.lateral_min_m},
        {"lateral_max_m", r.lateral_max_m}}},
  };
}

SceneConfig scene_config_from_json(const Json& j, const SceneConfig& base) {
  SceneConfig c = base;
  take(j, "num_shelves", c.num_shelves);
  take(j, "max_shelves", c.max_shelves);
  take(j, "shelf_width_m", c.shelf_width_m);
  take(j, "shelf_depth_m", c.shelf_depth_m);
  take(j, "inter_shelf_height_m", c.inter_shelf_height_m);
  take(j, "shelf_thickness_m", c.shelf_thickness_m);
  take(j, "bottom_shelf_height_m", c.bottom_shelf_height_m);
  take(j, "density", c.density);
  take(j, "randomize_occupancy", c.randomize_occupancy);
  take(j, "max_stack_layers", c.max_stack_layers);
  take(j, "min_gap_m", c.min_gap_m);
  take(j, "rot_amplitude_deg", c.rot_amplitude_deg);
  take(j, "depth_jitter_m", c.depth_jitter_m);
  take(j, "max_placement_attempts", c.max_placement_attempts);
  if (j.contains("box_catalog")) {
    c.box_catalog.clear();
    for (const auto& b : j.at("box_catalog")) c.box_catalog.push_back(box_spec_from_json(b));
  }
  take(j, "background_clutter", c.background_clutter);
  take(j, "clutter_min_distance_m", c.clutter_min_distance_m);
  if (j.contains("camera")) {
    const Json& r = j.at("camera");
    CameraRanges& o = c.camera;
    take(r, "fx", o.fx);
    take(r, "fy", o.fy);
    take(r, "image_width", o.image_width);
    take(r, "image_height", o.image_height);
    take(r, "distance_min_m", o.distance_min_m);
    take(r, "distance_max_m", o.distance_max_m);
    take(r, "margin_below_m", o.margin_below_m);
    take(r, "margin_above_m", o.margin_above_m);
    take(r, "height_frac_min", o.height_frac_min);
    take(r, "height_frac_max", o.height_frac_max);
    take(r, "lateral_min_m", o.lateral_min_m);
    take(r, "lateral_max_m", o.lateral_max_m);
  }
  return c;
}

Json to_json(const SceneVariation& v) {
  return {{"num_shelves_min", v.num_shelves_min},
          {"num_shelves_max", v.num_shelves_max},
          {"shelf_width_min_m", v.shelf_width_min_m},
          {"shelf_width_max_m", v.shelf_width_max_m},
          {"inter_shelf_height_min_m", v.inter_shelf_height_min_m},
          {"inter_shelf_height_max_m", v.inter_shelf_height_max_m},
          {"max_stack_layers_min", v.max_stack_layers_min},
          {"max_stack_layers_max", v.max_stack_layers_max},
          {"clutter_probability", v.clutter_probability}};
}

SceneVariation scene_variation_from_json(const Json& j, const SceneVariation& base) {
  SceneVariation v = base;
  take(j, "num_shelves_min", v.num_shelves_min);
  take(j, "num_shelves_max", v.num_shelves_max);
  take(j, "shelf_width_min_m", v.shelf_width_min_m);
  take(j, "shelf_width_max_m", v.shelf_width_max_m);
  take(j, "inter_shelf_height_min_m", v.inter_shelf_height_min_m);
  take(j, "inter_shelf_height_max_m", v.inter_shelf_height_max_m);
  take(j, "max_stack_layers_min", v.max_stack_layers_min);
  take(j, "max_stack_layers_max", v.max_stack_layers_max);
  take(j, "clutter_probability", v.clutter_probability);
  return v;
}

Json to_json(const SceneDescription& s) {
  Json shelves = Json::array();
  for (const Shelf& sh : s.shelves) {
    Json stacks = Json::array();
    for (const Stack& st : sh.stacks) {
      stacks.push_back({{"spec", to_json(st.spec)},
                        {"center_x_m", st.center_x_m},
                        {"center_z_m", st.center_z_m},
                        {"yaw_deg", st.yaw_deg},
                        {"layers", st.layers}});
    }
    shelves.push_back({{"height_above_ground_m", sh.height_above_ground_m},
                       {"target_occupancy", sh.target_occupancy},
                       {"stacks", stacks}});
  }
  Json clutter = Json::array();
  for (const ClutterObject& c : s.clutter) clutter.push_back({{"box", cuboid_json(c.box)}, {"color_id", c.color_id}});
  return {{"version", kSchemaVersion},
          {"units", "meters"},
          {"config", to_json(s.config)},
          {"rack_pose", {{"position", vec_json(s.rack_pose.position)}, {"yaw_deg", s.rack_pose.yaw_deg}}},
          {"shelves", shelves},
          {"clutter", clutter}};
}

SceneDescription scene_from_json(const Json& j) {
  SceneDescription s;
  s.config = scene_config_from_json(j.at("config"));
  s.rack_pose.position = vec_from(j.at("rack_pose").at("position"));
  s.rack_pose.yaw_deg = j.at("rack_pose").at("yaw_deg").get<double>();
  for (const auto& sh : j.at("shelves")) {
    Shelf shelf;
    shelf.height_above_ground_m = sh.at("height_above_ground_m").get<double>();
    take(sh, "target_occupancy", shelf.target_occupancy);
    for (const auto& st : sh.at("stacks")) {
      Stack stack;
      stack.spec = box_spec_from_json(st.at("spec"));
      stack.center_x_m = st.at("center_x_m").get<double>();
      stack.center_z_m = st.at("center_z_m").get<double>();
      stack.yaw_deg = st.at("yaw_deg").get<double>();
      stack.layers = st.at("layers").get<int>();
      shelf.stacks.push_back(stack);
    }
    s.shelves.push_back(std::move(shelf));
  }
  for (const auto& c : j.at("clutter")) s.clutter.push_back({cuboid_from(c.at("box")), c.at("color_id").get<int>()});
  return s;
}

Json to_json(const CameraModel& c) {
  return {{"version", kSchemaVersion},
          {"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"position", vec_json(c.position)},
          {"yaw_deg", c.yaw_deg},
          {"pitch_deg", c.pitch_deg()},
          {"roll_deg", c.roll_deg()},
          {"image_width", c.image_width},
          {"image_height", c.image_height}};
}

CameraModel camera_from_json(const Json& j) {
  CameraModel c;
  c.fx = j.at("fx").get<double>();
  c.fy = j.at("fy").get<double>();
  c.cx = j.at("cx").get<double>();
  c.cy = j.at("cy").get<double>();
  c.position = vec_from(j.at("position"));
  c.yaw_deg = j.at("yaw_deg").get<double>();
  c.image_width = j.at("image_width").get<int>();
  c.image_height = j.at("image_height").get<int>();
  if (j.value("pitch_deg", 0.0) != 0.0 || j.value("roll_deg", 0.0) != 0.0) {
    throw std::invalid_argument("camera pitch and roll must be zero");
  }
  return c;
}

void write_layout(const fs::path& dir, const std::string& stem, const LayoutTensor& layout, const CameraModel& cam) {
  for (int c = 0; c < layout.channels; ++c) {
    GrayImage img;
    img.width = layout.size;
    img.height = layout.size;
    img.maxval = 2;
    const auto ch = layout.channel(c);
    img.pixels.assign(ch.begin(), ch.end());
    write_pgm(dir / (stem + "_" + std::to_string(c) + ".pgm"), img);
  }
  Json visible = Json::array();
  for (auto v : layout.visible) visible.push_back(v != 0);
  write_json(dir / (stem + ".json"), {{"version", kSchemaVersion},
                                      {"view", view_name(layout.view)},
                                      {"channels", layout.channels},
                                      {"grid_size", layout.size},
                                      {"extent_m", layout.extent_m},
                                      {"cm_per_cell", metric_scale(layout.extent_m, layout.size)},
                                      {"front_surface_row", layout.front_surface_row()},
                                      {"visible", visible},
                                      {"labels", {{"background", 0}, {"unoccupied", 1}, {"occupied", 2}}},
                                      {"camera", to_json(cam)}});
}

LayoutTensor read_layout(const fs::path& dir, const std::string& stem) {
  const Json side = read_json(dir / (stem + ".json"));
  LayoutTensor layout(parse_view(side.at("view").get<std::string>()), side.at("channels").get<int>(),
                      side.at("grid_size").get<int>(), side.at("extent_m").get<double>());
  const auto& vis = side.at("visible");
  for (int c = 0; c < layout.channels; ++c) {
    layout.visible[static_cast<std::size_t>(c)] = vis.at(static_cast<std::size_t>(c)).get<bool>() ? 1 : 0;
    const fs::path p = dir / (stem + "_" + std::to_string(c) + ".pgm");
    const GrayImage img = read_pgm(p);
    if (img.width != layout.size || img.height != layout.size) io_fail("layout channel has wrong size", p);
    auto ch = layout.channel(c);
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (img.pixels[i] >= kNumLabels) io_fail("layout label out of range", p);
      ch[i] = img.pixels[i];
    }
  }
  return layout;
}

Json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) io_fail("cannot open", path);
  try {
    return Json::parse(is);
  } catch (const Json::exception& e) {
    throw std::runtime_error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) io_fail("cannot write", path);
  os << text;
  if (!os) io_fail("failed writing", path);
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) io_fail("cannot open", path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace racklay
