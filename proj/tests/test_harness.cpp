#include <gtest/gtest.h>

#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "racklay/harness.hpp"

namespace racklay {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("racklay_harness_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every regular file under root, keyed by relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = bytes(e.path());
  }
  return out;
}

// A cheap network so training-path tests stay fast.
RunConfig tiny_run(const std::string& variant, std::optional<View> view = std::nullopt) {
  RunConfig r;
  r.model.encoder_widths = {4, 4, 8, 8};
  r.model.bridge_channels = 4;
  r.model.decoder_width = 8;
  r.model.discriminator_width = 4;
  r.train.lr = 0.002;
  r.train.epochs = 1;
  r.train.batch_size = 2;
  r.variant = variant;
  r.view = view;
  return r;
}

const fs::path& six_sample_dataset() {
  static const fs::path root = [] {
    const fs::path p = scratch("six");
    generate_dataset(GenConfig{}, 6, 11, p);
    return p;
  }();
  return root;
}

DatasetManifest six_manifest() { return read_manifest(manifest_path(six_sample_dataset())); }

TEST(Gen, SixSamplesSplitFourOneOne) {
  const DatasetManifest m = six_manifest();
  ASSERT_EQ(m.samples.size(), 6u);
  EXPECT_EQ(m.indices(Split::Train).size(), 4u);
  EXPECT_EQ(m.indices(Split::Val).size(), 1u);
  EXPECT_EQ(m.indices(Split::Test).size(), 1u);
}

TEST(Gen, SameSeedIsByteIdentical) {
  const fs::path again = scratch("six_again");
  generate_dataset(GenConfig{}, 6, 11, again);
  EXPECT_EQ(tree(six_sample_dataset()), tree(again));
  const fs::path other = scratch("six_other");
  generate_dataset(GenConfig{}, 6, 12, other);
  EXPECT_NE(tree(six_sample_dataset()), tree(other));
}

TEST(Gen, ManifestRoundTripsAndVerifies) {
  const DatasetManifest m = six_manifest();
  EXPECT_EQ(manifest_from_json(to_json(m)), m);
  EXPECT_EQ(m.version, kManifestVersion);
  EXPECT_NO_THROW(verify_manifest(m, six_sample_dataset()));
  const fs::path broken = scratch("broken");
  fs::copy(six_sample_dataset(), broken, fs::copy_options::recursive);
  fs::remove(broken / m.samples[2].image);
  try {
    verify_manifest(m, broken);
    FAIL() << "missing image accepted";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(m.samples[2].image), std::string::npos) << e.what();
  }
}

// The sampled occupancy parameter spans the full range. The realised width
// fraction tops out lower: with 0.25 m gaps and footprints of at most 0.875 m
// no 1.8-2.6 m shelf can be more than ~88% covered.
TEST(Gen, OccupancySpansSparseToDense) {
  const DatasetManifest m = read_manifest(manifest_path([] {
    const fs::path p = scratch("six_hundred");
    generate_dataset(GenConfig{}, 600, 3, p);
    return p;
  }()));
  const fs::path root = fs::temp_directory_path() / "racklay_harness_six_hundred";
  double lo = 1.0, hi = 0.0, real_lo = 1.0, real_hi = 0.0;
  for (const ManifestSample& s : m.samples) {
    const SceneDescription scene = load_scene(m, root, s.index);
    for (const Shelf& shelf : scene.shelves) {
      lo = std::min(lo, shelf.target_occupancy);
      hi = std::max(hi, shelf.target_occupancy);
      const double f = occupancy_fraction(shelf, scene.config.shelf_width_m);
      real_lo = std::min(real_lo, f);
      real_hi = std::max(real_hi, f);
    }
  }
  EXPECT_LT(lo, 0.1);
  EXPECT_GT(hi, 0.9);
  EXPECT_EQ(real_lo, 0.0);
  EXPECT_GT(real_hi, 0.8);
}

TEST(Config, JsonRoundTripAndValidation) {
  RunConfig r = tiny_run("s-disc", View::Front);
  r.train.optimizer = nn::OptimizerKind::Adam;
  EXPECT_EQ(run_config_from_json(to_json(r)), r);
  Json bad = to_json(r);
  bad["train"]["momentum"] = 1.0;
  EXPECT_THROW(run_config_from_json(bad), std::invalid_argument);
  bad = to_json(r);
  bad["model"]["grid_size"] = 48;
  EXPECT_THROW(run_config_from_json(bad), std::invalid_argument);
}

TEST(Train, ZeroEpochsKeepsInitialisation) {
  RunConfig r = tiny_run("d-disc");
  r.train.epochs = 0;
  const fs::path out = scratch("zero_epochs");
  const TrainResult res = cmd_train(manifest_path(six_sample_dataset()), r, out);
  EXPECT_TRUE(res.log.empty());
  const Checkpoint c = load_checkpoint_dir(out);
  EXPECT_EQ(c.params, init_params(r.model, r.parsed_variant(), r.train.seed));
  EXPECT_EQ(c.epochs_completed, 0);
  EXPECT_EQ(c.run, r);
}

TEST(Train, VariantViewContract) {
  const fs::path out = scratch("bad_variant");
  EXPECT_THROW(cmd_train(manifest_path(six_sample_dataset()), tiny_run("d", View::Front), out), std::invalid_argument);
  EXPECT_THROW(cmd_train(manifest_path(six_sample_dataset()), tiny_run("s"), out), std::invalid_argument);
  try {
    tiny_run("d-disc", View::Top).parsed_variant();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("S variants only"), std::string::npos) << e.what();
  }
}

TEST(Train, ManifestMismatchIsRejected) {
  RunConfig r = tiny_run("d");
  r.model.channels = 3;
  EXPECT_THROW(cmd_train(manifest_path(six_sample_dataset()), r, scratch("mismatch")), std::invalid_argument);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  RunConfig two = tiny_run("d-disc");
  two.train.epochs = 2;
  const fs::path straight = scratch("straight");
  const TrainResult a = cmd_train(manifest_path(six_sample_dataset()), two, straight);
  const fs::path split = scratch("split");
  cmd_train(manifest_path(six_sample_dataset()), tiny_run("d-disc"), split);
  const TrainResult b = cmd_train(manifest_path(six_sample_dataset()), two, split, true);
  EXPECT_EQ(a.checkpoint.params, b.checkpoint.params);
  EXPECT_EQ(a.checkpoint.velocity, b.checkpoint.velocity);
  EXPECT_EQ(b.checkpoint.epochs_completed, 2);
  EXPECT_EQ(bytes(straight / "loss.csv"), bytes(split / "loss.csv"));
  EXPECT_TRUE(bytes(split / "loss.csv").starts_with(kLossCsvHeader));
}

TEST(Eval, OracleModeScoresOneHundred) {
  const fs::path out = scratch("oracle_eval");
  const EvalTable t = cmd_eval(manifest_path(six_sample_dataset()), std::nullopt, Split::Train, out);
  for (View v : {View::Top, View::Front}) {
    for (EvalClass c : {EvalClass::Rack, EvalClass::Box}) {
      if (!t.at(v, c).populated()) continue;
      EXPECT_EQ(t.at(v, c).miou, 100.0);
      EXPECT_EQ(t.at(v, c).map, 100.0);
    }
  }
  EXPECT_TRUE(t.at(View::Top, EvalClass::Rack).populated());
  const std::string csv = bytes(out / "eval.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "view,class,miou,map");
  EXPECT_EQ(read_json(out / "eval.json").at("mode"), "oracle");
}

TEST(Eval, TrainedRunPopulatesAllCells) {
  RunConfig r = tiny_run("d-disc");
  const fs::path ck = scratch("eval_ck");
  cmd_train(manifest_path(six_sample_dataset()), r, ck);
  const EvalTable t = cmd_eval(manifest_path(six_sample_dataset()), ck, Split::Train, scratch("eval_out"));
  for (const auto& row : t.cells) {
    for (const EvalCell& c : row) {
      EXPECT_TRUE(c.populated());
      EXPECT_TRUE(std::isfinite(c.miou) && std::isfinite(c.map));
    }
  }
}

TEST(Reason, OracleCountsMatchTheScene) {
  const DatasetManifest m = six_manifest();
  for (const ManifestSample& s : m.samples) {
    const SceneDescription scene = load_scene(m, six_sample_dataset(), s.index);
    int expected = 0;
    for (int shelf : s.visible) expected += static_cast<int>(scene.shelves[static_cast<std::size_t>(shelf)].stacks.size());
    const ReasonOutput out = reason_on_sample(m, six_sample_dataset(), s.index, std::nullopt);
    EXPECT_EQ(out.report.total_stacks, expected) << "sample " << s.index;
    EXPECT_EQ(out.report.shelf_count, static_cast<int>(s.visible.size()));
    EXPECT_TRUE(out.sentence.starts_with("Rack has ")) << out.sentence;
    EXPECT_TRUE(out.sentence.ends_with(" of free space available")) << out.sentence;
  }
  const fs::path dir = scratch("reason_out");
  write_reason_output(dir, reason_on_sample(m, six_sample_dataset(), 0, std::nullopt));
  EXPECT_TRUE(fs::exists(dir / "report.json") && fs::exists(dir / "report.txt") && fs::exists(dir / "overlay.ppm"));
}

TEST(Viz, EmptyLayoutIsSolidPink) {
  const LayoutTensor empty(View::Top, 4, 64, 8.0);
  const Image img = layout_image(empty, 2);
  EXPECT_EQ(img.width, 4 * 64 * 2);
  EXPECT_EQ(img.height, 64 * 2);
  for (std::size_t i = 0; i < img.pixels.size(); i += 3) {
    ASSERT_EQ((Rgb{img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]}), kVizBackground);
  }
}

TEST(Viz, PaletteIsFixed) {
  EXPECT_EQ(kVizOccupied, (Rgb{0, 200, 0}));
  EXPECT_EQ(kVizUnoccupied, (Rgb{0, 0, 139}));
  EXPECT_EQ(kVizBackground, (Rgb{255, 192, 203}));
  LayoutTensor l(View::Front, 1, 64, 8.0);
  l.cells[0] = kUnoccupied;
  l.cells[1] = kOccupied;
  const Image img = layout_image(l);
  EXPECT_EQ((Rgb{img.pixels[0], img.pixels[1], img.pixels[2]}), kVizUnoccupied);
  EXPECT_EQ((Rgb{img.pixels[3], img.pixels[4], img.pixels[5]}), kVizOccupied);
  EXPECT_EQ(layout_image(l).pixels, img.pixels);
}

// Frozen from the first run of cmd_viz on dataset seed 11, sample 1.
TEST(Viz, MatchesGoldenImages) {
  const DatasetManifest m = six_manifest();
  const fs::path out = scratch("viz");
  cmd_viz(m, six_sample_dataset(), 1, std::nullopt, out, 2);
  const fs::path golden = fs::path(RACKLAY_SOURCE_DIR) / "tests" / "golden";
  for (const char* name : {"viz_top.ppm", "viz_front.ppm"}) {
    ASSERT_TRUE(fs::exists(golden / name)) << name;
    EXPECT_EQ(read_ppm(out / name).pixels, read_ppm(golden / name).pixels) << name;
  }
}

TEST(Ablation, CsvHasFourCompleteRowsAndIsDeterministic) {
  RunConfig base = tiny_run("d-disc");
  const fs::path a = scratch("ablation_a");
  const auto rows = cmd_ablation(manifest_path(six_sample_dataset()), base, a);
  const std::string csv = bytes(a / "ablation.csv");
  EXPECT_EQ(csv, ablation_csv(rows));
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, kAblationCsvHeader);
  std::vector<std::string> names;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::getline(cells, cell, ',');
    names.push_back(cell);
    int n = 0;
    while (std::getline(cells, cell, ',')) {
      ASSERT_FALSE(cell.empty()) << line;
      EXPECT_TRUE(std::isfinite(std::stod(cell)));
      ++n;
    }
    EXPECT_EQ(n, 8) << line;
  }
  EXPECT_EQ(names, (std::vector<std::string>{"s", "s-disc", "d", "d-disc"}));
  const fs::path b = scratch("ablation_b");
  cmd_ablation(manifest_path(six_sample_dataset()), base, b);
  EXPECT_EQ(bytes(b / "ablation.csv"), csv);
}

}  // namespace
}  // namespace racklay
