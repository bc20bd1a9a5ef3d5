// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Usage: acceptance [criterion ...]   (default: all)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "racklay/harness.hpp"
#include "racklay/nn/gradcheck.hpp"

namespace racklay {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("racklay_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig config_file(const std::string& name) {
  return load_project_config(fs::path(RACKLAY_SOURCE_DIR) / "configs" / name).run;
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::string worst_op;
  const auto checks = nn::grad_check_all_ops(1);
  for (const auto& c : checks) {
    if (c.result.max_rel_error >= worst) {
      worst = c.result.max_rel_error;
      worst_op = c.op;
    }
  }
  const double s = seconds_since(t0);
  return {worst < 1e-4 && s < 120.0,
          fmt("%zu ops, max rel error %.3g (%s), %.1f s", checks.size(), worst, worst_op.c_str(), s)};
}

Outcome rasterizer_oracle() {
  const auto t0 = Clock::now();
  long mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto c = oracle::random_render_case(1000 + seed, 64);
    const auto objects = scene_objects(c.scene);
    const RenderOutput a = rasterize_objects(objects, c.camera, 64, 64);
    const RenderOutput b = oracle::raycast(objects, c.camera, 64, 64);
    for (std::size_t i = 0; i < a.object_ids.size(); ++i) {
      mismatches += a.object_ids[i] != b.object_ids[i] || a.image.pixels[3 * i] != b.image.pixels[3 * i] ||
                    a.image.pixels[3 * i + 1] != b.image.pixels[3 * i + 1] ||
                    a.image.pixels[3 * i + 2] != b.image.pixels[3 * i + 2];
    }
  }
  const double s = seconds_since(t0);
  return {mismatches == 0 && s < 300.0, fmt("100 pairs at 64x64, %ld mismatching pixels, %.1f s", mismatches, s)};
}

Outcome gt_layout_oracle() {
  const auto t0 = Clock::now();
  int mismatched_scenes = 0;
  long partition_violations = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SplitMix64 rng = substream(2000 + seed, 5);
    const SceneConfig cfg = sample_scene_config(SceneConfig{}, SceneVariation{}, rng);
    const auto scene = generate_scene(cfg, 2000 + seed);
    const CameraModel cam = sample_camera(cfg, rng);
    const DetectionWindow w;
    const auto top = top_layout(scene, cam, w);
    const auto front = front_layout(scene, cam, w);
    mismatched_scenes += top != oracle::top_layout(scene, cam, w) || front != oracle::front_layout(scene, cam, w);
    // Every cell carries exactly one of the three labels, and box cells lie
    // inside the shelf they belong to.
    for (const LayoutTensor* l : {&top, &front}) {
      for (int ch = 0; ch < l->channels; ++ch) {
        for (int r = 0; r < l->size; ++r) {
          for (int c = 0; c < l->size; ++c) {
            const auto v = l->at(ch, r, c);
            partition_violations += v >= kNumLabels;
            if (l == &top && v == kOccupied) {
              partition_violations += std::abs(top.col_x(c)) > scene.config.shelf_width_m / 2.0 ||
                                      std::abs(top.row_z(r)) > scene.config.shelf_depth_m / 2.0;
            }
          }
        }
      }
    }
  }
  const double s = seconds_since(t0);
  return {mismatched_scenes == 0 && partition_violations == 0 && s < 120.0,
          fmt("100 scenes, %d differ from brute force, %ld partition violations, %.1f s", mismatched_scenes,
              partition_violations, s)};
}

Outcome metrics_oracle() {
  double worst_iou = 0.0;
  double worst_ap = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    SplitMix64 rng(3000 + seed);
    const std::size_t n = 64 * 64;
    const double p_fg = rng.uniform(0.0, 0.6);
    std::vector<std::uint8_t> gt(n), pred(n);
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      gt[i] = rng.uniform() < p_fg ? static_cast<std::uint8_t>(rng.uniform_int(1, 2)) : kBackground;
      pred[i] = rng.uniform() < 0.8 ? gt[i] : static_cast<std::uint8_t>(rng.uniform_int(0, 2));
      // Quantized scores so the ranking has ties.
      scores[i] = std::floor((0.5 * (gt[i] == kOccupied) + rng.uniform()) * 64.0) / 64.0;
    }
    for (std::uint8_t id = 0; id < kNumLabels; ++id) {
      worst_iou = std::max(worst_iou, std::abs(iou(pred, gt, id) - oracle::iou(pred, gt, id)));
    }
    std::vector<std::uint8_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) mask[i] = gt[i] == kOccupied;
    const auto a = average_precision(scores, mask);
    const auto b = oracle::average_precision(scores, mask);
    if (a.has_value() != b.has_value()) return {false, fmt("AP defined-ness differs on grid %llu", (unsigned long long)seed)};
    if (a) worst_ap = std::max(worst_ap, std::abs(*a - *b));
  }
  // Oracle model: GT layouts fed back as predictions.
  std::vector<Sample> samples;
  const GenConfig cfg;
  for (int i = 0; i < 30; ++i) {
    GeneratedSample g = generate_sample(cfg, sample_seed(31, i));
    samples.push_back({std::move(g.image), std::move(g.top), std::move(g.front)});
  }
  const EvalTable t = evaluate_samples(samples, std::nullopt);
  bool all_hundred = true;
  for (const auto& row : t.cells) {
    for (const EvalCell& c : row) all_hundred = all_hundred && c.populated() && c.miou == 100.0 && c.map == 100.0;
  }
  return {worst_iou <= 1e-9 && worst_ap <= 1e-9 && all_hundred,
          fmt("200 grids, max |iou diff| %.3g, max |AP diff| %.3g; oracle model %s", worst_iou, worst_ap,
              all_hundred ? "scores 100 in every cell" : "misses 100")};
}

Outcome reasoning_exactness() {
  const auto t0 = Clock::now();
  int exact = 0;
  double worst_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SplitMix64 rng = substream(4000 + seed, 9);
    const SceneConfig cfg = sample_scene_config(SceneConfig{}, SceneVariation{}, rng);
    if (cfg.min_gap_m < 2.0 * metric_scale(8.0, 64) / 100.0 - 1e-12) return {false, "min_gap below 2 pixels"};
    const auto scene = generate_scene(cfg, 4000 + seed);
    const CameraModel cam = sample_camera(cfg, rng);
    const auto top = top_layout(scene, cam, DetectionWindow{});
    const auto front = front_layout(scene, cam, DetectionWindow{});
    const RackReport r = reason_rack(top, front, [&](int i) { return std::optional(geometry_from_scene(scene, i)); },
                                     100.0 * cfg.shelf_thickness_m);
    bool counts_ok = true;
    double analytic = 0.0;
    std::set<int> reported;
    for (const ShelfReport& s : r.shelves) {
      reported.insert(s.shelf);
      counts_ok = counts_ok && s.stack_count == static_cast<int>(scene.shelves[static_cast<std::size_t>(s.shelf)].stacks.size());
      analytic += oracle::analytic_free_cm3(scene, s.shelf);
    }
    const auto visible = visible_shelf_set(scene, cam, DetectionWindow{});
    counts_ok = counts_ok && reported == std::set<int>(visible.begin(), visible.end());
    exact += counts_ok;
    if (analytic > 0.0) worst_rel = std::max(worst_rel, std::abs(r.total_free_cm3 - analytic) / analytic);
  }
  const double s = seconds_since(t0);
  return {exact == 50 && worst_rel <= 0.05 && s < 120.0,
          fmt("counts exact on %d/50 scenes, worst free-volume error %.2f%%, %.1f s", exact, 100.0 * worst_rel, s)};
}

Outcome empty_channels() {
  const fs::path dir = workdir("empty_channels");
  const DatasetManifest m = generate_dataset(GenConfig{}, 600, 5, dir);
  long bad_cells = 0;
  int hidden_channels = 0;
  for (const ManifestSample& s : m.samples) {
    const Sample smp = load_sample(m, dir, s.index);
    const std::set<int> visible(s.visible.begin(), s.visible.end());
    for (const LayoutTensor* l : {&smp.top, &smp.front}) {
      for (int ch = 0; ch < l->channels; ++ch) {
        if (visible.contains(ch)) continue;
        ++hidden_channels;
        for (int r = 0; r < l->size; ++r) {
          for (int c = 0; c < l->size; ++c) bad_cells += l->at(ch, r, c) != kBackground;
        }
      }
    }
  }
  fs::remove_all(dir);
  return {bad_cells == 0 && hidden_channels > 0,
          fmt("600 samples, %d hidden channels, %ld non-background cells in them", hidden_channels, bad_cells)};
}

bool meets(const EvalTable& t, std::string& detail) {
  bool ok = true;
  std::ostringstream os;
  for (View v : {View::Top, View::Front}) {
    const double rack = t.at(v, EvalClass::Rack).miou;
    const double box = t.at(v, EvalClass::Box).miou;
    ok = ok && rack >= 70.0 && box >= 60.0;
    os << view_name(v) << " rack " << fmt("%.2f", rack) << " box " << fmt("%.2f", box) << "; ";
  }
  detail = os.str();
  return ok;
}

Outcome end_to_end() {
  const fs::path dir = workdir("e2e");
  const RunConfig run = config_file("e2e.json");
  if (run.variant != "d-disc") return {false, "configs/e2e.json must select d-disc"};
  generate_dataset(GenConfig{}, 500, 2024, dir / "data");
  const auto t0 = Clock::now();
  const TrainResult tr = cmd_train(manifest_path(dir / "data"), run, dir / "run", false, false);
  const double train_s = seconds_since(t0);
  const EvalTable t = cmd_eval(manifest_path(dir / "data"), dir / "run", Split::Test, dir / "eval");
  std::string detail;
  const bool ok = meets(t, detail);
  return {ok && train_s <= 7200.0,
          detail + fmt("%d epochs, training %.0f s on %d worker(s), held-out test split", tr.checkpoint.epochs_completed,
                       train_s, worker_count())};
}

Outcome ablation() {
  const fs::path dir = workdir("ablation");
  generate_dataset(GenConfig{}, 24, 77, dir / "data");
  const RunConfig base = config_file("tiny.json");
  const auto rows = cmd_ablation(manifest_path(dir / "data"), base, dir / "out");
  const std::string csv = read_text(dir / "out" / "ablation.csv");
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  if (line != kAblationCsvHeader) return {false, "bad header: " + line};
  std::vector<std::string> names;
  int cells = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    names.push_back(cell);
    while (std::getline(ss, cell, ',')) {
      if (cell.empty() || !std::isfinite(std::stod(cell))) return {false, "empty or non-finite cell in: " + line};
      ++cells;
    }
  }
  const bool ok = names == std::vector<std::string>{"s", "s-disc", "d", "d-disc"} && cells == 32;
  return {ok, fmt("%zu variants, %d finite cells", names.size(), cells)};
}

double cell_accuracy(const Prediction& p, const Sample& s, View v) {
  const LayoutTensor& pred = v == View::Top ? *p.top : *p.front;
  const LayoutTensor& gt = v == View::Top ? s.top : s.front;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < gt.cells.size(); ++i) hit += pred.cells[i] == gt.cells[i];
  return static_cast<double>(hit) / static_cast<double>(gt.cells.size());
}

Outcome overfit() {
  GeneratedSample g = generate_sample(GenConfig{}, sample_seed(8, 0));
  const Sample sample{std::move(g.image), std::move(g.top), std::move(g.front)};
  const RunConfig base = config_file("e2e.json");
  const Batch batch = make_batch({&sample}, base.model);
  struct Case {
    std::string variant;
    std::optional<View> view;
  };
  const std::vector<Case> cases{{"s", View::Top}, {"s", View::Front}, {"s-disc", View::Top},
                                {"s-disc", View::Front}, {"d", std::nullopt}, {"d-disc", std::nullopt}};
  bool ok = true;
  std::ostringstream os;
  for (const Case& c : cases) {
    const Variant v = parse_variant(c.variant, c.view);
    Model m = Model::initialized(base.model, v, base.train);
    int steps = 0;
    double acc = 0.0;
    while (steps < 2000) {
      for (int k = 0; k < 25; ++k) m.train_step(batch);
      steps += 25;
      const Prediction p = predict(sample.image, m.params(), base.model, v, sample.top.extent_m);
      acc = 1.0;
      for (View view : v.views()) acc = std::min(acc, cell_accuracy(p, sample, view));
      if (acc >= 0.99) break;
    }
    ok = ok && acc >= 0.99;
    os << c.variant << (c.view ? std::string("/") + view_name(*c.view) : "") << " " << fmt("%.2f%%", 100.0 * acc)
       << " @" << steps << "; ";
  }
  return {ok, os.str()};
}

Outcome determinism() {
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = workdir("determinism_" + std::to_string(run));
    generate_dataset(GenConfig{}, 18, 99, dir / "data");
    cmd_train(manifest_path(dir / "data"), config_file("tiny.json"), dir / "run");
    cmd_eval(manifest_path(dir / "data"), dir / "run", Split::Test, dir / "eval");
    csv[run] = read_text(dir / "eval" / "eval.csv");
  }
  return {csv[0] == csv[1] && !csv[0].empty(), csv[0] == csv[1] ? "eval.csv identical across two runs" : "eval.csv differs"};
}

}  // namespace
}  // namespace racklay

int main(int argc, char** argv) {
  using namespace racklay;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient_suite", gradient_suite},
      {"rasterizer_oracle", rasterizer_oracle},
      {"gt_layout_oracle", gt_layout_oracle},
      {"metrics_oracle", metrics_oracle},
      {"reasoning_exactness", reasoning_exactness},
      {"empty_channel_invariant", empty_channels},
      {"end_to_end_learning", end_to_end},
      {"ablation_harness", ablation},
      {"overfit_oracle", overfit},
      {"determinism", determinism},
  };
  const std::set<std::string> only(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && !only.contains(name)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
