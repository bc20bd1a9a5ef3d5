#include "racklay/harness.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "racklay/nn/params.hpp"

namespace racklay {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShuffleStream = 5000;
constexpr const char* kVelocityPrefix = "opt.";

template <typename T>
void take(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

// Fisher-Yates with our own generator so the order is the same everywhere.
std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 rng = substream(seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_int(0, i));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  return order;
}

void check_samples(const std::vector<Sample>& samples, const ModelConfig& m) {
  for (const Sample& s : samples) {
    if (s.image.width != m.image_width || s.image.height != m.image_height) {
      throw std::invalid_argument("dataset images are " + std::to_string(s.image.width) + "x" +
                                  std::to_string(s.image.height) + " but the model expects " +
                                  std::to_string(m.image_width) + "x" + std::to_string(m.image_height));
    }
    if (s.top.channels != m.channels || s.top.size != m.grid_size) {
      throw std::invalid_argument("dataset layouts are R=" + std::to_string(s.top.channels) + ", D=" +
                                  std::to_string(s.top.size) + " but the model expects R=" +
                                  std::to_string(m.channels) + ", D=" + std::to_string(m.grid_size));
    }
  }
}

void accumulate(LossReport& sum, const LossReport& r) {
  sum.sup_top += r.sup_top;
  sum.sup_front += r.sup_front;
  sum.adv_top += r.adv_top;
  sum.adv_front += r.adv_front;
  sum.discr_top += r.discr_top;
  sum.discr_front += r.discr_front;
}

LossReport divided(LossReport r, double n) {
  if (n <= 0.0) return r;
  r.sup_top /= n;
  r.sup_front /= n;
  r.adv_top /= n;
  r.adv_front /= n;
  r.discr_top /= n;
  r.discr_front /= n;
  return r;
}

std::vector<const Sample*> slice(const std::vector<Sample>& data, const std::vector<int>& order, std::size_t begin,
                                 std::size_t end) {
  std::vector<const Sample*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&data[static_cast<std::size_t>(order[i])]);
  return out;
}

struct SamplePrediction {
  Prediction pred;
};

nn::Tensor<float> one_hot_probs(const LayoutTensor& l) {
  return one_hot(l.cells, 1, l.channels, l.size).reshaped({l.channels * kNumLabels, l.size, l.size});
}

void write_csv_file(const fs::path& path, const std::string& text) { write_text(path, text); }

// Shelf-frame point to world for the overlay.
Cuboid overlay_box(const FusedCuboid& c, double shelf_height_m) {
  const double h = c.height_cm / 100.0;
  return {{c.center_x_cm / 100.0, shelf_height_m + h / 2.0, c.center_z_cm / 100.0},
          {c.width_cm / 200.0, h / 2.0, c.depth_cm / 200.0},
          0.0};
}

Image draw_overlay(Image image, const CameraModel& cam, const RackReport& report,
                   const std::function<double(int)>& shelf_height) {
  for (const auto& s : report.shelves) {
    for (const auto& c : s.cuboids) draw_wireframe(image, cam, overlay_box(c, shelf_height(s.shelf)), {255, 0, 255});
  }
  return image;
}

}  // namespace

Json to_json(const ModelConfig& m) {
  return {{"image_width", m.image_width},
          {"image_height", m.image_height},
          {"channels", m.channels},
          {"grid_size", m.grid_size},
          {"encoder_widths", m.encoder_widths},
          {"encoder_downsample", m.encoder_downsample},
          {"bridge_channels", m.bridge_channels},
          {"transform_size", m.transform_size},
          {"attention_heads", m.attention_heads},
          {"decoder_width", m.decoder_width},
          {"discriminator_width", m.discriminator_width},
          {"leaky_slope", m.leaky_slope},
          {"test_flip", m.test_flip}};
}

Json to_json(const TrainConfig& t) {
  return {{"optimizer", nn::optimizer_name(t.optimizer)},
          {"lr", t.lr},
          {"momentum", t.momentum},
          {"weight_decay", t.weight_decay},
          {"lambda_adv", t.lambda_adv},
          {"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"seed", t.seed},
          {"class_weights", t.class_weights},
          {"flip_augment", t.flip_augment},
          {"cosine_lr", t.cosine_lr}};
}

Json to_json(const RunConfig& r) {
  Json j = {{"variant", r.variant}, {"model", to_json(r.model)}, {"train", to_json(r.train)}};
  j["view"] = r.view ? Json(view_name(*r.view)) : Json(nullptr);
  return j;
}

ModelConfig model_config_from_json(const Json& j, const ModelConfig& base) {
  ModelConfig m = base;
  take(j, "image_width", m.image_width);
  take(j, "image_height", m.image_height);
  take(j, "channels", m.channels);
  take(j, "grid_size", m.grid_size);
  take(j, "encoder_widths", m.encoder_widths);
  take(j, "encoder_downsample", m.encoder_downsample);
  take(j, "bridge_channels", m.bridge_channels);
  take(j, "transform_size", m.transform_size);
  take(j, "attention_heads", m.attention_heads);
  take(j, "decoder_width", m.decoder_width);
  take(j, "discriminator_width", m.discriminator_width);
  take(j, "leaky_slope", m.leaky_slope);
  take(j, "test_flip", m.test_flip);
  validate(m);
  return m;
}

TrainConfig train_config_from_json(const Json& j, const TrainConfig& base) {
  TrainConfig t = base;
  if (j.contains("optimizer")) t.optimizer = nn::parse_optimizer(j.at("optimizer").get<std::string>());
  take(j, "lr", t.lr);
  take(j, "momentum", t.momentum);
  take(j, "weight_decay", t.weight_decay);
  take(j, "lambda_adv", t.lambda_adv);
  take(j, "epochs", t.epochs);
  take(j, "batch_size", t.batch_size);
  take(j, "seed", t.seed);
  take(j, "class_weights", t.class_weights);
  take(j, "flip_augment", t.flip_augment);
  take(j, "cosine_lr", t.cosine_lr);
  if (!(t.lr >= 0.0) || !(t.momentum >= 0.0 && t.momentum < 1.0) || !(t.lambda_adv >= 0.0) ||
      !(t.weight_decay >= 0.0) || t.epochs < 0 || t.batch_size < 1) {
    throw std::invalid_argument("invalid train config (lr >= 0, momentum in [0, 1), lambda_adv >= 0, "
                                "weight_decay >= 0, epochs >= 0, batch_size >= 1)");
  }
  return t;
}

RunConfig run_config_from_json(const Json& j, const RunConfig& base) {
  RunConfig r = base;
  if (j.contains("model")) r.model = model_config_from_json(j.at("model"), base.model);
  if (j.contains("train")) r.train = train_config_from_json(j.at("train"), base.train);
  take(j, "variant", r.variant);
  if (j.contains("view")) {
    if (j.at("view").is_null()) {
      r.view.reset();
    } else {
      r.view = parse_view(j.at("view").get<std::string>());
    }
  }
  r.parsed_variant();
  return r;
}

ProjectConfig load_project_config(const std::optional<fs::path>& path) {
  ProjectConfig pc;
  if (!path) return pc;
  const Json j = read_json(*path);
  try {
    if (j.contains("generator")) pc.gen = gen_config_from_json(j.at("generator"));
    pc.run = run_config_from_json(j);
    validate(pc.gen.scene);
  } catch (const std::exception& e) {
    throw std::invalid_argument("config " + path->string() + ": " + e.what());
  }
  return pc;
}

fs::path manifest_path(const fs::path& p) {
  if (fs::is_directory(p)) return p / "manifest.json";
  return p;
}

std::string to_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = std::string(kLossCsvHeader) + "\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%d,%d,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g,%.8g\n", r.epoch, r.steps, r.mean.sup_top,
                  r.mean.sup_front, r.mean.adv_top, r.mean.adv_front, r.mean.discr_top, r.mean.discr_front, r.val_sup);
    out += line;
  }
  return out;
}

void save_checkpoint_dir(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  nn::ParamSet all = ckpt.params;
  for (const auto& e : ckpt.velocity.entries()) all.add(kVelocityPrefix + e.name, e.value);
  nn::save_checkpoint(dir / "checkpoint.bin", all);
  write_json(dir / "checkpoint.json", {{"version", kCheckpointMetaVersion},
                                       {"format", "RKLYCKPT"},
                                       {"tensor_version", nn::kCheckpointVersion},
                                       {"run", to_json(ckpt.run)},
                                       {"epochs_completed", ckpt.epochs_completed},
                                       {"dataset_seed", ckpt.dataset_seed},
                                       {"parameter_count", ckpt.params.scalar_count()}});
}

Checkpoint load_checkpoint_dir(const fs::path& dir) {
  const Json meta = read_json(dir / "checkpoint.json");
  if (meta.at("version").get<int>() != kCheckpointMetaVersion) {
    throw std::runtime_error("unsupported checkpoint metadata version in " + dir.string());
  }
  Checkpoint c;
  c.run = run_config_from_json(meta.at("run"));
  c.epochs_completed = meta.at("epochs_completed").get<int>();
  c.dataset_seed = meta.at("dataset_seed").get<std::uint64_t>();
  const nn::ParamSet all = nn::load_checkpoint(dir / "checkpoint.bin");
  for (const auto& e : all.entries()) {
    if (e.name.starts_with(kVelocityPrefix)) {
      c.velocity.add(e.name.substr(std::string(kVelocityPrefix).size()), e.value);
    } else {
      c.params.add(e.name, e.value);
    }
  }
  const nn::ParamSet expected = init_params(c.run.model, c.run.parsed_variant(), c.run.train.seed);
  for (const auto& e : expected.entries()) {
    if (!c.params.contains(e.name) || c.params.get(e.name).dims() != e.value.dims()) {
      throw std::runtime_error("checkpoint " + dir.string() + " does not match its config at " + e.name);
    }
  }
  return c;
}

TrainResult train_on_samples(const std::vector<Sample>& train, const std::vector<Sample>& val, const RunConfig& run,
                             std::optional<Checkpoint> start, const std::function<void(const TrainResult&)>& on_epoch,
                             bool quiet) {
  const Variant variant = run.parsed_variant();
  check_samples(train, run.model);
  check_samples(val, run.model);
  if (train.empty() && run.train.epochs > 0) throw std::invalid_argument("training split is empty");

  TrainResult result;
  Model model = start ? Model(run.model, variant, run.train, start->params)
                      : Model::initialized(run.model, variant, run.train);
  if (start) {
    model.optimizer().state() = start->velocity;
    result.checkpoint.epochs_completed = start->epochs_completed;
    result.checkpoint.dataset_seed = start->dataset_seed;
  }
  result.checkpoint.run = run;
  const int bs = run.train.batch_size;
  std::vector<Sample> flipped;
  if (run.train.flip_augment) {
    for (const Sample& s : train) flipped.push_back(mirrored(s));
  }
  for (int epoch = result.checkpoint.epochs_completed; epoch < run.train.epochs; ++epoch) {
    const auto order = epoch_order(static_cast<int>(train.size()), run.train.seed, epoch);
    LossReport sum;
    int steps = 0;
    SplitMix64 coin = substream(run.train.seed, 7000 + static_cast<std::uint64_t>(epoch));
    model.optimizer().set_lr(run.train.lr_at(epoch));
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(bs)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(bs));
      std::vector<const Sample*> picked = slice(train, order, b, e);
      if (!flipped.empty()) {
        for (std::size_t k = 0; k < picked.size(); ++k) {
          if (coin.uniform() < 0.5) picked[k] = &flipped[static_cast<std::size_t>(order[b + k])];
        }
      }
      const Batch batch = make_batch(picked, run.model);
      accumulate(sum, model.train_step(batch));
      ++steps;
    }
    TrainLogRow row;
    row.epoch = epoch;
    row.steps = steps;
    row.mean = divided(sum, steps);
    if (!val.empty()) {
      std::vector<int> all(val.size());
      std::iota(all.begin(), all.end(), 0);
      double total = 0.0;
      for (std::size_t b = 0; b < all.size(); b += static_cast<std::size_t>(bs)) {
        const std::size_t e = std::min(all.size(), b + static_cast<std::size_t>(bs));
        total += model.supervised_loss(make_batch(slice(val, all, b, e), run.model)).sup_total();
      }
      row.val_sup = total / static_cast<double>(val.size());
    }
    result.log.push_back(row);
    result.checkpoint.epochs_completed = epoch + 1;
    if (!quiet) {
      std::fprintf(stderr, "epoch %d: sup_top %.4f sup_front %.4f adv %.4f/%.4f discr %.4f/%.4f val_sup %.4f\n", epoch,
                   row.mean.sup_top, row.mean.sup_front, row.mean.adv_top, row.mean.adv_front, row.mean.discr_top,
                   row.mean.discr_front, row.val_sup);
    }
    if (on_epoch) {
      result.checkpoint.params = model.params();
      result.checkpoint.velocity = model.optimizer().state();
      on_epoch(result);
    }
  }
  result.checkpoint.params = model.params();
  result.checkpoint.velocity = model.optimizer().state();
  return result;
}

TrainResult cmd_train(const fs::path& manifest, const RunConfig& run, const fs::path& out_dir, bool resume,
                      bool quiet) {
  const fs::path mpath = manifest_path(manifest);
  const DatasetManifest m = read_manifest(mpath);
  const fs::path root = mpath.parent_path();
  if (m.channels != run.model.channels || m.grid_size != run.model.grid_size || m.image_width != run.model.image_width ||
      m.image_height != run.model.image_height) {
    throw std::invalid_argument("manifest (R=" + std::to_string(m.channels) + ", D=" + std::to_string(m.grid_size) +
                                ", image " + std::to_string(m.image_width) + "x" + std::to_string(m.image_height) +
                                ") does not match the run config");
  }
  std::optional<Checkpoint> start;
  std::vector<TrainLogRow> previous;
  if (resume && fs::exists(out_dir / "checkpoint.json")) {
    start = load_checkpoint_dir(out_dir);
    if (!(start->run.model == run.model) || start->run.variant != run.variant || start->run.view != run.view ||
        start->run.train.seed != run.train.seed) {
      throw std::invalid_argument("cannot resume: " + out_dir.string() + " holds a different model/variant/seed");
    }
    if (start->dataset_seed != m.seed) throw std::invalid_argument("cannot resume: checkpoint trained on another dataset");
    if (fs::exists(out_dir / "loss.json")) {
      for (const auto& r : read_json(out_dir / "loss.json")) {
        TrainLogRow row;
        row.epoch = r.at("epoch").get<int>();
        row.steps = r.at("steps").get<int>();
        row.mean.sup_top = r.at("sup_top").get<double>();
        row.mean.sup_front = r.at("sup_front").get<double>();
        row.mean.adv_top = r.at("adv_top").get<double>();
        row.mean.adv_front = r.at("adv_front").get<double>();
        row.mean.discr_top = r.at("discr_top").get<double>();
        row.mean.discr_front = r.at("discr_front").get<double>();
        row.val_sup = r.at("val_sup").get<double>();
        if (row.epoch < start->epochs_completed) previous.push_back(row);
      }
    }
  }
  const auto train = load_samples(m, root, m.indices(Split::Train));
  const auto val = load_samples(m, root, m.indices(Split::Val));
  auto persist = [&](const TrainResult& r) {
    Checkpoint c = r.checkpoint;
    c.dataset_seed = m.seed;
    save_checkpoint_dir(out_dir, c);
    std::vector<TrainLogRow> rows = previous;
    rows.insert(rows.end(), r.log.begin(), r.log.end());
    write_csv_file(out_dir / "loss.csv", to_csv(rows));
    Json j = Json::array();
    for (const auto& row : rows) {
      j.push_back({{"epoch", row.epoch},
                   {"steps", row.steps},
                   {"sup_top", row.mean.sup_top},
                   {"sup_front", row.mean.sup_front},
                   {"adv_top", row.mean.adv_top},
                   {"adv_front", row.mean.adv_front},
                   {"discr_top", row.mean.discr_top},
                   {"discr_front", row.mean.discr_front},
                   {"val_sup", row.val_sup}});
    }
    write_json(out_dir / "loss.json", j);
  };
  TrainResult result = train_on_samples(train, val, run, start, persist, quiet);
  result.checkpoint.dataset_seed = m.seed;
  persist(result);
  result.log.insert(result.log.begin(), previous.begin(), previous.end());
  return result;
}

EvalTable evaluate_samples(const std::vector<Sample>& samples, const std::optional<Checkpoint>& checkpoint) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  std::vector<Prediction> preds(samples.size());
  if (checkpoint) {
    const Variant v = checkpoint->run.parsed_variant();
    check_samples(samples, checkpoint->run.model);
    parallel_for(static_cast<int>(samples.size()), [&](int i) {
      const Sample& s = samples[static_cast<std::size_t>(i)];
      preds[static_cast<std::size_t>(i)] = predict(s.image, checkpoint->params, checkpoint->run.model, v, s.top.extent_m);
    });
  } else {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      preds[i].top = samples[i].top;
      preds[i].front = samples[i].front;
      preds[i].top_probs = one_hot_probs(samples[i].top);
      preds[i].front_probs = one_hot_probs(samples[i].front);
    }
  }
  Evaluator ev;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (View v : {View::Top, View::Front}) {
      const auto& layout = preds[i].layout(v);
      if (!layout) continue;
      const auto& probs = preds[i].probs(v);
      ev.add(*layout, probs ? &*probs : nullptr, v == View::Top ? samples[i].top : samples[i].front);
    }
  }
  return ev.table();
}

EvalTable cmd_eval(const fs::path& manifest, const std::optional<fs::path>& checkpoint_dir, Split split,
                   const fs::path& out_dir) {
  const fs::path mpath = manifest_path(manifest);
  const DatasetManifest m = read_manifest(mpath);
  const auto samples = load_samples(m, mpath.parent_path(), m.indices(split));
  std::optional<Checkpoint> ckpt;
  if (checkpoint_dir) ckpt = load_checkpoint_dir(*checkpoint_dir);
  const EvalTable table = evaluate_samples(samples, ckpt);
  fs::create_directories(out_dir);
  write_text(out_dir / "eval.csv", to_csv(table));
  Json j = to_json(table);
  j["split"] = split_name(split);
  j["samples"] = samples.size();
  j["mode"] = ckpt ? "checkpoint" : "oracle";
  if (ckpt) j["run"] = to_json(ckpt->run);
  write_json(out_dir / "eval.json", j);
  return table;
}

ReasonOutput reason_on_sample(const DatasetManifest& m, const fs::path& root, int index,
                              const std::optional<Checkpoint>& checkpoint) {
  const Sample s = load_sample(m, root, index);
  const SceneDescription scene = load_scene(m, root, index);
  const CameraModel cam = camera_from_json(read_json(root / m.samples.at(static_cast<std::size_t>(index)).camera));
  LayoutTensor top = s.top;
  LayoutTensor front = s.front;
  if (checkpoint) {
    const Variant v = checkpoint->run.parsed_variant();
    if (!v.dual) throw std::invalid_argument("reasoning needs both views; use a d or d-disc checkpoint");
    const Prediction p = predict(s.image, checkpoint->params, checkpoint->run.model, v, s.top.extent_m);
    top = *p.top;
    front = *p.front;
  }
  ReasonOutput out;
  out.report = reason_rack(
      top, front,
      [&](int shelf) -> std::optional<ShelfGeometry> {
        if (shelf < static_cast<int>(scene.shelves.size())) return geometry_from_scene(scene, shelf);
        return std::nullopt;
      },
      100.0 * scene.config.shelf_thickness_m);
  out.sentence = report_sentence(out.report);
  out.overlay = draw_overlay(s.image, cam, out.report, [&](int shelf) {
    if (shelf < static_cast<int>(scene.shelves.size())) {
      return scene.shelves[static_cast<std::size_t>(shelf)].height_above_ground_m;
    }
    return scene.config.bottom_shelf_height_m + shelf * scene.config.inter_shelf_height_m;
  });
  return out;
}

ReasonOutput reason_on_image(const Image& image, const CameraModel& cam, const Checkpoint& checkpoint) {
  const Variant v = checkpoint.run.parsed_variant();
  if (!v.dual) throw std::invalid_argument("reasoning needs both views; use a d or d-disc checkpoint");
  const DetectionWindow window;
  const Prediction p = predict(image, checkpoint.params, checkpoint.run.model, v, window.extent_m);
  const SceneConfig defaults;
  ReasonOutput out;
  out.report = reason_rack(*p.top, *p.front, {}, 100.0 * defaults.shelf_thickness_m);
  out.sentence = report_sentence(out.report);
  // Without a scene the board heights are estimated from the front-view bands.
  std::vector<double> heights(static_cast<std::size_t>(checkpoint.run.model.channels));
  double level = defaults.bottom_shelf_height_m;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    heights[i] = level;
    for (const auto& s : out.report.shelves) {
      if (s.shelf == static_cast<int>(i) && s.geometry.inter_shelf_height_cm > 0.0) {
        level += s.geometry.inter_shelf_height_cm / 100.0 - defaults.inter_shelf_height_m;
      }
    }
    level += defaults.inter_shelf_height_m;
  }
  out.overlay = draw_overlay(image, cam, out.report, [&](int shelf) { return heights[static_cast<std::size_t>(shelf)]; });
  return out;
}

void write_reason_output(const fs::path& out_dir, const ReasonOutput& out) {
  fs::create_directories(out_dir);
  write_json(out_dir / "report.json", to_json(out.report));
  write_text(out_dir / "report.txt", out.sentence + "\n");
  write_ppm(out_dir / "overlay.ppm", out.overlay);
}

Image layout_image(const LayoutTensor& layout, int scale) {
  if (scale < 1) throw std::invalid_argument("viz scale must be >= 1");
  const int tile = layout.size * scale;
  Image img(tile * std::max(layout.channels, 1), tile, kVizBackground);
  for (int ch = 0; ch < layout.channels; ++ch) {
    for (int r = 0; r < layout.size; ++r) {
      for (int c = 0; c < layout.size; ++c) {
        const std::uint8_t l = layout.at(ch, r, c);
        const Rgb color = l == kOccupied ? kVizOccupied : l == kUnoccupied ? kVizUnoccupied : kVizBackground;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) img.set(ch * tile + c * scale + dx, r * scale + dy, color);
        }
      }
    }
  }
  return img;
}

std::vector<fs::path> cmd_viz(const DatasetManifest& m, const fs::path& root, int index,
                              const std::optional<Checkpoint>& checkpoint, const fs::path& out_dir, int scale) {
  const Sample s = load_sample(m, root, index);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const LayoutTensor* l : {&s.top, &s.front}) {
    const fs::path p = out_dir / (std::string("viz_") + view_name(l->view) + ".ppm");
    write_ppm(p, layout_image(*l, scale));
    written.push_back(p);
  }
  if (checkpoint) {
    const Prediction pred =
        predict(s.image, checkpoint->params, checkpoint->run.model, checkpoint->run.parsed_variant(), s.top.extent_m);
    for (View v : {View::Top, View::Front}) {
      if (!pred.layout(v)) continue;
      const fs::path p = out_dir / (std::string("pred_") + view_name(v) + ".ppm");
      write_ppm(p, layout_image(*pred.layout(v), scale));
      written.push_back(p);
    }
  }
  return written;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = std::string(kAblationCsvHeader) + "\n";
  char cell[64];
  for (const auto& row : rows) {
    out += row.variant;
    for (View v : {View::Top, View::Front}) {
      for (EvalClass c : {EvalClass::Rack, EvalClass::Box}) {
        const EvalCell& e = row.table.at(v, c);
        if (e.populated()) {
          std::snprintf(cell, sizeof cell, ",%.4f,%.4f", e.miou, e.map);
        } else {
          std::snprintf(cell, sizeof cell, ",,");
        }
        out += cell;
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<AblationRow> cmd_ablation(const fs::path& manifest, const RunConfig& base, const fs::path& out_dir,
                                      bool quiet) {
  const fs::path mpath = manifest_path(manifest);
  const DatasetManifest m = read_manifest(mpath);
  const fs::path root = mpath.parent_path();
  const auto train = load_samples(m, root, m.indices(Split::Train));
  const auto val = load_samples(m, root, m.indices(Split::Val));
  const auto test = load_samples(m, root, m.indices(Split::Test));
  fs::create_directories(out_dir);

  auto train_one = [&](const std::string& variant, std::optional<View> view, const std::string& dir) {
    RunConfig run = base;
    run.variant = variant;
    run.view = view;
    if (!quiet) std::fprintf(stderr, "ablation: training %s\n", dir.c_str());
    TrainResult r = train_on_samples(train, val, run, std::nullopt, {}, quiet);
    r.checkpoint.dataset_seed = m.seed;
    save_checkpoint_dir(out_dir / dir, r.checkpoint);
    write_text(out_dir / dir / "loss.csv", to_csv(r.log));
    return r.checkpoint;
  };

  std::vector<AblationRow> rows;
  for (const std::string variant : {"s", "s-disc"}) {
    const std::string tag = variant == "s" ? "s" : "s_disc";
    const Checkpoint top = train_one(variant, View::Top, tag + "_top");
    const Checkpoint front = train_one(variant, View::Front, tag + "_front");
    const EvalTable t = evaluate_samples(test, top);
    const EvalTable f = evaluate_samples(test, front);
    AblationRow row{variant, {}};
    for (EvalClass c : {EvalClass::Rack, EvalClass::Box}) {
      row.table.at(View::Top, c) = t.at(View::Top, c);
      row.table.at(View::Front, c) = f.at(View::Front, c);
    }
    rows.push_back(row);
  }
  for (const std::string variant : {"d", "d-disc"}) {
    const Checkpoint ck = train_one(variant, std::nullopt, variant == "d" ? "d" : "d_disc");
    rows.push_back({variant, evaluate_samples(test, ck)});
  }
  write_text(out_dir / "ablation.csv", ablation_csv(rows));
  return rows;
}

}  // namespace racklay
