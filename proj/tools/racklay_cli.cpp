// racklay command line: gen, train, eval, reason, viz, gradcheck, ablation.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include "racklay/harness.hpp"
#include "racklay/nn/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace racklay;

namespace {

constexpr double kGradTolerance = 1e-4;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string manifest;
  std::string checkpoint;
  std::string variant;
  std::string view;
  std::string split = "test";
  std::string image;
  std::string camera;
  int count = 0;
  int index = 0;
  int scale = 4;
  std::optional<int> epochs;
  bool oracle = false;
  bool resume = false;
  bool quiet = false;
};

std::optional<fs::path> config_path(const Options& o) {
  if (o.config.empty()) return std::nullopt;
  return fs::path(o.config);
}

RunConfig run_config(const Options& o) {
  RunConfig run = load_project_config(config_path(o)).run;
  if (!o.variant.empty()) {
    run.variant = o.variant;
    if (o.view.empty() && run.variant.starts_with("d")) run.view.reset();
  }
  if (!o.view.empty()) run.view = parse_view(o.view);
  if (o.seed) run.train.seed = *o.seed;
  if (o.epochs) run.train.epochs = *o.epochs;
  run.parsed_variant();
  return run;
}

std::optional<Checkpoint> checkpoint_or_oracle(const Options& o) {
  if (o.oracle && !o.checkpoint.empty()) throw std::invalid_argument("--oracle and --checkpoint are exclusive");
  if (o.oracle) return std::nullopt;
  if (o.checkpoint.empty()) throw std::invalid_argument("need --checkpoint or --oracle");
  return load_checkpoint_dir(o.checkpoint);
}

int run_gen(const Options& o) {
  const GenConfig cfg = load_project_config(config_path(o)).gen;
  if (o.count < 1) throw std::invalid_argument("--count must be >= 1");
  const auto t0 = std::chrono::steady_clock::now();
  const DatasetManifest m = generate_dataset(cfg, o.count, o.seed.value_or(0), o.out);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("wrote %zu samples (%zu train, %zu val, %zu test) to %s in %.1f s\n", m.samples.size(),
              m.indices(Split::Train).size(), m.indices(Split::Val).size(), m.indices(Split::Test).size(),
              o.out.c_str(), s);
  return 0;
}

int run_train(const Options& o) {
  const RunConfig run = run_config(o);
  const TrainResult r = cmd_train(o.manifest, run, o.out, o.resume, o.quiet);
  if (!r.log.empty()) {
    const auto& first = r.log.front();
    const auto& last = r.log.back();
    std::printf("%s: %d epochs, sup %.4f -> %.4f, checkpoint in %s\n", run.parsed_variant().name().c_str(),
                r.checkpoint.epochs_completed, first.mean.sup_total(), last.mean.sup_total(), o.out.c_str());
  } else {
    std::printf("%s: nothing to train, checkpoint in %s\n", run.parsed_variant().name().c_str(), o.out.c_str());
  }
  return 0;
}

int run_eval(const Options& o) {
  if (o.oracle == !o.checkpoint.empty()) throw std::invalid_argument("need exactly one of --checkpoint or --oracle");
  std::optional<fs::path> ckpt;
  if (!o.checkpoint.empty()) ckpt = fs::path(o.checkpoint);
  const EvalTable t = cmd_eval(o.manifest, ckpt, parse_split(o.split), o.out);
  std::fputs(to_csv(t).c_str(), stdout);
  return 0;
}

int run_reason(const Options& o) {
  ReasonOutput out;
  if (!o.image.empty()) {
    if (o.oracle) throw std::invalid_argument("--oracle needs a dataset sample (--manifest, --index)");
    if (o.checkpoint.empty()) throw std::invalid_argument("--image needs --checkpoint");
    const CameraModel cam = o.camera.empty() ? CameraModel{} : camera_from_json(read_json(o.camera));
    out = reason_on_image(read_ppm(o.image), cam, load_checkpoint_dir(o.checkpoint));
  } else {
    if (o.manifest.empty()) throw std::invalid_argument("need --image or --manifest with --index");
    const fs::path mp = manifest_path(o.manifest);
    const DatasetManifest m = read_manifest(mp);
    if (o.index < 0 || o.index >= static_cast<int>(m.samples.size())) {
      throw std::out_of_range("--index " + std::to_string(o.index) + " outside [0, " +
                              std::to_string(m.samples.size()) + ")");
    }
    out = reason_on_sample(m, mp.parent_path(), o.index, checkpoint_or_oracle(o));
  }
  write_reason_output(o.out, out);
  std::printf("%s\n", out.sentence.c_str());
  return 0;
}

int run_viz(const Options& o) {
  const fs::path mp = manifest_path(o.manifest);
  const DatasetManifest m = read_manifest(mp);
  if (o.index < 0 || o.index >= static_cast<int>(m.samples.size())) {
    throw std::out_of_range("--index " + std::to_string(o.index) + " outside the dataset");
  }
  std::optional<Checkpoint> ckpt;
  if (!o.checkpoint.empty()) ckpt = load_checkpoint_dir(o.checkpoint);
  for (const auto& p : cmd_viz(m, mp.parent_path(), o.index, ckpt, o.out, o.scale)) std::printf("%s\n", p.c_str());
  return 0;
}

int run_gradcheck(const Options& o) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (const auto& c : nn::grad_check_all_ops(o.seed.value_or(1))) {
    const bool pass = c.result.max_rel_error < kGradTolerance;
    ok = ok && pass;
    std::printf("%-28s rel %.3e abs %.3e %s\n", c.op.c_str(), c.result.max_rel_error, c.result.max_abs_error,
                pass ? "ok" : "FAIL");
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s in %.2f s\n", ok ? "all ops pass" : "gradient check failed", s);
  return ok ? 0 : 1;
}

int run_ablation(const Options& o) {
  const auto rows = cmd_ablation(o.manifest, run_config(o), o.out, o.quiet);
  std::fputs(ablation_csv(rows).c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"racklay: synthetic warehouse racks, layout networks and 3D shelf reasoning"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* c) { c->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile); };
  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "seed"); };
  auto add_out = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--out", o.out, "output directory");
    if (required) opt->required();
  };
  auto add_manifest = [&](CLI::App* c) {
    c->add_option("--manifest", o.manifest, "dataset directory or manifest.json")->required();
  };
  auto add_variant = [&](CLI::App* c) {
    c->add_option("--variant", o.variant, "s, s-disc, d or d-disc")
        ->check(CLI::IsMember({"s", "s-disc", "d", "d-disc"}));
    c->add_option("--view", o.view, "top or front (S variants only)")->check(CLI::IsMember({"top", "front"}));
  };

  auto* gen = app.add_subcommand("gen", "generate a dataset");
  add_config(gen);
  add_seed(gen);
  add_out(gen, true);
  gen->add_option("--count", o.count, "number of scenes")->required();

  auto* train = app.add_subcommand("train", "train a variant");
  add_config(train);
  add_seed(train);
  add_out(train, true);
  add_manifest(train);
  add_variant(train);
  train->add_option("--epochs", o.epochs, "override train.epochs");
  train->add_flag("--resume", o.resume, "continue from the checkpoint in --out");
  train->add_flag("--quiet", o.quiet, "no per-epoch log on stderr");

  auto* eval = app.add_subcommand("eval", "score a checkpoint (or GT with --oracle)");
  add_out(eval, true);
  add_manifest(eval);
  eval->add_option("--checkpoint", o.checkpoint, "checkpoint directory");
  eval->add_flag("--oracle", o.oracle, "GT passthrough");
  eval->add_option("--split", o.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));

  auto* reason = app.add_subcommand("reason", "count stacks and free volume for one image");
  add_out(reason, true);
  reason->add_option("--manifest", o.manifest, "dataset directory or manifest.json");
  reason->add_option("--index", o.index, "sample index");
  reason->add_option("--image", o.image, "PPM image")->check(CLI::ExistingFile);
  reason->add_option("--camera", o.camera, "camera JSON for the overlay")->check(CLI::ExistingFile);
  reason->add_option("--checkpoint", o.checkpoint, "dual-view checkpoint directory");
  reason->add_flag("--oracle", o.oracle, "use GT layouts");

  auto* viz = app.add_subcommand("viz", "colour-coded layouts for one sample");
  add_out(viz, true);
  add_manifest(viz);
  viz->add_option("--index", o.index, "sample index");
  viz->add_option("--checkpoint", o.checkpoint, "also render predictions");
  viz->add_option("--scale", o.scale, "pixels per cell")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every op");
  add_seed(grad);

  auto* abl = app.add_subcommand("ablation", "train all four variants and compare");
  add_config(abl);
  add_seed(abl);
  add_out(abl, true);
  add_manifest(abl);
  abl->add_option("--epochs", o.epochs, "override train.epochs");
  abl->add_flag("--quiet", o.quiet, "no per-epoch log on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*gen) return run_gen(o);
    if (*train) return run_train(o);
    if (*eval) return run_eval(o);
    if (*reason) return run_reason(o);
    if (*viz) return run_viz(o);
    if (*grad) return run_gradcheck(o);
    if (*abl) return run_ablation(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "racklay: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
