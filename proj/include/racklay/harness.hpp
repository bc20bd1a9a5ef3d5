#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "racklay/dataset.hpp"
#include "racklay/metrics.hpp"
#include "racklay/racklaynet.hpp"
#include "racklay/reason3d.hpp"

namespace racklay {

inline constexpr int kCheckpointMetaVersion = 1;

// Model, optimiser and variant selection for one training run.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string variant = "d-disc";
  std::optional<View> view;  // S variants only

  Variant parsed_variant() const { return parse_variant(variant, view); }
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

Json to_json(const ModelConfig& m);
Json to_json(const TrainConfig& t);
Json to_json(const RunConfig& r);
ModelConfig model_config_from_json(const Json& j, const ModelConfig& base = {});
TrainConfig train_config_from_json(const Json& j, const TrainConfig& base = {});
RunConfig run_config_from_json(const Json& j, const RunConfig& base = {});

// One JSON file may hold "generator", "model", "train", "variant" and "view".
struct ProjectConfig {
  GenConfig gen;
  RunConfig run;
};
ProjectConfig load_project_config(const std::optional<std::filesystem::path>& path);

// Accepts a dataset directory or a manifest file.
std::filesystem::path manifest_path(const std::filesystem::path& p);

struct TrainLogRow {
  int epoch = 0;
  int steps = 0;
  LossReport mean;  // per-step average over the epoch
  double val_sup = 0.0;

  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

inline constexpr const char* kLossCsvHeader =
    "epoch,steps,sup_top,sup_front,adv_top,adv_front,discr_top,discr_front,val_sup";
std::string to_csv(const std::vector<TrainLogRow>& rows);

struct Checkpoint {
  RunConfig run;
  int epochs_completed = 0;
  std::uint64_t dataset_seed = 0;
  nn::ParamSet params;
  nn::ParamSet velocity;
};

// `<dir>/checkpoint.bin` (tensors, momentum buffers prefixed "opt.") and
// `<dir>/checkpoint.json` (run config and progress).
void save_checkpoint_dir(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint_dir(const std::filesystem::path& dir);

struct TrainResult {
  std::vector<TrainLogRow> log;
  Checkpoint checkpoint;
};

// Trains on the manifest's train split and writes checkpoint + loss.csv into
// out_dir after every epoch. With `resume`, continues from out_dir's checkpoint.
TrainResult cmd_train(const std::filesystem::path& manifest, const RunConfig& run, const std::filesystem::path& out_dir,
                      bool resume = false, bool quiet = true);

// Trains in memory on the given samples; `on_epoch` sees every finished epoch.
TrainResult train_on_samples(const std::vector<Sample>& train, const std::vector<Sample>& val, const RunConfig& run,
                             std::optional<Checkpoint> start = std::nullopt,
                             const std::function<void(const TrainResult&)>& on_epoch = {},
                             bool quiet = true);

// GT passthrough when `checkpoint` is empty.
EvalTable evaluate_samples(const std::vector<Sample>& samples, const std::optional<Checkpoint>& checkpoint);

EvalTable cmd_eval(const std::filesystem::path& manifest, const std::optional<std::filesystem::path>& checkpoint_dir,
                   Split split, const std::filesystem::path& out_dir);

struct ReasonOutput {
  RackReport report;
  std::string sentence;
  Image overlay;
};

// Layouts come from the checkpoint, or from GT when `oracle` is set (which
// needs a dataset sample). Shelf geometry comes from the scene when known.
ReasonOutput reason_on_sample(const DatasetManifest& m, const std::filesystem::path& root, int index,
                              const std::optional<Checkpoint>& checkpoint);
ReasonOutput reason_on_image(const Image& image, const CameraModel& cam, const Checkpoint& checkpoint);
void write_reason_output(const std::filesystem::path& out_dir, const ReasonOutput& out);

inline constexpr Rgb kVizBackground{255, 192, 203};
inline constexpr Rgb kVizUnoccupied{0, 0, 139};
inline constexpr Rgb kVizOccupied{0, 200, 0};

// Channels side by side, bottom shelf on the left, `scale` pixels per cell.
Image layout_image(const LayoutTensor& layout, int scale = 1);

// Writes viz_<view>.ppm for GT (and pred_<view>.ppm when a checkpoint is given).
std::vector<std::filesystem::path> cmd_viz(const DatasetManifest& m, const std::filesystem::path& root, int index,
                                           const std::optional<Checkpoint>& checkpoint,
                                           const std::filesystem::path& out_dir, int scale = 4);

inline constexpr const char* kAblationCsvHeader =
    "variant,top_rack_miou,top_rack_map,top_box_miou,top_box_map,"
    "front_rack_miou,front_rack_map,front_box_miou,front_box_map";

struct AblationRow {
  std::string variant;
  EvalTable table;
};

// Trains s, s-disc, d and d-disc with the same seed and data. S variants are
// trained once per view and scored together.
std::vector<AblationRow> cmd_ablation(const std::filesystem::path& manifest, const RunConfig& base,
                                      const std::filesystem::path& out_dir, bool quiet = true);
std::string ablation_csv(const std::vector<AblationRow>& rows);

}  // namespace racklay
