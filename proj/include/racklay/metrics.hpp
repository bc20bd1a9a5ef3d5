#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "racklay/gtlayout.hpp"
#include "racklay/io.hpp"
#include "racklay/nn/tensor.hpp"

namespace racklay {

// Rack = unoccupied or occupied (the shelf footprint); Box = occupied.
enum class EvalClass { Rack, Box };
const char* class_name(EvalClass c);

bool in_class(std::uint8_t label, EvalClass c);

// |pred ∩ gt| / |pred ∪ gt| over cells whose label equals class_id; 1 when
// both masks are empty.
double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, std::uint8_t class_id);
double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, EvalClass c);

// Area under the precision-recall step curve with cells ranked by score,
// cells of equal score entering together. Empty when gt has no positives.
std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> gt_mask);

// Per-cell class score from softmax probabilities [3, D, D] of one channel.
std::vector<double> class_scores(std::span<const float> channel_probs, EvalClass c);

struct EvalCell {
  double miou = 0.0;  // [0, 100]
  double map = 0.0;   // [0, 100]
  int images = 0;     // images with at least one scored channel
  int ap_images = 0;
  int ap_excluded_channels = 0;  // channels skipped because GT had no positives
  bool populated() const { return images > 0; }
};

struct EvalTable {
  std::array<std::array<EvalCell, 2>, 2> cells{};  // [view][class]

  EvalCell& at(View v, EvalClass c) { return cells[static_cast<int>(v)][static_cast<int>(c)]; }
  const EvalCell& at(View v, EvalClass c) const { return cells[static_cast<int>(v)][static_cast<int>(c)]; }
};

inline constexpr const char* kEvalCsvHeader = "view,class,miou,map";

std::string to_csv(const EvalTable& t);
Json to_json(const EvalTable& t);

// Accumulates per-image scores. For each class a channel counts toward mIoU
// when GT or prediction contains the class, and toward mAP when GT does.
class Evaluator {
 public:
  // probs: [R*3, D, D] softmax output, or empty to score with hard labels.
  void add(const LayoutTensor& pred, const nn::Tensor<float>* probs, const LayoutTensor& gt);
  EvalTable table() const;
  int images(View v) const { return images_[static_cast<int>(v)]; }

 private:
  struct Sum {
    double iou = 0.0;
    int iou_n = 0;
    double ap = 0.0;
    int ap_n = 0;
    int ap_excluded = 0;
  };
  std::array<std::array<Sum, 2>, 2> sums_{};
  std::array<int, 2> images_{};
};

}  // namespace racklay
