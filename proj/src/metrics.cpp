#include "racklay/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace racklay {

namespace {

constexpr EvalClass kClasses[2] = {EvalClass::Rack, EvalClass::Box};
constexpr View kViews[2] = {View::Top, View::Front};

void same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) throw std::invalid_argument(std::string(op) + ": inputs differ in size");
}

template <typename Pred>
double iou_by(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, Pred member) {
  same_size(pred.size(), gt.size(), "iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const bool p = member(pred[i]);
    const bool g = member(gt[i]);
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

const char* class_name(EvalClass c) { return c == EvalClass::Rack ? "rack" : "box"; }

bool in_class(std::uint8_t label, EvalClass c) {
  return c == EvalClass::Rack ? label != kBackground : label == kOccupied;
}

double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, std::uint8_t class_id) {
  return iou_by(pred, gt, [class_id](std::uint8_t l) { return l == class_id; });
}

double iou(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> gt, EvalClass c) {
  return iou_by(pred, gt, [c](std::uint8_t l) { return in_class(l, c); });
}

std::optional<double> average_precision(std::span<const double> scores, std::span<const std::uint8_t> gt_mask) {
  same_size(scores.size(), gt_mask.size(), "average_precision");
  const std::size_t positives =
      static_cast<std::size_t>(std::count_if(gt_mask.begin(), gt_mask.end(), [](std::uint8_t m) { return m != 0; }));
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t seen = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::size_t block_tp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      block_tp += gt_mask[order[i]] != 0;
      ++seen;
      ++i;
    }
    if (block_tp == 0) continue;
    tp += block_tp;
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += precision * static_cast<double>(block_tp) / static_cast<double>(positives);
  }
  return ap;
}

std::vector<double> class_scores(std::span<const float> p, EvalClass c) {
  if (p.size() % 3 != 0) throw std::invalid_argument("class_scores: expected 3 class planes");
  const std::size_t cells = p.size() / 3;
  std::vector<double> out(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    out[i] = c == EvalClass::Box ? static_cast<double>(p[2 * cells + i])
                                 : static_cast<double>(p[cells + i]) + static_cast<double>(p[2 * cells + i]);
  }
  return out;
}

void Evaluator::add(const LayoutTensor& pred, const nn::Tensor<float>* probs, const LayoutTensor& gt) {
  if (pred.view != gt.view || pred.channels != gt.channels || pred.size != gt.size) {
    throw std::invalid_argument("evaluate: prediction and GT layouts differ in shape or view");
  }
  const std::size_t cells = static_cast<std::size_t>(gt.size) * gt.size;
  if (probs != nullptr && probs->numel() != cells * 3 * static_cast<std::size_t>(gt.channels)) {
    throw std::invalid_argument("evaluate: probability tensor does not match the layout");
  }
  const int vi = static_cast<int>(gt.view);
  bool counted = false;
  for (int ci = 0; ci < 2; ++ci) {
    const EvalClass c = kClasses[ci];
    double iou_sum = 0.0;
    int iou_n = 0;
    double ap_sum = 0.0;
    int ap_n = 0;
    for (int ch = 0; ch < gt.channels; ++ch) {
      const auto g = gt.channel(ch);
      const auto p = pred.channel(ch);
      const bool gt_has = std::any_of(g.begin(), g.end(), [c](std::uint8_t l) { return in_class(l, c); });
      const bool pred_has = std::any_of(p.begin(), p.end(), [c](std::uint8_t l) { return in_class(l, c); });
      if (!gt_has && !pred_has) continue;
      iou_sum += iou(p, g, c);
      ++iou_n;
      std::vector<std::uint8_t> mask(cells);
      for (std::size_t i = 0; i < cells; ++i) mask[i] = in_class(g[i], c);
      std::vector<double> scores(cells);
      if (probs != nullptr) {
        scores = class_scores({probs->data() + static_cast<std::size_t>(ch) * 3 * cells, 3 * cells}, c);
      } else {
        for (std::size_t i = 0; i < cells; ++i) scores[i] = in_class(p[i], c) ? 1.0 : 0.0;
      }
      const auto ap = average_precision(scores, mask);
      if (ap) {
        ap_sum += *ap;
        ++ap_n;
      } else {
        ++sums_[vi][ci].ap_excluded;
      }
    }
    if (iou_n > 0) {
      sums_[vi][ci].iou += iou_sum / iou_n;
      ++sums_[vi][ci].iou_n;
      counted = true;
    }
    if (ap_n > 0) {
      sums_[vi][ci].ap += ap_sum / ap_n;
      ++sums_[vi][ci].ap_n;
    }
  }
  if (counted) ++images_[vi];
}

EvalTable Evaluator::table() const {
  EvalTable t;
  for (int vi = 0; vi < 2; ++vi) {
    for (int ci = 0; ci < 2; ++ci) {
      const Sum& s = sums_[vi][ci];
      EvalCell& cell = t.cells[vi][ci];
      cell.images = s.iou_n;
      cell.ap_images = s.ap_n;
      cell.ap_excluded_channels = s.ap_excluded;
      cell.miou = s.iou_n ? 100.0 * s.iou / s.iou_n : 0.0;
      cell.map = s.ap_n ? 100.0 * s.ap / s.ap_n : 0.0;
    }
  }
  return t;
}

std::string to_csv(const EvalTable& t) {
  std::string out = std::string(kEvalCsvHeader) + "\n";
  char line[128];
  for (View v : kViews) {
    for (EvalClass c : kClasses) {
      const EvalCell& cell = t.at(v, c);
      if (cell.populated()) {
        std::snprintf(line, sizeof line, "%s,%s,%.4f,%.4f\n", view_name(v), class_name(c), cell.miou, cell.map);
      } else {
        std::snprintf(line, sizeof line, "%s,%s,,\n", view_name(v), class_name(c));
      }
      out += line;
    }
  }
  return out;
}

Json to_json(const EvalTable& t) {
  Json rows = Json::array();
  for (View v : kViews) {
    for (EvalClass c : kClasses) {
      const EvalCell& cell = t.at(v, c);
      Json row = {{"view", view_name(v)}, {"class", class_name(c)}};
      if (cell.populated()) {
        row["miou"] = cell.miou;
        row["map"] = cell.map;
      } else {
        row["miou"] = nullptr;
        row["map"] = nullptr;
      }
      row["images"] = cell.images;
      row["ap_images"] = cell.ap_images;
      row["ap_excluded_channels"] = cell.ap_excluded_channels;
      rows.push_back(row);
    }
  }
  return {{"version", kSchemaVersion}, {"rows", rows}};
}

}  // namespace racklay
