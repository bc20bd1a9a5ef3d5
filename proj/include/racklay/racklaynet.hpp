#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "racklay/gtlayout.hpp"
#include "racklay/nn/graph.hpp"
#include "racklay/nn/params.hpp"
#include "racklay/render.hpp"

namespace racklay {

// S variants carry one decoder for `view`; D variants carry both.
struct Variant {
  bool dual = true;
  bool adversarial = true;
  View view = View::Top;  // S variants only

  bool has_view(View v) const { return dual || v == view; }
  std::vector<View> views() const;
  std::string name() const;  // "s", "s-disc", "d", "d-disc"

  friend bool operator==(const Variant&, const Variant&) = default;
};

// Parses "s", "s-disc", "d", "d-disc". A view is required for S variants and
// rejected for D variants.
Variant parse_variant(const std::string& name, const std::optional<View>& view);

struct ModelConfig {
  int image_width = 128;
  int image_height = 128;
  int channels = 4;    // R
  int grid_size = 64;  // D
  std::array<int, 4> encoder_widths{16, 32, 64, 64};
  int encoder_downsample = 8;  // 2, 4, 8 or 16: leading encoder blocks stride 2
  int bridge_channels = 32;
  // Side of the grid the view transform writes; the decoder upsamples it to
  // grid_size. 0 means the context size.
  int transform_size = 0;
  // 0: dense per-column bridge. >0: per-column row attention with this many
  // heads splitting bridge_channels.
  int attention_heads = 0;
  int decoder_width = 32;
  int discriminator_width = 32;
  float leaky_slope = 0.1f;
  // Prediction averages the class probabilities of the image and of its
  // mirror image (flipped back). Training is unaffected.
  bool test_flip = false;

  int context_height() const { return image_height / encoder_downsample; }
  int context_width() const { return image_width / encoder_downsample; }
  // Stride of the first conv in encoder block b.
  int encoder_stride(int b) const { return (2 << b) <= encoder_downsample ? 2 : 1; }
  int transform_side() const { return transform_size > 0 ? transform_size : context_width(); }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Throws std::invalid_argument when the grid cannot be reached by doubling
// the context size.
void validate(const ModelConfig& cfg);

struct TrainConfig {
  nn::OptimizerKind optimizer = nn::OptimizerKind::Sgd;
  double lr = 0.01;
  double momentum = 0.9;  // Adam beta1 when optimizer is adam
  double weight_decay = 0.0;  // decoupled, weights only
  double lambda_adv = 0.01;
  int epochs = 30;
  int batch_size = 8;
  std::uint64_t seed = 1;
  std::array<float, 3> class_weights{0.2f, 1.0f, 1.0f};
  bool flip_augment = false;  // mirror each training sample with probability 1/2
  bool cosine_lr = false;     // lr * (1 + cos(pi * epoch / epochs)) / 2 per epoch

  double lr_at(int epoch) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct LossReport {
  double sup_top = 0.0;
  double sup_front = 0.0;
  double adv_top = 0.0;
  double adv_front = 0.0;
  double discr_top = 0.0;
  double discr_front = 0.0;

  double sup_total() const { return sup_top + sup_front; }
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

// One training example: image plus GT for every view the variant needs.
struct Sample {
  Image image;
  LayoutTensor top;
  LayoutTensor front;
};

// Left-right mirror of image and layouts. The layout grid is symmetric about
// the rack center, so this is the sample of the mirrored scene.
Sample mirrored(const Sample& s);

// A batch in network layout.
struct Batch {
  nn::Tensor<float> images;           // [N, 3, H, W]
  std::vector<std::uint8_t> top;      // [N, R, D, D]
  std::vector<std::uint8_t> front;
  int size = 0;
};

Batch make_batch(const std::vector<const Sample*>& samples, const ModelConfig& cfg);

// Maps 8-bit RGB into [-0.5, 0.5].
nn::Tensor<float> image_tensor(const Image& image);

// Parameter names: "enc.*", "top.*", "front.*", "disc_top.*", "disc_front.*".
nn::ParamSet init_params(const ModelConfig& cfg, const Variant& variant, std::uint64_t seed);

const char* decoder_prefix(View v);
const char* discriminator_prefix(View v);
// Name of the final per-channel head of a decoder; rows [3i, 3i+3) of its
// weight belong to shelf channel i.
std::string head_weight_name(View v);
std::string head_bias_name(View v);

// Resolves parameters into a graph on first use; `trainable` selects between
// parameter and constant nodes.
class Binder {
 public:
  Binder(nn::Graph<float>& g, const nn::ParamSet& params, bool trainable)
      : g_(g), params_(params), trainable_(trainable) {}

  nn::Var operator()(const std::string& name);
  const std::vector<std::pair<std::string, nn::Var>>& bound() const { return bound_; }
  nn::Graph<float>& graph() { return g_; }

 private:
  nn::Graph<float>& g_;
  const nn::ParamSet& params_;
  bool trainable_;
  std::vector<std::pair<std::string, nn::Var>> bound_;
};

// Context encoder: [N, 3, H, W] -> [N, C, H/8, W/8].
nn::Var encode(Binder& bind, const ModelConfig& cfg, nn::Var image);
// Decoder of one view: context -> logits [N, R*3, D, D].
nn::Var decode(Binder& bind, const ModelConfig& cfg, View view, nn::Var context);
// Patch discriminator: [N, R*3, D, D] -> [N, 1, D/16, D/16].
nn::Var discriminate(Binder& bind, const ModelConfig& cfg, View view, nn::Var layout);

// Number of encode() calls made by this process; lets tests confirm a D
// variant shares one context between both decoders.
std::uint64_t encode_invocations();

nn::Tensor<float> encode_image(const nn::ParamSet& params, const ModelConfig& cfg, const Image& image);
nn::Tensor<float> decode_context(const nn::ParamSet& params, const ModelConfig& cfg, View view,
                                 const nn::Tensor<float>& context);

// GT labels [N, R, D, D] as one-hot probabilities [N, R*3, D, D].
nn::Tensor<float> one_hot(std::span<const std::uint8_t> labels, int n, int channels, int size);

class Model {
 public:
  Model(ModelConfig cfg, Variant variant, TrainConfig train, nn::ParamSet params);
  static Model initialized(const ModelConfig& cfg, const Variant& variant, const TrainConfig& train);

  // Generator update: L_sup (+ lambda_adv L_adv) through the frozen discriminators.
  // Fills the supervised and adversarial terms of `report`; returns the fake
  // layout probabilities per active view for the discriminator update.
  std::vector<nn::Tensor<float>> generator_step(const Batch& batch, LossReport& report);
  // Discriminator update on one-hot GT (real) versus the given fakes.
  void discriminator_step(const Batch& batch, const std::vector<nn::Tensor<float>>& fakes, LossReport& report);
  LossReport train_step(const Batch& batch);
  // Forward pass only: supervised terms for the batch.
  LossReport supervised_loss(const Batch& batch) const;

  const ModelConfig& config() const { return cfg_; }
  const Variant& variant() const { return variant_; }
  const TrainConfig& train_config() const { return train_; }
  TrainConfig& train_config() { return train_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }
  nn::Optimizer& optimizer() { return opt_; }
  const nn::Optimizer& optimizer() const { return opt_; }

 private:
  nn::Var supervised(Binder& bind, nn::Var logits, std::span<const std::uint8_t> labels);

  ModelConfig cfg_;
  Variant variant_;
  TrainConfig train_;
  nn::ParamSet params_;
  nn::Optimizer opt_;
};

struct Prediction {
  std::optional<LayoutTensor> top;
  std::optional<LayoutTensor> front;
  // Softmax probabilities [R*3, D, D] per available view, for AP.
  std::optional<nn::Tensor<float>> top_probs;
  std::optional<nn::Tensor<float>> front_probs;

  const std::optional<LayoutTensor>& layout(View v) const { return v == View::Top ? top : front; }
  const std::optional<nn::Tensor<float>>& probs(View v) const { return v == View::Top ? top_probs : front_probs; }
};

// One encode, then every decoder of the variant. Argmax ties go to the lowest
// class index.
Prediction predict(const Image& image, const nn::ParamSet& params, const ModelConfig& cfg, const Variant& variant,
                   double extent_m);

// Argmax over each consecutive triple of channels.
LayoutTensor argmax_layout(const nn::Tensor<float>& logits, View view, int channels, int size, double extent_m);

// Cell-label agreement with GT over all channels.
double label_accuracy(const LayoutTensor& pred, const LayoutTensor& gt);

}  // namespace racklay
