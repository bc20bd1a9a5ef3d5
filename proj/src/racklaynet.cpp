#include "racklay/racklaynet.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "racklay/nn/ops.hpp"

namespace racklay {

using nn::Graph;
using nn::ParamSet;
using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

std::atomic<std::uint64_t> g_encode_calls{0};

constexpr int kClasses = kNumLabels;
constexpr int kAttentionKeyWidth = 16;

int upsample_stages(const ModelConfig& cfg) {
  int stages = 0;
  for (int side = cfg.transform_side(); side < cfg.grid_size; side *= 2) ++stages;
  return stages;
}

Var conv(Binder& bind, const std::string& name, Var x, int stride, int kernel) {
  return nn::conv2d(bind.graph(), x, bind(name + ".w"), bind(name + ".b"), stride, kernel / 2);
}

Var act(Binder& bind, const ModelConfig& cfg, Var x) { return nn::leaky_relu(bind.graph(), x, cfg.leaky_slope); }

void add_conv(ParamSet& p, const std::string& name, int cin, int cout, int k, std::uint64_t seed) {
  p.add(name + ".w", nn::he_uniform({cout, cin, k, k}, cin * k * k, seed, name + ".w"));
  p.add(name + ".b", Tensor<float>({cout}));
}

void add_encoder(ParamSet& p, const ModelConfig& cfg, std::uint64_t seed) {
  int cin = 3;
  for (int b = 0; b < 4; ++b) {
    const int w = cfg.encoder_widths[static_cast<std::size_t>(b)];
    const std::string prefix = "enc.b" + std::to_string(b);
    add_conv(p, prefix + ".c0", cin, w, 3, seed);
    add_conv(p, prefix + ".c1", w, w, 3, seed);
    cin = w;
  }
}

void add_decoder(ParamSet& p, const ModelConfig& cfg, View view, std::uint64_t seed) {
  const std::string prefix = decoder_prefix(view);
  const int c = cfg.encoder_widths[3];
  const int h = cfg.context_height();
  const int w = cfg.context_width();
  const int t = cfg.transform_side();
  if (cfg.attention_heads > 0) {
    const int heads = cfg.attention_heads;
    add_conv(p, prefix + "keys", c, heads * kAttentionKeyWidth, 1, seed);
    add_conv(p, prefix + "values", c, cfg.bridge_channels, 1, seed);
    p.add(prefix + "queries", nn::he_uniform({heads, t, kAttentionKeyWidth}, kAttentionKeyWidth, seed, prefix + "queries"));
    p.add(prefix + "pos", Tensor<float>({heads, t, h}));
  } else {
    add_conv(p, prefix + "bridge", c * h, cfg.bridge_channels * t, 1, seed);
  }
  // Starts as nearest-neighbour resampling of context columns onto t columns.
  Tensor<float> lateral({w, t});
  for (int j = 0; j < t; ++j) lateral[static_cast<std::size_t>(j * w / t) * t + j] = 1.0f;
  p.add(prefix + "lateral", std::move(lateral));
  add_conv(p, prefix + "c0", cfg.bridge_channels, cfg.decoder_width, 3, seed);
  const int stages = upsample_stages(cfg);
  int width = cfg.decoder_width;
  for (int s = 0; s < stages; ++s) {
    const int out = s + 1 == stages ? std::max(8, cfg.decoder_width / 2) : cfg.decoder_width;
    add_conv(p, prefix + "up" + std::to_string(s), width, out, 3, seed);
    width = out;
  }
  add_conv(p, prefix + "head", width, cfg.channels * kClasses, 3, seed);
}

void add_discriminator(ParamSet& p, const ModelConfig& cfg, View view, std::uint64_t seed) {
  const std::string prefix = discriminator_prefix(view);
  const int dw = cfg.discriminator_width;
  const int widths[4] = {dw, 2 * dw, 2 * dw, 1};
  int cin = cfg.channels * kClasses;
  for (int i = 0; i < 4; ++i) {
    add_conv(p, prefix + "c" + std::to_string(i), cin, widths[i], 3, seed);
    cin = widths[i];
  }
}

void check_finite(double v, const char* term) {
  if (!std::isfinite(v)) {
    std::ostringstream os;
    os << "non-finite " << term << " loss (" << v << "); aborting training";
    throw std::runtime_error(os.str());
  }
}

std::span<const std::uint8_t> labels_for(const Batch& b, View v) { return v == View::Top ? b.top : b.front; }

}  // namespace

std::vector<View> Variant::views() const {
  if (dual) return {View::Top, View::Front};
  return {view};
}

std::string Variant::name() const {
  std::string n = dual ? "d" : "s";
  if (adversarial) n += "-disc";
  return n;
}

Variant parse_variant(const std::string& name, const std::optional<View>& view) {
  Variant v;
  if (name == "s" || name == "s-disc") {
    v.dual = false;
  } else if (name == "d" || name == "d-disc") {
    v.dual = true;
  } else {
    throw std::invalid_argument("unknown variant '" + name + "' (expected s, s-disc, d or d-disc)");
  }
  v.adversarial = name.ends_with("-disc");
  if (v.dual && view) throw std::invalid_argument("--view applies to S variants only; D variants predict both views");
  if (!v.dual) {
    if (!view) throw std::invalid_argument("S variants need a view (top or front)");
    v.view = *view;
  }
  return v;
}

void validate(const ModelConfig& cfg) {
  auto fail = [](const std::string& m) { throw std::invalid_argument("invalid model config: " + m); };
  const int f = cfg.encoder_downsample;
  if (f != 2 && f != 4 && f != 8 && f != 16) fail("encoder_downsample must be 2, 4, 8 or 16");
  if (cfg.image_width % f != 0 || cfg.image_height % f != 0 || cfg.image_width < f || cfg.image_height < f) {
    fail("image sides must be positive multiples of encoder_downsample");
  }
  if (cfg.channels < 1) fail("channels must be >= 1");
  if (cfg.grid_size % 16 != 0) fail("grid size must be a multiple of 16 for the patch discriminator");
  if (cfg.context_height() != cfg.context_width()) fail("square images are required");
  if (cfg.transform_size < 0) fail("transform_size must be >= 0");
  int side = cfg.transform_side();
  while (side < cfg.grid_size) side *= 2;
  if (side != cfg.grid_size) fail("grid size must be the transform size times a power of two");
  for (int w : cfg.encoder_widths) {
    if (w < 1) fail("encoder widths must be positive");
  }
  if (cfg.attention_heads < 0) fail("attention_heads must be >= 0");
  if (cfg.attention_heads > 0 && cfg.bridge_channels % cfg.attention_heads != 0) {
    fail("bridge_channels must be a multiple of attention_heads");
  }
  if (cfg.bridge_channels < 1 || cfg.decoder_width < 1 || cfg.discriminator_width < 1) {
    fail("layer widths must be positive");
  }
}

const char* decoder_prefix(View v) { return v == View::Top ? "top." : "front."; }
const char* discriminator_prefix(View v) { return v == View::Top ? "disc_top." : "disc_front."; }
std::string head_weight_name(View v) { return std::string(decoder_prefix(v)) + "head.w"; }
std::string head_bias_name(View v) { return std::string(decoder_prefix(v)) + "head.b"; }

ParamSet init_params(const ModelConfig& cfg, const Variant& variant, std::uint64_t seed) {
  validate(cfg);
  ParamSet p;
  add_encoder(p, cfg, seed);
  for (View v : variant.views()) add_decoder(p, cfg, v, seed);
  if (variant.adversarial) {
    for (View v : variant.views()) add_discriminator(p, cfg, v, seed);
  }
  return p;
}

Var Binder::operator()(const std::string& name) {
  for (const auto& [n, v] : bound_) {
    if (n == name) return v;
  }
  const Tensor<float>& t = params_.get(name);
  const Var v = trainable_ ? g_.parameter(t) : g_.constant(t);
  bound_.emplace_back(name, v);
  return v;
}

Var encode(Binder& bind, const ModelConfig& cfg, Var image) {
  const Tensor<float>& x = bind.graph().value(image);
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != cfg.image_height || x.dim(3) != cfg.image_width) {
    throw nn::ShapeError("encode: expected [N, 3, " + std::to_string(cfg.image_height) + ", " +
                         std::to_string(cfg.image_width) + "], got " + x.shape());
  }
  ++g_encode_calls;
  Var h = image;
  for (int b = 0; b < 4; ++b) {
    const std::string prefix = "enc.b" + std::to_string(b);
    h = act(bind, cfg, conv(bind, prefix + ".c0", h, cfg.encoder_stride(b), 3));
    h = act(bind, cfg, conv(bind, prefix + ".c1", h, 1, 3));
  }
  return h;
}

Var decode(Binder& bind, const ModelConfig& cfg, View view, Var context) {
  Graph<float>& g = bind.graph();
  const std::string prefix = decoder_prefix(view);
  const Tensor<float>& ctx = g.value(context);
  const int n = ctx.dim(0);
  const int c = ctx.dim(1);
  const int h = ctx.dim(2);
  const int w = ctx.dim(3);
  // View transform: every context column is flattened over its rows and
  // mapped by one dense layer to every output row, so each layout row can
  // draw on any image row. The lateral matrix then re-maps columns.
  // With attention, each output row instead picks image rows by content
  // plus a learned positional bias, which follows the rack as the camera
  // height moves it up and down the image.
  const int t = cfg.transform_side();
  Var grid;
  if (cfg.attention_heads > 0) {
    Var keys = conv(bind, prefix + "keys", context, 1, 1);
    Var values = conv(bind, prefix + "values", context, 1, 1);
    grid = nn::row_attention(g, keys, values, bind(prefix + "queries"), bind(prefix + "pos"), cfg.attention_heads);
  } else {
    Var cols = nn::reshape(g, context, Shape{n, c * h, 1, w});
    Var bridged = act(bind, cfg, conv(bind, prefix + "bridge", cols, 1, 1));
    grid = nn::reshape(g, bridged, Shape{n, cfg.bridge_channels, t, w});
  }
  grid = nn::linear_last_axis(g, grid, bind(prefix + "lateral"));
  Var y = act(bind, cfg, conv(bind, prefix + "c0", grid, 1, 3));
  const int stages = upsample_stages(cfg);
  for (int s = 0; s < stages; ++s) {
    y = nn::upsample_nearest(g, y, 2);
    y = act(bind, cfg, conv(bind, prefix + "up" + std::to_string(s), y, 1, 3));
  }
  return conv(bind, prefix + "head", y, 1, 3);
}

Var discriminate(Binder& bind, const ModelConfig& cfg, View view, Var layout) {
  const std::string prefix = discriminator_prefix(view);
  Var y = layout;
  for (int i = 0; i < 4; ++i) {
    y = conv(bind, prefix + "c" + std::to_string(i), y, 2, 3);
    if (i < 3) y = act(bind, cfg, y);
  }
  return y;
}

std::uint64_t encode_invocations() { return g_encode_calls.load(); }

Tensor<float> image_tensor(const Image& image) {
  Tensor<float> t({1, 3, image.height, image.width});
  const std::size_t plane = static_cast<std::size_t>(image.width) * image.height;
  for (std::size_t i = 0; i < plane; ++i) {
    for (int ch = 0; ch < 3; ++ch) {
      t[ch * plane + i] = static_cast<float>(image.pixels[3 * i + static_cast<std::size_t>(ch)]) / 255.0f - 0.5f;
    }
  }
  return t;
}

double TrainConfig::lr_at(int epoch) const {
  if (!cosine_lr || epochs <= 0) return lr;
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * epoch / epochs));
}

Sample mirrored(const Sample& s) {
  Sample m = s;
  for (int y = 0; y < s.image.height; ++y) {
    for (int x = 0; x < s.image.width; ++x) {
      const auto src = 3 * (static_cast<std::size_t>(y) * s.image.width + (s.image.width - 1 - x));
      const auto dst = 3 * (static_cast<std::size_t>(y) * s.image.width + x);
      std::copy_n(s.image.pixels.begin() + static_cast<std::ptrdiff_t>(src), 3,
                  m.image.pixels.begin() + static_cast<std::ptrdiff_t>(dst));
    }
  }
  for (auto [from, to] : {std::pair{&s.top, &m.top}, std::pair{&s.front, &m.front}}) {
    if (from->cells.empty()) continue;
    for (int ch = 0; ch < from->channels; ++ch) {
      for (int r = 0; r < from->size; ++r) {
        for (int c = 0; c < from->size; ++c) to->cells[to->index(ch, r, c)] = from->at(ch, r, from->size - 1 - c);
      }
    }
  }
  return m;
}

Batch make_batch(const std::vector<const Sample*>& samples, const ModelConfig& cfg) {
  Batch b;
  b.size = static_cast<int>(samples.size());
  b.images = Tensor<float>({b.size, 3, cfg.image_height, cfg.image_width});
  const std::size_t per_image = static_cast<std::size_t>(3) * cfg.image_height * cfg.image_width;
  const std::size_t per_layout = static_cast<std::size_t>(cfg.channels) * cfg.grid_size * cfg.grid_size;
  for (int i = 0; i < b.size; ++i) {
    const Sample& s = *samples[static_cast<std::size_t>(i)];
    if (s.image.width != cfg.image_width || s.image.height != cfg.image_height) {
      throw std::invalid_argument("sample image is " + std::to_string(s.image.width) + "x" +
                                  std::to_string(s.image.height) + ", model expects " +
                                  std::to_string(cfg.image_width) + "x" + std::to_string(cfg.image_height));
    }
    const Tensor<float> img = image_tensor(s.image);
    std::copy(img.data(), img.data() + per_image, b.images.data() + i * per_image);
    for (const LayoutTensor* l : {&s.top, &s.front}) {
      if (l->cells.empty()) continue;
      if (l->cells.size() != per_layout) throw std::invalid_argument("GT layout does not match the model's R and D");
    }
    auto append = [&](std::vector<std::uint8_t>& dst, const LayoutTensor& l) {
      if (l.cells.empty()) return;
      dst.insert(dst.end(), l.cells.begin(), l.cells.end());
    };
    append(b.top, s.top);
    append(b.front, s.front);
  }
  return b;
}

Tensor<float> one_hot(std::span<const std::uint8_t> labels, int n, int channels, int size) {
  Tensor<float> t({n, channels * kClasses, size, size});
  const std::size_t cells = static_cast<std::size_t>(size) * size;
  for (std::size_t ng = 0; ng < static_cast<std::size_t>(n) * channels; ++ng) {
    for (std::size_t c = 0; c < cells; ++c) {
      const std::uint8_t l = labels[ng * cells + c];
      t[(ng * kClasses + l) * cells + c] = 1.0f;
    }
  }
  return t;
}

Model::Model(ModelConfig cfg, Variant variant, TrainConfig train, ParamSet params)
    : cfg_(cfg), variant_(variant), train_(train), params_(std::move(params)), opt_(train.optimizer, train.lr, train.momentum) {
  validate(cfg_);
  opt_.set_weight_decay(train.weight_decay);
}

Model Model::initialized(const ModelConfig& cfg, const Variant& variant, const TrainConfig& train) {
  return Model(cfg, variant, train, init_params(cfg, variant, train.seed));
}

Var Model::supervised(Binder& bind, Var logits, std::span<const std::uint8_t> labels) {
  return nn::softmax_cross_entropy<float>(bind.graph(), logits, labels, kClasses,
                                          std::span<const float>(train_.class_weights));
}

std::vector<Tensor<float>> Model::generator_step(const Batch& batch, LossReport& report) {
  Graph<float> g;
  Binder gen(g, params_, true);
  Binder frozen(g, params_, false);
  Var ctx = encode(gen, cfg_, g.constant(batch.images));
  Var total;
  std::vector<Tensor<float>> fakes;
  for (View v : variant_.views()) {
    const auto labels = labels_for(batch, v);
    if (labels.empty()) throw std::invalid_argument(std::string("batch lacks ") + view_name(v) + " ground truth");
    Var logits = decode(gen, cfg_, v, ctx);
    Var term = supervised(gen, logits, labels);
    const double sup = g.value(term)[0];
    check_finite(sup, v == View::Top ? "L_sup_top" : "L_sup_front");
    (v == View::Top ? report.sup_top : report.sup_front) = sup;
    if (variant_.adversarial) {
      Var probs = nn::softmax_over_classes(g, logits, kClasses);
      fakes.push_back(g.value(probs));
      Var adv = nn::lsgan_gen_loss(g, discriminate(frozen, cfg_, v, probs));
      const double a = g.value(adv)[0];
      check_finite(a, v == View::Top ? "L_adv_top" : "L_adv_front");
      (v == View::Top ? report.adv_top : report.adv_front) = a;
      term = nn::add(g, term, nn::scale(g, adv, static_cast<float>(train_.lambda_adv)));
    }
    total = total.valid() ? nn::add(g, total, term) : term;
  }
  g.backward(total);
  for (const auto& [name, var] : gen.bound()) opt_.step(params_.get(name), g.grad(var), name);
  return fakes;
}

void Model::discriminator_step(const Batch& batch, const std::vector<Tensor<float>>& fakes, LossReport& report) {
  if (!variant_.adversarial) return;
  const auto views = variant_.views();
  if (fakes.size() != views.size()) throw std::invalid_argument("discriminator step needs one fake per view");
  for (std::size_t i = 0; i < views.size(); ++i) {
    const View v = views[i];
    Graph<float> g;
    Binder disc(g, params_, true);
    Var real = g.constant(one_hot(labels_for(batch, v), batch.size, cfg_.channels, cfg_.grid_size));
    Var fake = g.constant(fakes[i]);
    Var loss = nn::lsgan_disc_loss(g, discriminate(disc, cfg_, v, real), discriminate(disc, cfg_, v, fake));
    const double l = g.value(loss)[0];
    check_finite(l, v == View::Top ? "L_discr_top" : "L_discr_front");
    (v == View::Top ? report.discr_top : report.discr_front) = l;
    g.backward(loss);
    for (const auto& [name, var] : disc.bound()) opt_.step(params_.get(name), g.grad(var), name);
  }
}

LossReport Model::train_step(const Batch& batch) {
  LossReport report;
  const auto fakes = generator_step(batch, report);
  discriminator_step(batch, fakes, report);
  return report;
}

LossReport Model::supervised_loss(const Batch& batch) const {
  Graph<float> g;
  Binder bind(g, params_, false);
  Var ctx = encode(bind, cfg_, g.constant(batch.images));
  LossReport report;
  for (View v : variant_.views()) {
    Var logits = decode(bind, cfg_, v, ctx);
    const double sup = g.value(nn::softmax_cross_entropy<float>(g, logits, labels_for(batch, v), kClasses,
                                                                std::span<const float>(train_.class_weights)))[0];
    (v == View::Top ? report.sup_top : report.sup_front) = sup;
  }
  return report;
}

Tensor<float> encode_image(const ParamSet& params, const ModelConfig& cfg, const Image& image) {
  Graph<float> g;
  Binder bind(g, params, false);
  return g.value(encode(bind, cfg, g.constant(image_tensor(image))));
}

Tensor<float> decode_context(const ParamSet& params, const ModelConfig& cfg, View view, const Tensor<float>& context) {
  Graph<float> g;
  Binder bind(g, params, false);
  return g.value(decode(bind, cfg, view, g.constant(context)));
}

LayoutTensor argmax_layout(const Tensor<float>& logits, View view, int channels, int size, double extent_m) {
  if (logits.rank() != 4 || logits.dim(1) != channels * kClasses || logits.dim(2) != size || logits.dim(3) != size) {
    throw nn::ShapeError("argmax_layout: unexpected logits " + logits.shape());
  }
  LayoutTensor out(view, channels, size, extent_m);
  const std::size_t cells = static_cast<std::size_t>(size) * size;
  for (int ch = 0; ch < channels; ++ch) {
    const float* base = logits.data() + static_cast<std::size_t>(ch) * kClasses * cells;
    bool any = false;
    for (std::size_t c = 0; c < cells; ++c) {
      int best = 0;
      for (int k = 1; k < kClasses; ++k) {
        if (base[k * cells + c] > base[best * cells + c]) best = k;
      }
      out.cells[static_cast<std::size_t>(ch) * cells + c] = static_cast<std::uint8_t>(best);
      any = any || best != kBackground;
    }
    out.visible[static_cast<std::size_t>(ch)] = any ? 1 : 0;
  }
  return out;
}

Prediction predict(const Image& image, const ParamSet& params, const ModelConfig& cfg, const Variant& variant,
                   double extent_m) {
  Graph<float> g;
  Binder bind(g, params, false);
  Tensor<float> input = image_tensor(image);
  const int copies = cfg.test_flip ? 2 : 1;
  if (cfg.test_flip) {
    const Tensor<float> flipped = image_tensor(mirrored(Sample{image, {}, {}}).image);
    Tensor<float> both({2, 3, image.height, image.width});
    std::copy(input.storage().begin(), input.storage().end(), both.storage().begin());
    std::copy(flipped.storage().begin(), flipped.storage().end(),
              both.storage().begin() + static_cast<std::ptrdiff_t>(input.numel()));
    input = std::move(both);
  }
  Var ctx = encode(bind, cfg, g.constant(input));
  Prediction p;
  const int d = cfg.grid_size;
  const int planes = cfg.channels * kClasses;
  for (View v : variant.views()) {
    Var logits = decode(bind, cfg, v, ctx);
    const Tensor<float>& all = g.value(nn::softmax_over_classes(g, logits, kClasses));
    Tensor<float> probs({1, planes, d, d});
    std::copy_n(all.data(), probs.numel(), probs.data());
    if (copies == 2) {
      const float* mirror = all.data() + probs.numel();
      for (int k = 0; k < planes; ++k) {
        for (int r = 0; r < d; ++r) {
          for (int c = 0; c < d; ++c) {
            float& cell = probs.at(0, k, r, c);
            cell = 0.5f * (cell + mirror[(static_cast<std::size_t>(k) * d + r) * d + (d - 1 - c)]);
          }
        }
      }
    }
    LayoutTensor layout = argmax_layout(probs, v, cfg.channels, d, extent_m);
    probs = probs.reshaped({planes, d, d});
    if (v == View::Top) {
      p.top = std::move(layout);
      p.top_probs = std::move(probs);
    } else {
      p.front = std::move(layout);
      p.front_probs = std::move(probs);
    }
  }
  return p;
}

double label_accuracy(const LayoutTensor& pred, const LayoutTensor& gt) {
  if (pred.cells.size() != gt.cells.size() || gt.cells.empty()) {
    throw std::invalid_argument("label_accuracy: layouts differ in shape");
  }
  std::size_t same = 0;
  for (std::size_t i = 0; i < gt.cells.size(); ++i) same += pred.cells[i] == gt.cells[i];
  return static_cast<double>(same) / static_cast<double>(gt.cells.size());
}

}  // namespace racklay
