#include "racklay/nn/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "racklay/rng.hpp"

namespace racklay::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

Tensor<float>& ParamSet::add(std::string name, Tensor<float> value) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

Tensor<float>& ParamSet::get(const std::string& name) {
  for (auto& e : entries_) {
    if (e.name == name) return e.value;
  }
  throw std::out_of_range("no parameter named " + name);
}

const Tensor<float>& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

ParamSet ParamSet::with_prefix(const std::string& prefix) const {
  ParamSet out;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) out.entries_.push_back(e);
  }
  return out;
}

bool ParamSet::any_with_prefix(const std::string& prefix) const {
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) return true;
  }
  return false;
}

std::uint64_t name_hash(const std::string& name) {
  // FNV-1a
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor<float> he_uniform(const Shape& dims, int fan_in, std::uint64_t seed, const std::string& name) {
  SplitMix64 rng = substream(seed, name_hash(name));
  const double bound = std::sqrt(6.0 / std::max(fan_in, 1));
  Tensor<float> t(dims);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.uniform(-bound, bound));
  return t;
}

Tensor<float>& Optimizer::slot(const std::string& name, const Shape& dims) {
  if (!state_.contains(name)) state_.add(name, Tensor<float>(dims));
  return state_.get(name);
}

void Optimizer::step(Tensor<float>& param, const Tensor<float>& grad, const std::string& name) {
  if (grad.dims() != param.dims()) throw ShapeError("gradient shape mismatch for " + name);
  const float lr = static_cast<float>(lr_);
  if (weight_decay_ > 0.0 && param.rank() >= 2) {
    const float keep = static_cast<float>(1.0 - lr_ * weight_decay_);
    for (std::size_t i = 0; i < param.numel(); ++i) param[i] *= keep;
  }
  if (kind_ == OptimizerKind::Sgd) {
    Tensor<float>& v = slot(name, param.dims());
    const float mu = static_cast<float>(momentum_);
    for (std::size_t i = 0; i < param.numel(); ++i) {
      v[i] = mu * v[i] + grad[i];
      param[i] -= lr * v[i];
    }
    return;
  }
  Tensor<float>& m = slot("m:" + name, param.dims());
  Tensor<float>& v = slot("v:" + name, param.dims());
  Tensor<float>& t = slot("t:" + name, Shape{1});
  t[0] += 1.0f;
  const double b1 = momentum_;
  const double b2 = kAdamBeta2;
  // Step size with both bias corrections folded in, computed in double.
  const float alpha = static_cast<float>(lr_ * std::sqrt(1.0 - std::pow(b2, t[0])) / (1.0 - std::pow(b1, t[0])));
  const float eps = static_cast<float>(kAdamEps * std::sqrt(1.0 - std::pow(b2, t[0])));
  const float fb1 = static_cast<float>(b1);
  const float fb2 = static_cast<float>(b2);
  for (std::size_t i = 0; i < param.numel(); ++i) {
    m[i] = fb1 * m[i] + (1.0f - fb1) * grad[i];
    v[i] = fb2 * v[i] + (1.0f - fb2) * grad[i] * grad[i];
    param[i] -= alpha * m[i] / (std::sqrt(v[i]) + eps);
  }
}

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::Sgd;
  if (name == "adam") return OptimizerKind::Adam;
  throw std::invalid_argument("unknown optimizer '" + name + "' (expected sgd or adam)");
}

namespace {

constexpr char kMagic[8] = {'R', 'K', 'L', 'Y', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::istream& is, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put_u32(os, static_cast<std::uint32_t>(e.value.rank()));
    for (int d : e.value.dims()) put_u32(os, static_cast<std::uint32_t>(d));
    os.write(reinterpret_cast<const char*>(e.value.data()),
             static_cast<std::streamsize>(e.value.numel() * sizeof(float)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = get_u32(is, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  const std::uint32_t count = get_u32(is, path);
  ParamSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(get_u32(is, path), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw std::runtime_error("truncated checkpoint " + path.string());
    }
    Shape dims(get_u32(is, path));
    for (int& d : dims) d = static_cast<int>(get_u32(is, path));
    Tensor<float> t(dims);
    if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.numel() * sizeof(float)))) {
      throw std::runtime_error("truncated checkpoint " + path.string());
    }
    params.add(std::move(name), std::move(t));
  }
  return params;
}

}  // namespace racklay::nn
