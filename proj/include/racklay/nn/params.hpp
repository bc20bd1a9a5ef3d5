#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "racklay/nn/graph.hpp"
#include "racklay/nn/tensor.hpp"

namespace racklay::nn {

struct NamedTensor {
  std::string name;
  Tensor<float> value;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Ordered collection of named tensors. Order is insertion order and is the
// serialization order.
class ParamSet {
 public:
  Tensor<float>& add(std::string name, Tensor<float> value);
  bool contains(const std::string& name) const;
  Tensor<float>& get(const std::string& name);
  const Tensor<float>& get(const std::string& name) const;

  std::vector<NamedTensor>& entries() { return entries_; }
  const std::vector<NamedTensor>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;

  // Entries whose name starts with the prefix.
  ParamSet with_prefix(const std::string& prefix) const;
  bool any_with_prefix(const std::string& prefix) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<NamedTensor> entries_;
};

// Deterministic He-uniform initialisation; each tensor draws from a substream
// keyed by its name so adding parameter groups never perturbs the others.
Tensor<float> he_uniform(const Shape& dims, int fan_in, std::uint64_t seed, const std::string& name);

std::uint64_t name_hash(const std::string& name);

enum class OptimizerKind { Sgd, Adam };

// Sgd:  v <- mu v + g, p <- p - lr v.
// Adam: m <- b1 m + (1 - b1) g, v <- b2 v + (1 - b2) g^2, bias-corrected,
//       p <- p - lr m_hat / (sqrt(v_hat) + eps), with b1 = momentum.
// State lives in one ParamSet so checkpoints can carry it: the momentum
// buffer under the parameter name for Sgd; "m:", "v:" and a one-element
// step counter "t:" per parameter for Adam.
// Weight decay is decoupled (p <- p - lr wd p before the update) and only
// touches tensors of rank >= 2, so biases are left alone.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double momentum) : kind_(kind), lr_(lr), momentum_(momentum) {}

  void step(Tensor<float>& param, const Tensor<float>& grad, const std::string& name);

  ParamSet& state() { return state_; }
  const ParamSet& state() const { return state_; }
  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  double momentum() const { return momentum_; }
  double weight_decay() const { return weight_decay_; }
  void set_weight_decay(double wd) { weight_decay_ = wd; }

  static constexpr double kAdamBeta2 = 0.999;
  static constexpr double kAdamEps = 1e-8;

 private:
  Tensor<float>& slot(const std::string& name, const Shape& dims);

  OptimizerKind kind_;
  double lr_;
  double momentum_;
  double weight_decay_ = 0.0;
  ParamSet state_;
};

const char* optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

// Binary checkpoint. Little-endian throughout:
//   "RKLYCKPT" | u32 version | u32 count |
//   count x (u32 name_len | name bytes | u32 rank | rank x u32 dim | f32 values)
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_checkpoint(const std::filesystem::path& path);

}  // namespace racklay::nn
