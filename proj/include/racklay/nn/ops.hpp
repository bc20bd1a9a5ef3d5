#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "racklay/nn/graph.hpp"
#include "racklay/nn/tensor.hpp"

namespace racklay::nn {

// Cross-correlation of x [N, Cin, H, W] with w [Cout, Cin, k, k] plus bias
// b [Cout]. k must be odd. Output side is floor((H + 2 pad - k) / stride) + 1.
template <typename T>
Var conv2d(Graph<T>& g, Var x, Var w, Var b, int stride, int pad);

// Nearest-neighbour upsampling of the two trailing axes by an integer factor.
template <typename T>
Var upsample_nearest(Graph<T>& g, Var x, int factor);

template <typename T>
Var leaky_relu(Graph<T>& g, Var x, T slope);

// x [N, G*K, H, W]: softmax over each consecutive group of K channels, per cell.
template <typename T>
Var softmax_over_classes(Graph<T>& g, Var x, int classes);

// probs [N, G*K, H, W], labels [N, G, H, W] with values in [0, K).
// Returns sum over (n, g) of the per-cell mean of -w[label] ln p[label].
// Empty weights means unit weights.
template <typename T>
Var cross_entropy(Graph<T>& g, Var probs, std::span<const std::uint8_t> labels, int classes,
                  std::span<const T> class_weights = {});

// Same value as cross_entropy(softmax_over_classes(logits)), computed with a
// log-sum-exp so saturated logits stay finite.
template <typename T>
Var softmax_cross_entropy(Graph<T>& g, Var logits, std::span<const std::uint8_t> labels, int classes,
                          std::span<const T> class_weights = {});

// Least-squares GAN objectives: mean (s - 1)^2 for the generator; mean
// (real - 1)^2 + mean (fake - 0)^2 for the discriminator.
template <typename T>
Var lsgan_gen_loss(Graph<T>& g, Var fake_scores);
template <typename T>
Var lsgan_disc_loss(Graph<T>& g, Var real_scores, Var fake_scores);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);
template <typename T>
Var scale(Graph<T>& g, Var a, T factor);
template <typename T>
Var sum(Graph<T>& g, Var a);
// Sum of elementwise product with a constant tensor of the same shape.
template <typename T>
Var dot_constant(Graph<T>& g, Var a, const Tensor<T>& weights);
template <typename T>
Var reshape(Graph<T>& g, Var a, Shape dims);

// x [..., W] times w [W, V] -> [..., V].
template <typename T>
Var linear_last_axis(Graph<T>& g, Var x, Var w);

// Per-column attention over rows. keys [N, heads*dk, H, W], values
// [N, heads*dv, H, W], queries [heads, T, dk], pos [heads, T, H].
// For each (n, head, column) the weights over the H input rows are
// softmax(q_t . k_y / sqrt(dk) + pos_ty); output [N, heads*dv, T, W].
template <typename T>
Var row_attention(Graph<T>& g, Var keys, Var values, Var queries, Var pos, int heads);

// Detached copy: same value, no gradient flows back.
template <typename T>
Var stop_gradient(Graph<T>& g, Var x);

}  // namespace racklay::nn
