#include "racklay/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "racklay/nn/ops.hpp"
#include "racklay/rng.hpp"

namespace racklay::nn {

namespace {

double evaluate(const LossBuilder& build, const std::vector<Tensor<double>>& inputs) {
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  return g.value(build(g, vars))[0];
}

Tensor<double> random_tensor(const Shape& dims, SplitMix64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(dims);
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Values bounded away from zero so the leaky-relu kink is never straddled by
// a finite-difference step.
Tensor<double> kink_free_tensor(const Shape& dims, SplitMix64& rng) {
  Tensor<double> t(dims);
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double mag = rng.uniform(0.05, 1.0);
    t[i] = rng.uniform() < 0.5 ? -mag : mag;
  }
  return t;
}

std::vector<std::uint8_t> random_labels(std::size_t n, int classes, SplitMix64& rng) {
  std::vector<std::uint8_t> out(n);
  for (auto& l : out) l = static_cast<std::uint8_t>(rng.uniform_int(0, classes - 1));
  return out;
}

// Projects an op's output onto fixed random weights so every output entry
// contributes a distinct coefficient to the scalar loss.
LossBuilder projected(std::function<Var(Graph<double>&, const std::vector<Var>&)> op, Tensor<double> weights) {
  return [op = std::move(op), weights = std::move(weights)](Graph<double>& g, const std::vector<Var>& v) {
    return dot_constant(g, op(g, v), weights);
  };
}

Shape conv_out(const Shape& x, int co, int k, int stride, int pad) {
  return {x[0], co, (x[2] + 2 * pad - k) / stride + 1, (x[3] + 2 * pad - k) / stride + 1};
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor<double>>& inputs, double eps,
                           double floor) {
  Graph<double> g;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(g.parameter(t));
  g.backward(build(g, vars));

  GradCheckResult result;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor<double>& analytic = g.grad(vars[k]);
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = probe[k][i];
      probe[k][i] = orig + eps;
      const double up = evaluate(build, probe);
      probe[k][i] = orig - eps;
      const double down = evaluate(build, probe);
      probe[k][i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double abs_err = std::abs(analytic[i] - numeric);
      const double rel = abs_err / std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      if (rel > result.max_rel_error || result.worst_input < 0) {
        result.max_rel_error = std::max(rel, result.max_rel_error);
        result.worst_input = static_cast<int>(k);
        result.worst_index = i;
      }
    }
  }
  return result;
}

std::vector<OpCheck> grad_check_all_ops(std::uint64_t seed) {
  SplitMix64 rng = substream(seed, 7);
  std::vector<OpCheck> out;
  auto run = [&](const std::string& name, const LossBuilder& build, const std::vector<Tensor<double>>& inputs) {
    out.push_back({name, grad_check(build, inputs)});
  };

  struct ConvCase {
    const char* name;
    Shape x;
    int co, k, stride, pad;
  };
  const ConvCase conv_cases[] = {
      {"conv2d_3x3_s1", {2, 3, 6, 5}, 4, 3, 1, 1},
      {"conv2d_3x3_s2", {1, 2, 7, 7}, 3, 3, 2, 1},
      {"conv2d_1x1", {2, 4, 3, 4}, 3, 1, 1, 0},
      {"conv2d_5x5_s1_p0", {1, 2, 6, 6}, 2, 5, 1, 0},
  };
  for (const auto& c : conv_cases) {
    const Shape w{c.co, c.x[1], c.k, c.k};
    const int stride = c.stride;
    const int pad = c.pad;
    run(c.name,
        projected([stride, pad](Graph<double>& g, const std::vector<Var>& v) { return conv2d(g, v[0], v[1], v[2], stride, pad); },
                  random_tensor(conv_out(c.x, c.co, c.k, c.stride, c.pad), rng)),
        {random_tensor(c.x, rng), random_tensor(w, rng), random_tensor({c.co}, rng)});
  }

  run("upsample_nearest",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return upsample_nearest(g, v[0], 2); },
                random_tensor({2, 2, 6, 8}, rng)),
      {random_tensor({2, 2, 3, 4}, rng)});

  run("leaky_relu",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return leaky_relu(g, v[0], 0.1); },
                random_tensor({2, 3, 4, 4}, rng)),
      {kink_free_tensor({2, 3, 4, 4}, rng)});

  run("softmax_over_classes",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return softmax_over_classes(g, v[0], 3); },
                random_tensor({2, 6, 3, 3}, rng)),
      {random_tensor({2, 6, 3, 3}, rng, -2.0, 2.0)});

  {
    const auto labels = random_labels(2 * 2 * 3 * 3, 3, rng);
    const std::vector<double> weights{0.2, 1.0, 1.0};
    run("cross_entropy",
        [labels, weights](Graph<double>& g, const std::vector<Var>& v) {
          return cross_entropy<double>(g, v[0], labels, 3, weights);
        },
        {random_tensor({2, 6, 3, 3}, rng, 0.1, 0.9)});
    run("softmax_cross_entropy",
        [labels, weights](Graph<double>& g, const std::vector<Var>& v) {
          return softmax_cross_entropy<double>(g, v[0], labels, 3, weights);
        },
        {random_tensor({2, 6, 3, 3}, rng, -2.0, 2.0)});
  }

  run("lsgan_gen_loss", [](Graph<double>& g, const std::vector<Var>& v) { return lsgan_gen_loss(g, v[0]); },
      {random_tensor({2, 1, 3, 3}, rng)});
  run("lsgan_disc_loss",
      [](Graph<double>& g, const std::vector<Var>& v) { return lsgan_disc_loss(g, v[0], v[1]); },
      {random_tensor({2, 1, 3, 3}, rng), random_tensor({2, 1, 3, 3}, rng)});

  run("add",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return add(g, v[0], v[1]); },
                random_tensor({3, 4}, rng)),
      {random_tensor({3, 4}, rng), random_tensor({3, 4}, rng)});
  run("scale",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return scale(g, v[0], -1.7); },
                random_tensor({3, 4}, rng)),
      {random_tensor({3, 4}, rng)});
  run("sum", [](Graph<double>& g, const std::vector<Var>& v) { return sum(g, v[0]); }, {random_tensor({3, 4}, rng)});
  {
    const Tensor<double> w = random_tensor({3, 4}, rng);
    run("dot_constant", [w](Graph<double>& g, const std::vector<Var>& v) { return dot_constant(g, v[0], w); },
        {random_tensor({3, 4}, rng)});
  }
  run("reshape",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return reshape(g, v[0], Shape{4, 3}); },
                random_tensor({4, 3}, rng)),
      {random_tensor({2, 6}, rng)});
  run("linear_last_axis",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return linear_last_axis(g, v[0], v[1]); },
                random_tensor({2, 3, 5}, rng)),
      {random_tensor({2, 3, 4}, rng), random_tensor({4, 5}, rng)});

  run("row_attention",
      projected([](Graph<double>& g, const std::vector<Var>& v) { return row_attention(g, v[0], v[1], v[2], v[3], 2); },
                random_tensor({2, 6, 5, 3}, rng)),
      {random_tensor({2, 4, 4, 3}, rng), random_tensor({2, 6, 4, 3}, rng), random_tensor({2, 5, 2}, rng),
       random_tensor({2, 5, 4}, rng)});

  // A small composite so gradient accumulation across shared nodes is covered.
  run("composite_encoder_decoder",
      [](Graph<double>& g, const std::vector<Var>& v) {
        Var h = leaky_relu(g, conv2d(g, v[0], v[1], v[2], 2, 1), 0.1);
        Var up = upsample_nearest(g, h, 2);
        Var logits = conv2d(g, up, v[3], v[4], 1, 1);
        static const std::vector<std::uint8_t> labels = [] {
          std::vector<std::uint8_t> l(1 * 2 * 6 * 6);
          for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint8_t>((i * 7 + 3) % 3);
          return l;
        }();
        Var sup = softmax_cross_entropy<double>(g, logits, labels, 3);
        Var probs = softmax_over_classes(g, logits, 3);
        return add(g, sup, scale(g, lsgan_gen_loss(g, sum(g, probs)), 0.01));
      },
      {random_tensor({1, 2, 6, 6}, rng), random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5), random_tensor({3}, rng),
       random_tensor({6, 3, 3, 3}, rng, -0.5, 0.5), random_tensor({6}, rng)});
  return out;
}

}  // namespace racklay::nn
