#pragma once

#include <functional>
#include <string>
#include <vector>

#include "racklay/nn/graph.hpp"
#include "racklay/nn/tensor.hpp"

namespace racklay::nn {

// Builds a scalar loss from the given leaf variables.
using LossBuilder = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int worst_input = -1;
  std::size_t worst_index = 0;
};

// Compares the analytic gradient of every input against central differences.
// Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult grad_check(const LossBuilder& build, const std::vector<Tensor<double>>& inputs,
                           double eps = 1e-4, double floor = 1e-2);

struct OpCheck {
  std::string op;
  GradCheckResult result;
};

// One finite-difference check per differentiable op on seeded random inputs.
std::vector<OpCheck> grad_check_all_ops(std::uint64_t seed);

}  // namespace racklay::nn
