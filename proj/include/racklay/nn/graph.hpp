#pragma once

#include <functional>
#include <vector>

#include "racklay/nn/tensor.hpp"

namespace racklay::nn {

// Handle to a node in a Graph.
// Sets flush-to-zero and denormals-are-zero for the calling thread. Trained
// weights drift into the subnormal range, where x86 float math runs several
// times slower; every graph turns this on for the thread that builds it.
void flush_denormals();

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Tape-based reverse-mode differentiation. Nodes are appended in evaluation
// order, so reverse insertion order is a valid topological order and the
// graph is acyclic by construction.
template <typename T>
class Graph {
 public:
  Graph() { flush_denormals(); }

  // Propagates the node's gradient into its inputs' gradients.
  using BackwardFn = std::function<void(Graph&, int self)>;

  Var constant(Tensor<T> value) { return push(std::move(value), {}, false, nullptr); }
  Var parameter(Tensor<T> value) { return push(std::move(value), {}, true, nullptr); }

  // Registers an op output. The node requires a gradient iff any input does;
  // the backward closure is dropped otherwise.
  Var op(Tensor<T> value, std::vector<int> inputs, BackwardFn backward) {
    bool needs = false;
    for (int i : inputs) needs = needs || nodes_[static_cast<std::size_t>(i)].requires_grad;
    return push(std::move(value), std::move(inputs), needs, needs ? std::move(backward) : nullptr);
  }

  const Tensor<T>& value(Var v) const { return node(v.id).value; }
  bool requires_grad(Var v) const { return node(v.id).requires_grad; }
  bool requires_grad(int id) const { return node(id).requires_grad; }
  const std::vector<int>& inputs(int id) const { return node(id).inputs; }

  // Gradient of the last backward() target; zeros if the node was unreachable.
  const Tensor<T>& grad(Var v) {
    Node& n = node(v.id);
    if (n.grad.empty() && n.value.numel() > 0) n.grad = Tensor<T>(n.value.dims());
    return n.grad;
  }

  // Mutable, lazily zero-allocated gradient buffer for use inside backward closures.
  Tensor<T>& grad_buffer(int id) {
    Node& n = node(id);
    if (n.grad.empty()) n.grad = Tensor<T>(n.value.dims());
    return n.grad;
  }
  const Tensor<T>& value(int id) const { return node(id).value; }

  void backward(Var loss) {
    Node& target = node(loss.id);
    if (target.value.numel() != 1) {
      throw ShapeError("backward() needs a scalar loss, got " + target.value.shape());
    }
    for (Node& n : nodes_) n.grad = Tensor<T>();
    grad_buffer(loss.id).fill(T(1));
    for (int id = loss.id; id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, id);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::vector<int> inputs;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Tensor<T> value, std::vector<int> inputs, bool requires_grad, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), Tensor<T>(), std::move(inputs), requires_grad, std::move(backward)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }
  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  std::vector<Node> nodes_;
};

}  // namespace racklay::nn
