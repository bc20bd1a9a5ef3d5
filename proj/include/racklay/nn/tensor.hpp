#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace racklay::nn {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& dims);
std::string shape_string(const Shape& dims);

// Raised when an op receives operands whose shapes break its contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dense row-major tensor. float in production, double for gradient checks.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, T fill = T(0)) : dims_(std::move(dims)), data_(shape_numel(dims_), fill) {}
  Tensor(Shape dims, std::vector<T> values) : dims_(std::move(dims)), data_(std::move(values)) {
    if (data_.size() != shape_numel(dims_)) {
      throw ShapeError("tensor of shape " + shape_string(dims_) + " given " +
                       std::to_string(data_.size()) + " values");
    }
  }

  const Shape& dims() const { return dims_; }
  int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
  int rank() const { return static_cast<int>(dims_.size()); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  // 4-D accessor for [N, C, H, W] tensors.
  T& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
  const T& at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  Tensor reshaped(Shape dims) const {
    if (shape_numel(dims) != numel()) {
      throw ShapeError("cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
    }
    return Tensor(std::move(dims), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(dims_, std::move(out));
  }

  std::string shape() const { return shape_string(dims_); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + h) * dims_[3] + w;
  }

  Shape dims_;
  std::vector<T> data_;
};

}  // namespace racklay::nn
