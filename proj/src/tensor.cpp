#include "ltc/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ltc/error.hpp"

namespace ltc::nn {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw InvalidInput("tensor dimensions must be positive, got " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<float>& values)
    : Tensor(std::move(shape), FloatBuffer(values.begin(), values.end())) {}

Tensor::Tensor(Shape shape, FloatBuffer values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_))
    throw InvalidInput("value count " + std::to_string(values_.size()) + " does not match shape " +
                       shape_string(shape_));
}

std::size_t Tensor::offset(std::initializer_list<int> index) const {
  if (index.size() != shape_.size()) throw InvalidInput("index rank does not match tensor rank");
  std::size_t off = 0;
  std::size_t axis = 0;
  for (int i : index) {
    if (i < 0 || i >= shape_[axis]) throw InvalidInput("tensor index out of range");
    off = off * static_cast<std::size_t>(shape_[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return off;
}

float& Tensor::at(std::initializer_list<int> index) { return values_[offset(index)]; }
float Tensor::at(std::initializer_list<int> index) const { return values_[offset(index)]; }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

void Tensor::fill(float v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size())
    throw InvalidInput("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), values_);
}

}  // namespace ltc::nn
