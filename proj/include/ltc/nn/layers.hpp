#pragma once

#include <cstdint>
#include <vector>

#include "ltc/nn/tensor.hpp"

// Layer primitives. Image tensors are channel-last: (H, W, C) for a single
// sample or (B, H, W, C) for a batch. Dense inputs are (n) or (B, n).
// Convolution is stride-1 cross-correlation with zero "same" padding.
namespace ltc::nn {

enum class Activation : std::uint8_t { linear, relu, sigmoid };

float sigmoid(float x);
double sigmoid(double x);

void apply_activation(Tensor& t, Activation act);

// kernels: (kh, kw, C, K), bias: (K). Output has the input's spatial size.
Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // flat input offset of each output cell's max
};

// Non-overlapping window x window max pooling; H and W must be multiples of window.
PoolResult maxpool2d_with_indices(const Tensor& input, int window = 2);
Tensor maxpool2d(const Tensor& input, int window = 2);

// weights: (n, m), bias: (m).
Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                     Activation act = Activation::linear);

struct ConvGrads {
  Tensor input;  // empty unless requested
  Tensor kernels;
  Tensor bias;
};
// grad_output is the gradient w.r.t. the pre-activation conv output.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                          bool want_input_grad);

Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                          const Tensor& grad_output);

struct DenseGrads {
  Tensor input;  // empty unless requested
  Tensor weights;
  Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          bool want_input_grad);

}  // namespace ltc::nn
