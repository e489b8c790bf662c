#pragma once

#include <cstdint>
#include <vector>

#include "ltc/nn/layers.hpp"
#include "ltc/nn/tensor.hpp"

namespace ltc::nn {

enum class LayerKind : std::uint8_t { input, conv2d, maxpool2d, flatten, dense };

struct LayerSpec {
  LayerKind kind = LayerKind::input;
  int kernel = 0;  // conv kernel side, pooling window
  int units = 0;   // conv output channels, dense output units
  Activation activation = Activation::linear;

  static LayerSpec input() { return {}; }
  static LayerSpec conv(int kernel, int channels, Activation act = Activation::relu) {
    return {LayerKind::conv2d, kernel, channels, act};
  }
  static LayerSpec maxpool(int window = 2) { return {LayerKind::maxpool2d, window, 0, Activation::linear}; }
  static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, Activation::linear}; }
  static LayerSpec dense(int units, Activation act = Activation::relu) {
    return {LayerKind::dense, 0, units, act};
  }

  bool has_params() const { return kind == LayerKind::conv2d || kind == LayerKind::dense; }
  bool operator==(const LayerSpec&) const = default;
};

// Activations recorded by a forward pass; required by backward.
struct ForwardCache {
  std::vector<Tensor> activations;  // [0] = input batch, [i+1] = output of layer i
  std::vector<std::vector<std::uint32_t>> pool_indices;
  bool empty() const { return activations.empty(); }
};

struct BackwardResult {
  std::vector<Tensor> param_grads;  // aligned with Network::params()
  Tensor input_grad;                // empty unless requested
};

// A feed-forward stack of LayerSpecs with owned parameters. Each conv/dense
// layer owns two tensors in params(): weights then bias.
class Network {
 public:
  Network() = default;
  Network(Shape input_shape, std::vector<LayerSpec> layers);

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  // Per-sample output shape of every layer.
  const std::vector<Shape>& layer_output_shapes() const { return shapes_; }
  std::vector<std::size_t> layer_param_counts() const;
  std::size_t param_count() const;

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
  void init_glorot(std::uint64_t seed);

  // Accepts one sample (input_shape) or a batch (B, input_shape...).
  Tensor forward(const Tensor& input) const;
  Tensor forward(const Tensor& input, ForwardCache& cache) const;

  // grad_output is d(loss)/d(output). With output_grad_is_preactivation the
  // final layer's activation derivative is skipped (fused sigmoid + BCE).
  BackwardResult backward(const ForwardCache& cache, const Tensor& grad_output,
                          bool output_grad_is_preactivation = false, bool want_input_grad = false) const;

  bool operator==(const Network&) const = default;

 private:
  Tensor run(const Tensor& input, ForwardCache* cache) const;

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<int> param_index_;  // per layer: index of its weights in params_, or -1
  std::vector<Tensor> params_;
};

}  // namespace ltc::nn
