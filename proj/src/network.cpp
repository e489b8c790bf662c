#include "ltc/nn/network.hpp"

#include <cmath>

#include "ltc/error.hpp"
#include "ltc/rng.hpp"

namespace ltc::nn {
namespace {

Shape with_batch(int batch, const Shape& s) {
  Shape out{batch};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

Network::Network(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  shape_size(input_shape_);
  Shape cur = input_shape_;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    param_index_.push_back(-1);
    switch (spec.kind) {
      case LayerKind::input:
        break;
      case LayerKind::conv2d: {
        if (cur.size() != 3) throw InvalidInput("conv2d layer needs an (H,W,C) input");
        if (spec.kernel < 1 || spec.kernel % 2 == 0 || spec.units < 1)
          throw InvalidInput("conv2d layer needs an odd kernel and positive channel count");
        param_index_.back() = static_cast<int>(params_.size());
        params_.emplace_back(Shape{spec.kernel, spec.kernel, cur[2], spec.units});
        params_.emplace_back(Shape{spec.units});
        cur = {cur[0], cur[1], spec.units};
        break;
      }
      case LayerKind::maxpool2d:
        if (cur.size() != 3 || spec.kernel < 1 || cur[0] % spec.kernel || cur[1] % spec.kernel)
          throw InvalidInput("maxpool2d layer needs an (H,W,C) input divisible by its window, got " +
                             shape_string(cur));
        cur = {cur[0] / spec.kernel, cur[1] / spec.kernel, cur[2]};
        break;
      case LayerKind::flatten:
        cur = {static_cast<int>(shape_size(cur))};
        break;
      case LayerKind::dense:
        if (cur.size() != 1) throw InvalidInput("dense layer needs a flat input; add a flatten layer");
        if (spec.units < 1) throw InvalidInput("dense layer needs positive units");
        param_index_.back() = static_cast<int>(params_.size());
        params_.emplace_back(Shape{cur[0], spec.units});
        params_.emplace_back(Shape{spec.units});
        cur = {spec.units};
        break;
    }
    shapes_.push_back(cur);
  }
  if (shapes_.empty()) shapes_.push_back(input_shape_);
}

std::vector<std::size_t> Network::layer_param_counts() const {
  std::vector<std::size_t> counts;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const int p = param_index_[i];
    counts.push_back(p < 0 ? 0 : params_[p].size() + params_[p + 1].size());
  }
  return counts;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Tensor& t : params_) n += t.size();
  return n;
}

void Network::init_glorot(std::uint64_t seed) {
  Rng rng = make_rng(seed, {0x6e6e});
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const int p = param_index_[i];
    if (p < 0) continue;
    Tensor& w = params_[p];
    double fan_in, fan_out;
    if (layers_[i].kind == LayerKind::conv2d) {
      const double area = static_cast<double>(w.dim(0)) * w.dim(1);
      fan_in = area * w.dim(2);
      fan_out = area * w.dim(3);
    } else {
      fan_in = w.dim(0);
      fan_out = w.dim(1);
    }
    const float limit = static_cast<float>(std::sqrt(6.0 / (fan_in + fan_out)));
    std::uniform_real_distribution<float> dist(-limit, limit);
    for (float& v : w.values()) v = dist(rng);
    params_[p + 1].fill(0.0f);
  }
}

Tensor Network::forward(const Tensor& input) const { return run(input, nullptr); }

Tensor Network::forward(const Tensor& input, ForwardCache& cache) const { return run(input, &cache); }

Tensor Network::run(const Tensor& input, ForwardCache* cache) const {
  const bool single = input.shape() == input_shape_;
  if (!single) {
    if (input.rank() != input_shape_.size() + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), input.shape().begin() + 1))
      throw InvalidInput("network input " + shape_string(input.shape()) + " does not match " +
                         shape_string(input_shape_));
  }
  const int batch = single ? 1 : input.dim(0);
  Tensor cur = single ? input.reshaped(with_batch(1, input_shape_)) : input;
  if (cache) {
    cache->activations.clear();
    cache->pool_indices.assign(layers_.size(), {});
    cache->activations.push_back(cur);
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    const int p = param_index_[i];
    switch (spec.kind) {
      case LayerKind::input:
        break;
      case LayerKind::conv2d:
        cur = conv2d_forward(cur, params_[p], params_[p + 1]);
        apply_activation(cur, spec.activation);
        break;
      case LayerKind::maxpool2d: {
        PoolResult r = maxpool2d_with_indices(cur, spec.kernel);
        cur = std::move(r.output);
        if (cache) cache->pool_indices[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::flatten:
        cur = cur.reshaped({batch, shapes_[i][0]});
        break;
      case LayerKind::dense:
        cur = dense_forward(cur, params_[p], params_[p + 1], spec.activation);
        break;
    }
    if (cache) cache->activations.push_back(cur);
  }
  return single ? cur.reshaped(output_shape()) : cur;
}

BackwardResult Network::backward(const ForwardCache& cache, const Tensor& grad_output,
                                 bool output_grad_is_preactivation, bool want_input_grad) const {
  if (cache.activations.size() != layers_.size() + 1)
    throw StateError("backward called without a matching forward cache");
  const Tensor& out = cache.activations.back();
  if (grad_output.size() != out.size()) throw InvalidInput("backward: output gradient size mismatch");

  BackwardResult result;
  result.param_grads.resize(params_.size());
  Tensor g = grad_output.reshaped(out.shape());

  for (std::size_t li = layers_.size(); li-- > 0;) {
    const LayerSpec& spec = layers_[li];
    const Tensor& y = cache.activations[li + 1];
    const Tensor& x = cache.activations[li];
    const bool skip_act = output_grad_is_preactivation && li + 1 == layers_.size();
    if (!skip_act) {
      if (spec.activation == Activation::relu) {
        for (std::size_t k = 0; k < g.size(); ++k)
          if (!(y[k] > 0.0f)) g[k] = 0.0f;
      } else if (spec.activation == Activation::sigmoid) {
        for (std::size_t k = 0; k < g.size(); ++k) g[k] *= y[k] * (1.0f - y[k]);
      }
    }
    const bool need_input = li > 0 || want_input_grad;
    const int p = param_index_[li];
    switch (spec.kind) {
      case LayerKind::input:
        break;
      case LayerKind::conv2d: {
        ConvGrads cg = conv2d_backward(x, params_[p], g, need_input);
        result.param_grads[p] = std::move(cg.kernels);
        result.param_grads[p + 1] = std::move(cg.bias);
        g = std::move(cg.input);
        break;
      }
      case LayerKind::maxpool2d:
        if (need_input) g = maxpool2d_backward(x.shape(), cache.pool_indices[li], g);
        break;
      case LayerKind::flatten:
        g = g.reshaped(x.shape());
        break;
      case LayerKind::dense: {
        DenseGrads dg = dense_backward(x, params_[p], g, need_input);
        result.param_grads[p] = std::move(dg.weights);
        result.param_grads[p + 1] = std::move(dg.bias);
        g = std::move(dg.input);
        break;
      }
    }
  }
  if (want_input_grad) {
    const Tensor& in = cache.activations.front();
    result.input_grad = g.empty() ? Tensor(in.shape()) : g.reshaped(in.shape());
  }
  return result;
}

}  // namespace ltc::nn
