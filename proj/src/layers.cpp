#include "ltc/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "ltc/error.hpp"

namespace ltc::nn {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ConstRowVec = Eigen::Map<const Eigen::RowVectorXf>;

struct ImageDims {
  int batch, height, width, channels;
  bool batched;
};

ImageDims image_dims(const Tensor& t, const char* what) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  throw InvalidInput(std::string(what) + ": expected (H,W,C) or (B,H,W,C), got " + shape_string(t.shape()));
}

Shape image_shape(const ImageDims& d, int h, int w, int c) {
  return d.batched ? Shape{d.batch, h, w, c} : Shape{h, w, c};
}

void im2col(const float* in, const ImageDims& d, int kh, int kw, float* col) {
  const int c = d.channels;
  const int cols = kh * kw * c;
  const int py = kh / 2, px = kw / 2;
  const std::size_t span = static_cast<std::size_t>(kw) * c;
  for (int b = 0; b < d.batch; ++b) {
    const float* img = in + static_cast<std::size_t>(b) * d.height * d.width * c;
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        float* row = col + (static_cast<std::size_t>(b) * d.height * d.width + y * d.width + x) * cols;
        const bool x_inside = x - px >= 0 && x - px + kw <= d.width;
        for (int dy = 0; dy < kh; ++dy) {
          const int sy = y + dy - py;
          float* dst = row + static_cast<std::size_t>(dy) * span;
          if (sy < 0 || sy >= d.height) {
            std::fill(dst, dst + span, 0.0f);
          } else if (x_inside) {
            const float* src = img + (static_cast<std::size_t>(sy) * d.width + (x - px)) * c;
            std::copy(src, src + span, dst);
          } else {
            for (int dx = 0; dx < kw; ++dx) {
              const int sx = x + dx - px;
              float* cell = dst + static_cast<std::size_t>(dx) * c;
              if (sx < 0 || sx >= d.width) {
                std::fill(cell, cell + c, 0.0f);
              } else {
                const float* src = img + (static_cast<std::size_t>(sy) * d.width + sx) * c;
                std::copy(src, src + c, cell);
              }
            }
          }
        }
      }
    }
  }
}

// Per-thread im2col scratch; grown on demand, never zero-filled.
float* scratch(std::size_t n) {
  thread_local FloatBuffer buf;
  if (n > buf.size()) buf.resize(n);
  return buf.data();
}

void col2im(const float* col, const ImageDims& d, int kh, int kw, float* out) {
  const int cols = kh * kw * d.channels;
  const int py = kh / 2, px = kw / 2;
  std::fill(out, out + static_cast<std::size_t>(d.batch) * d.height * d.width * d.channels, 0.0f);
  for (int b = 0; b < d.batch; ++b) {
    float* img = out + static_cast<std::size_t>(b) * d.height * d.width * d.channels;
    for (int y = 0; y < d.height; ++y) {
      for (int x = 0; x < d.width; ++x) {
        const float* row = col + (static_cast<std::size_t>(b) * d.height * d.width + y * d.width + x) * cols;
        for (int dy = 0; dy < kh; ++dy) {
          const int sy = y + dy - py;
          if (sy < 0 || sy >= d.height) continue;
          for (int dx = 0; dx < kw; ++dx) {
            const int sx = x + dx - px;
            if (sx < 0 || sx >= d.width) continue;
            const float* src = row + (dy * kw + dx) * d.channels;
            float* dst = img + (static_cast<std::size_t>(sy) * d.width + sx) * d.channels;
            for (int c = 0; c < d.channels; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const ImageDims& d, const Tensor& kernels) {
  if (kernels.rank() != 4) throw InvalidInput("conv2d: kernels must be (kh,kw,C,K)");
  if (kernels.dim(0) % 2 == 0 || kernels.dim(1) % 2 == 0)
    throw InvalidInput("conv2d: kernel spatial dims must be odd, got " + shape_string(kernels.shape()));
  if (kernels.dim(2) != d.channels)
    throw InvalidInput("conv2d: input has " + std::to_string(d.channels) + " channels, kernels expect " +
                       std::to_string(kernels.dim(2)));
}

struct DenseDims {
  int batch, inputs;
  bool batched;
};

DenseDims dense_dims(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0), false};
  if (t.rank() == 2) return {t.dim(0), t.dim(1), true};
  throw InvalidInput("dense: expected (n) or (B,n) input, got " + shape_string(t.shape()));
}

}  // namespace

float sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void apply_activation(Tensor& t, Activation act) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::relu:
      for (float& v : t.values()) v = v > 0.0f ? v : 0.0f;
      return;
    case Activation::sigmoid:
      for (float& v : t.values()) v = sigmoid(v);
      return;
  }
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
  const ImageDims d = image_dims(input, "conv2d");
  check_conv_shapes(d, kernels);
  const int kh = kernels.dim(0), kw = kernels.dim(1), out_c = kernels.dim(3);
  if (bias.size() != static_cast<std::size_t>(out_c)) throw InvalidInput("conv2d: bias length mismatch");

  const int rows = d.batch * d.height * d.width;
  const int cols = kh * kw * d.channels;
  float* col = scratch(static_cast<std::size_t>(rows) * cols);
  im2col(input.data(), d, kh, kw, col);

  Tensor out(image_shape(d, d.height, d.width, out_c));
  MatMap o(out.data(), rows, out_c);
  o.noalias() = ConstMatMap(col, rows, cols) * ConstMatMap(kernels.data(), cols, out_c);
  o.rowwise() += ConstRowVec(bias.data(), out_c);
  return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                          bool want_input_grad) {
  const ImageDims d = image_dims(input, "conv2d_backward");
  check_conv_shapes(d, kernels);
  const int kh = kernels.dim(0), kw = kernels.dim(1), out_c = kernels.dim(3);
  const int rows = d.batch * d.height * d.width;
  const int cols = kh * kw * d.channels;
  if (grad_output.size() != static_cast<std::size_t>(rows) * out_c)
    throw InvalidInput("conv2d_backward: output gradient shape mismatch");

  float* col = scratch(static_cast<std::size_t>(rows) * cols);
  im2col(input.data(), d, kh, kw, col);
  ConstMatMap g(grad_output.data(), rows, out_c);

  ConvGrads grads;
  grads.kernels = Tensor(kernels.shape());
  MatMap(grads.kernels.data(), cols, out_c).noalias() = ConstMatMap(col, rows, cols).transpose() * g;
  grads.bias = Tensor({out_c});
  Eigen::Map<Eigen::RowVectorXf>(grads.bias.data(), out_c) = g.colwise().sum();

  if (want_input_grad) {
    MatMap(col, rows, cols).noalias() = g * ConstMatMap(kernels.data(), cols, out_c).transpose();
    grads.input = Tensor(input.shape());
    col2im(col, d, kh, kw, grads.input.data());
  }
  return grads;
}

PoolResult maxpool2d_with_indices(const Tensor& input, int window) {
  const ImageDims d = image_dims(input, "maxpool2d");
  if (window < 1) throw InvalidInput("maxpool2d: window must be positive");
  if (d.height % window != 0 || d.width % window != 0)
    throw InvalidInput("maxpool2d: spatial dims " + shape_string(input.shape()) + " not divisible by window " +
                       std::to_string(window));
  const int oh = d.height / window, ow = d.width / window, c = d.channels;
  PoolResult r{Tensor(image_shape(d, oh, ow, c)), {}};
  r.argmax.resize(r.output.size());
  const float* in = input.data();
  std::size_t o = 0;
  for (int b = 0; b < d.batch; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * d.height * d.width * c;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = base + (static_cast<std::size_t>(y * window) * d.width + x * window) * c + ch;
          for (int wy = 0; wy < window; ++wy) {
            for (int wx = 0; wx < window; ++wx) {
              const std::size_t idx =
                  base + (static_cast<std::size_t>(y * window + wy) * d.width + (x * window + wx)) * c + ch;
              if (in[idx] > in[best]) best = idx;
            }
          }
          r.output[o] = in[best];
          r.argmax[o] = static_cast<std::uint32_t>(best);
        }
      }
    }
  }
  return r;
}

Tensor maxpool2d(const Tensor& input, int window) { return maxpool2d_with_indices(input, window).output; }

Tensor maxpool2d_backward(const Shape& input_shape, const std::vector<std::uint32_t>& argmax,
                          const Tensor& grad_output) {
  if (argmax.size() != grad_output.size()) throw InvalidInput("maxpool2d_backward: index/gradient mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_output[i];
  return g;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias, Activation act) {
  const DenseDims d = dense_dims(input);
  if (weights.rank() != 2 || weights.dim(0) != d.inputs)
    throw InvalidInput("dense: input length " + std::to_string(d.inputs) + " does not match weights " +
                       shape_string(weights.shape()));
  const int m = weights.dim(1);
  if (bias.size() != static_cast<std::size_t>(m)) throw InvalidInput("dense: bias length mismatch");
  Tensor out(d.batched ? Shape{d.batch, m} : Shape{m});
  MatMap o(out.data(), d.batch, m);
  o.noalias() = ConstMatMap(input.data(), d.batch, d.inputs) * ConstMatMap(weights.data(), d.inputs, m);
  o.rowwise() += ConstRowVec(bias.data(), m);
  apply_activation(out, act);
  return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          bool want_input_grad) {
  const DenseDims d = dense_dims(input);
  if (weights.rank() != 2 || weights.dim(0) != d.inputs) throw InvalidInput("dense_backward: weight shape mismatch");
  const int m = weights.dim(1);
  if (grad_output.size() != static_cast<std::size_t>(d.batch) * m)
    throw InvalidInput("dense_backward: output gradient shape mismatch");
  ConstMatMap x(input.data(), d.batch, d.inputs);
  ConstMatMap g(grad_output.data(), d.batch, m);
  DenseGrads grads;
  grads.weights = Tensor(weights.shape());
  MatMap(grads.weights.data(), d.inputs, m).noalias() = x.transpose() * g;
  grads.bias = Tensor({m});
  Eigen::Map<Eigen::RowVectorXf>(grads.bias.data(), m) = g.colwise().sum();
  if (want_input_grad) {
    grads.input = Tensor(input.shape());
    MatMap(grads.input.data(), d.batch, d.inputs).noalias() = g * ConstMatMap(weights.data(), d.inputs, m).transpose();
  }
  return grads;
}

}  // namespace ltc::nn
