#include "ltc/nn/optim.hpp"

#include <cmath>

#include "ltc/error.hpp"

namespace ltc::nn {
namespace {

void check_step(const std::vector<Tensor>& params, const std::vector<Tensor>& grads, float lr) {
  if (!(lr >= 0.0f) || !std::isfinite(lr)) throw InvalidInput("learning rate must be finite and non-negative");
  if (params.size() != grads.size()) throw InvalidInput("sgd: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape())
      throw InvalidInput("sgd: gradient " + std::to_string(i) + " has shape " + shape_string(grads[i].shape()) +
                         ", parameter has " + shape_string(params[i].shape()));
    if (!grads[i].all_finite()) throw TrainingError("sgd: non-finite gradient in tensor " + std::to_string(i));
  }
}

}  // namespace

void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, float learning_rate) {
  check_step(params, grads, learning_rate);
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].data();
    const float* g = grads[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k) p[k] -= learning_rate * g[k];
  }
}

Sgd::Sgd(float learning_rate, float momentum) : lr_(learning_rate), momentum_(momentum) {
  if (!(momentum >= 0.0f && momentum < 1.0f)) throw InvalidInput("momentum must lie in [0, 1)");
}

void Sgd::step(std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
  if (momentum_ == 0.0f) {
    sgd_step(params, grads, lr_);
    return;
  }
  check_step(params, grads, lr_);
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const Tensor& p : params) velocity_.emplace_back(p.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i].data();
    float* v = velocity_[i].data();
    const float* g = grads[i].data();
    for (std::size_t k = 0; k < params[i].size(); ++k) {
      v[k] = momentum_ * v[k] + g[k];
      p[k] -= lr_ * v[k];
    }
  }
}

}  // namespace ltc::nn
