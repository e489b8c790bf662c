#pragma once

#include <vector>

#include "ltc/nn/tensor.hpp"

namespace ltc::nn {

// params <- params - lr * grads. Throws TrainingError on non-finite gradients.
void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, float learning_rate);

// SGD with optional heavy-ball momentum (momentum 0 reduces to sgd_step).
class Sgd {
 public:
  Sgd(float learning_rate, float momentum = 0.0f);
  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads);

 private:
  float lr_;
  float momentum_;
  std::vector<Tensor> velocity_;
};

}  // namespace ltc::nn
