#pragma once

#include <vector>

#include "tasnn/tensor.hpp"

namespace tasnn {

struct AdamConfig {
  real lr = real(1e-4);
  real beta1 = real(0.9);
  real beta2 = real(0.999);
  real epsilon = real(1e-8);
};

class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig cfg);

  // one update from the given gradients (same layout as the parameters)
  void step(const std::vector<Tensor*>& grads);

 private:
  std::vector<Tensor*> params_;
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace tasnn
