#include "tasnn/optimizer.hpp"

#include <cmath>

namespace tasnn {

Adam::Adam(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  if (!(cfg_.lr >= 0)) throw ConfigError("Adam: learning rate must be >= 0");
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor* p : params_) {
    m_.emplace_back(p->shape());
    v_.emplace_back(p->shape());
  }
}

void Adam::step(const std::vector<Tensor*>& grads) {
  if (grads.size() != params_.size()) {
    throw ConfigError("Adam: gradient list does not match parameters");
  }
  ++t_;
  const real bc1 = real(1) - static_cast<real>(std::pow(double(cfg_.beta1),
                                                        double(t_)));
  const real bc2 = real(1) - static_cast<real>(std::pow(double(cfg_.beta2),
                                                        double(t_)));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = *params_[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.beta1 * m[j] + (real(1) - cfg_.beta1) * g[j];
      v[j] = cfg_.beta2 * v[j] + (real(1) - cfg_.beta2) * g[j] * g[j];
      const real mh = m[j] / bc1;
      const real vh = v[j] / bc2;
      p[j] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.epsilon);
    }
  }
}

}  // namespace tasnn
