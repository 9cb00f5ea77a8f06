#include "tasnn/tensor.hpp"

#include <cmath>
#include <sstream>

namespace tasnn {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, real fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {
  for (const std::size_t d : shape_) {
    if (d == 0) throw ConfigError("tensor dimension must be positive");
  }
}

void Tensor::fill(real v) {
  for (real& x : data_) x = v;
}

void Tensor::add_scaled(const Tensor& other, real s) {
  if (!same_shape(other)) {
    throw ConfigError("add_scaled: shape mismatch " + shape_string(shape_) +
                      " vs " + shape_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
}

real Tensor::sum() const {
  real s = 0;
  for (const real x : data_) s += x;
  return s;
}

bool Tensor::all_finite() const {
  for (const real x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::fill_uniform(Rng& rng, real lo, real hi) {
  for (real& x : data_) x = static_cast<real>(rng.uniform(lo, hi));
}

void LayerParams::zero_grads() {
  grad_weights.fill(0);
  if (has_bias()) grad_bias.fill(0);
}

LayerParams LayerParams::conv(std::size_t out_c, std::size_t in_c,
                              std::size_t k, bool with_bias, Rng& rng) {
  LayerParams p;
  p.weights = Tensor({out_c, in_c, k, k});
  const real bound =
      static_cast<real>(1.0 / std::sqrt(static_cast<double>(in_c * k * k)));
  p.weights.fill_uniform(rng, -bound, bound);
  p.grad_weights = Tensor({out_c, in_c, k, k});
  if (with_bias) {
    p.bias = Tensor({out_c});
    p.bias.fill_uniform(rng, -bound, bound);
    p.grad_bias = Tensor({out_c});
  }
  return p;
}

LayerParams LayerParams::dense(std::size_t out, std::size_t in, bool with_bias,
                               Rng& rng) {
  LayerParams p;
  p.weights = Tensor({out, in});
  const real bound =
      static_cast<real>(1.0 / std::sqrt(static_cast<double>(in)));
  p.weights.fill_uniform(rng, -bound, bound);
  p.grad_weights = Tensor({out, in});
  if (with_bias) {
    p.bias = Tensor({out});
    p.bias.fill_uniform(rng, -bound, bound);
    p.grad_bias = Tensor({out});
  }
  return p;
}

}  // namespace tasnn
