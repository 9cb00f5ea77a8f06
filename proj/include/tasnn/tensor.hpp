#pragma once

#include <cstddef>
#include <vector>

#include "tasnn/common.hpp"
#include "tasnn/rng.hpp"

namespace tasnn {

// Dense row-major N-d array of reals. No views, no strides: every operation
// owns its output.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, real fill = 0);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  void fill(real v);
  void add_scaled(const Tensor& other, real s);  // this += s * other
  real sum() const;
  bool all_finite() const;

  void fill_uniform(Rng& rng, real lo, real hi);

 private:
  std::vector<std::size_t> shape_;
  std::vector<real> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

// A weight tensor plus optional bias, each with a gradient accumulator of
// the same shape. Backward passes add into the accumulators; zero_grads()
// then one backward call yields the pure per-call gradient.
struct LayerParams {
  Tensor weights;
  Tensor bias;  // size 0 when the layer has no bias
  Tensor grad_weights;
  Tensor grad_bias;

  bool has_bias() const { return bias.size() > 0; }
  void zero_grads();

  // weights [out_c, in_c, k, k], uniform +-1/sqrt(in_c*k*k), bias zero
  static LayerParams conv(std::size_t out_c, std::size_t in_c, std::size_t k,
                          bool with_bias, Rng& rng);
  // weights [out, in], uniform +-1/sqrt(in), bias zero
  static LayerParams dense(std::size_t out, std::size_t in, bool with_bias,
                           Rng& rng);
};

}  // namespace tasnn
