#pragma once

#include <cmath>
#include <functional>

#include "tasnn/tensor.hpp"

namespace testutil {

using tasnn::Rng;
using tasnn::Tensor;

inline Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng,
                            double lo = -1, double hi = 1) {
  Tensor t(std::move(shape));
  t.fill_uniform(rng, tasnn::real(lo), tasnn::real(hi));
  return t;
}

// central finite differences of a scalar loss w.r.t. every entry of `arg`
inline Tensor fd_gradient(Tensor& arg,
                          const std::function<double()>& loss_fn,
                          double eps = 1e-6) {
  Tensor grad(arg.shape());
  for (std::size_t i = 0; i < arg.size(); ++i) {
    const tasnn::real saved = arg[i];
    arg[i] = saved + static_cast<tasnn::real>(eps);
    const double lp = loss_fn();
    arg[i] = saved - static_cast<tasnn::real>(eps);
    const double lm = loss_fn();
    arg[i] = saved;
    grad[i] = static_cast<tasnn::real>((lp - lm) / (2 * eps));
  }
  return grad;
}

inline double max_rel_error(const Tensor& a, const Tensor& b,
                            double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double x = double(a[i]), y = double(b[i]);
    const double denom = std::max({std::abs(x), std::abs(y), floor});
    worst = std::max(worst, std::abs(x - y) / denom);
  }
  return worst;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
  }
  return worst;
}

}  // namespace testutil
