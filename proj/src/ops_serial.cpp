#include <cmath>

#include "tasnn/ops.hpp"

// Straight-line reference kernels. The backward passes walk the forward
// loops again and scatter, which is the opposite decomposition to the
// gather-style parallel kernels in ops.cpp.

namespace tasnn {
namespace serial_ops {

Tensor conv2d(const Tensor& input, const LayerParams& p,
              const ConvConfig& cfg) {
  std::size_t oh, ow;
  detail::check_conv_shapes(input, p, cfg, oh, ow);
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = p.weights.dim(0), k = cfg.kernel;
  Tensor out({oc, oh, ow});
  for (std::size_t c = 0; c < oc; ++c)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        real acc = p.has_bias() ? p.bias[c] : real(0);
        for (std::size_t ci = 0; ci < ic; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * cfg.stride + ky) -
                  static_cast<std::ptrdiff_t>(cfg.pad);
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * cfg.stride + kx) -
                  static_cast<std::ptrdiff_t>(cfg.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                  ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              acc += p.weights[((c * ic + ci) * k + ky) * k + kx] *
                     input[(ci * h + iy) * w + ix];
            }
        out[(c * oh + oy) * ow + ox] = acc;
      }
  return out;
}

Tensor conv2d_backward(const Tensor& input, LayerParams& p,
                       const ConvConfig& cfg, const Tensor& grad_out) {
  std::size_t oh, ow;
  detail::check_conv_shapes(input, p, cfg, oh, ow);
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = p.weights.dim(0), k = cfg.kernel;
  Tensor grad_in({ic, h, w});
  for (std::size_t c = 0; c < oc; ++c)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const real g = grad_out[(c * oh + oy) * ow + ox];
        if (p.has_bias()) p.grad_bias[c] += g;
        for (std::size_t ci = 0; ci < ic; ++ci)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * cfg.stride + ky) -
                  static_cast<std::ptrdiff_t>(cfg.pad);
              const std::ptrdiff_t ix =
                  static_cast<std::ptrdiff_t>(ox * cfg.stride + kx) -
                  static_cast<std::ptrdiff_t>(cfg.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h) || ix < 0 ||
                  ix >= static_cast<std::ptrdiff_t>(w))
                continue;
              const std::size_t widx = ((c * ic + ci) * k + ky) * k + kx;
              const std::size_t iidx = (ci * h + iy) * w + ix;
              p.grad_weights[widx] += g * input[iidx];
              grad_in[iidx] += g * p.weights[widx];
            }
      }
  return grad_in;
}

Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k) {
  detail::check_pool_shapes(input, k);
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / k, ow = w / k;
  Tensor out({c, oh, ow});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        real v = kind == PoolKind::Max ? input[(ci * h + oy * k) * w + ox * k]
                                       : real(0);
        for (std::size_t dy = 0; dy < k; ++dy)
          for (std::size_t dx = 0; dx < k; ++dx) {
            const real e = input[(ci * h + oy * k + dy) * w + ox * k + dx];
            if (kind == PoolKind::Max)
              v = e > v ? e : v;
            else
              v += e;
          }
        out[(ci * oh + oy) * ow + ox] =
            kind == PoolKind::Max ? v : v / static_cast<real>(k * k);
      }
  return out;
}

Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t k,
                       const Tensor& grad_out) {
  detail::check_pool_shapes(input, k);
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / k, ow = w / k;
  Tensor grad_in({c, h, w});
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const real g = grad_out[(ci * oh + oy) * ow + ox];
        if (kind == PoolKind::Max) {
          std::size_t by = oy * k, bx = ox * k;
          real best = input[(ci * h + by) * w + bx];
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx) {
              const real e = input[(ci * h + oy * k + dy) * w + ox * k + dx];
              if (e > best) {
                best = e;
                by = oy * k + dy;
                bx = ox * k + dx;
              }
            }
          grad_in[(ci * h + by) * w + bx] += g;
        } else {
          for (std::size_t dy = 0; dy < k; ++dy)
            for (std::size_t dx = 0; dx < k; ++dx)
              grad_in[(ci * h + oy * k + dy) * w + ox * k + dx] +=
                  g / static_cast<real>(k * k);
        }
      }
  return grad_in;
}

Tensor linear(const Tensor& input, const LayerParams& p) {
  detail::check_linear_shapes(input, p);
  const std::size_t m = p.weights.dim(0), n = p.weights.dim(1);
  Tensor out({m});
  for (std::size_t i = 0; i < m; ++i) {
    real acc = p.has_bias() ? p.bias[i] : real(0);
    for (std::size_t j = 0; j < n; ++j) acc += p.weights[i * n + j] * input[j];
    out[i] = acc;
  }
  return out;
}

Tensor linear_backward(const Tensor& input, LayerParams& p,
                       const Tensor& grad_out) {
  detail::check_linear_shapes(input, p);
  const std::size_t m = p.weights.dim(0), n = p.weights.dim(1);
  Tensor grad_in(input.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const real g = grad_out[i];
    if (p.has_bias()) p.grad_bias[i] += g;
    for (std::size_t j = 0; j < n; ++j) {
      p.grad_weights[i * n + j] += g * input[j];
      grad_in[j] += g * p.weights[i * n + j];
    }
  }
  return grad_in;
}

Tensor pointwise(const Tensor& input, Pointwise fn, real surrogate_width) {
  if (fn == Pointwise::Heaviside && !(surrogate_width > 0)) {
    throw ConfigError("pointwise: heaviside needs surrogate_width > 0");
  }
  Tensor out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const real x = input[i];
    if (fn == Pointwise::Relu)
      out[i] = x > 0 ? x : real(0);
    else if (fn == Pointwise::Sigmoid)
      out[i] = real(1) / (real(1) + std::exp(-x));
    else
      out[i] = x >= 0 ? real(1) : real(0);
  }
  return out;
}

Tensor pointwise_backward(const Tensor& input, Pointwise fn,
                          const Tensor& grad_out, real surrogate_width) {
  if (fn == Pointwise::Heaviside && !(surrogate_width > 0)) {
    throw ConfigError("pointwise_backward: heaviside needs surrogate_width > 0");
  }
  Tensor grad_in(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    const real x = input[i];
    if (fn == Pointwise::Relu)
      grad_in[i] = x > 0 ? grad_out[i] : real(0);
    else if (fn == Pointwise::Sigmoid) {
      const real s = real(1) / (real(1) + std::exp(-x));
      grad_in[i] = grad_out[i] * s * (real(1) - s);
    } else {
      grad_in[i] = std::abs(x) < surrogate_width / 2
                       ? grad_out[i] / surrogate_width
                       : real(0);
    }
  }
  return grad_in;
}

}  // namespace serial_ops
}  // namespace tasnn
