#include "tasnn/ops.hpp"

#include <cmath>

namespace tasnn {

namespace detail {

real sigmoid(real x) { return real(1) / (real(1) + std::exp(-x)); }

real surrogate_factor_scalar(real x, real width) {
  return std::abs(x) < width / 2 ? real(1) / width : real(0);
}

void check_conv_shapes(const Tensor& input, const LayerParams& p,
                       const ConvConfig& cfg, std::size_t& out_h,
                       std::size_t& out_w) {
  if (input.rank() != 3) {
    throw ConfigError("conv2d: input must be [C,H,W], got " +
                      shape_string(input.shape()));
  }
  if (p.weights.rank() != 4 || p.weights.dim(2) != cfg.kernel ||
      p.weights.dim(3) != cfg.kernel || p.weights.dim(1) != input.dim(0)) {
    throw ConfigError("conv2d: weights " + shape_string(p.weights.shape()) +
                      " do not match input " + shape_string(input.shape()) +
                      " with kernel " + std::to_string(cfg.kernel));
  }
  if (cfg.stride == 0) throw ConfigError("conv2d: stride must be positive");
  const std::size_t h = input.dim(1), w = input.dim(2);
  const std::size_t span_h = h + 2 * cfg.pad;
  const std::size_t span_w = w + 2 * cfg.pad;
  if (span_h < cfg.kernel || span_w < cfg.kernel ||
      (span_h - cfg.kernel) % cfg.stride != 0 ||
      (span_w - cfg.kernel) % cfg.stride != 0) {
    throw ConfigError("conv2d: kernel/stride/pad do not tile input " +
                      shape_string(input.shape()));
  }
  out_h = (span_h - cfg.kernel) / cfg.stride + 1;
  out_w = (span_w - cfg.kernel) / cfg.stride + 1;
}

void check_pool_shapes(const Tensor& input, std::size_t k) {
  if (input.rank() != 3) {
    throw ConfigError("pool2d: input must be [C,H,W], got " +
                      shape_string(input.shape()));
  }
  if (k == 0) throw ConfigError("pool2d: window must be positive");
  if (input.dim(1) % k != 0 || input.dim(2) % k != 0) {
    throw ConfigError("pool2d: spatial dims " + shape_string(input.shape()) +
                      " not divisible by window " + std::to_string(k));
  }
}

void check_linear_shapes(const Tensor& input, const LayerParams& p) {
  if (p.weights.rank() != 2) {
    throw ConfigError("linear: weights must be [M,N], got " +
                      shape_string(p.weights.shape()));
  }
  if (input.size() != p.weights.dim(1)) {
    throw ConfigError("linear: input length " + std::to_string(input.size()) +
                      " does not match weights " +
                      shape_string(p.weights.shape()));
  }
}

}  // namespace detail

namespace ops {

Tensor conv2d(const Tensor& input, const LayerParams& p,
              const ConvConfig& cfg) {
  std::size_t oh, ow;
  detail::check_conv_shapes(input, p, cfg, oh, ow);
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = p.weights.dim(0), k = cfg.kernel;
  Tensor out({oc, oh, ow});
  const real* in = input.data();
  const real* wt = p.weights.data();
  const real* bias = p.has_bias() ? p.bias.data() : nullptr;
  real* o = out.data();
  const std::size_t work = oc * oh * ow * ic * k * k;
#pragma omp parallel for collapse(2) schedule(static) if (work > (1u << 20))
  for (std::size_t c = 0; c < oc; ++c) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        real acc = bias ? bias[c] : real(0);
        for (std::size_t ci = 0; ci < ic; ++ci) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(
                                          oy * cfg.stride + ky) -
                                      static_cast<std::ptrdiff_t>(cfg.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(
                                            ox * cfg.stride + kx) -
                                        static_cast<std::ptrdiff_t>(cfg.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += wt[((c * ic + ci) * k + ky) * k + kx] *
                     in[(ci * h + iy) * w + ix];
            }
          }
        }
        o[(c * oh + oy) * ow + ox] = acc;
      }
    }
  }
  return out;
}

Tensor conv2d_backward(const Tensor& input, LayerParams& p,
                       const ConvConfig& cfg, const Tensor& grad_out) {
  std::size_t oh, ow;
  detail::check_conv_shapes(input, p, cfg, oh, ow);
  const std::size_t ic = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oc = p.weights.dim(0), k = cfg.kernel;
  if (grad_out.rank() != 3 || grad_out.dim(0) != oc || grad_out.dim(1) != oh ||
      grad_out.dim(2) != ow) {
    throw ConfigError("conv2d_backward: grad_out shape " +
                      shape_string(grad_out.shape()) + " expected [" +
                      std::to_string(oc) + "," + std::to_string(oh) + "," +
                      std::to_string(ow) + "]");
  }
  const real* in = input.data();
  const real* wt = p.weights.data();
  const real* go = grad_out.data();

  // input gradient, gather form: each input cell sums the output cells it fed
  Tensor grad_in({ic, h, w});
  real* gi = grad_in.data();
  const std::size_t work = ic * h * w * oc * k * k;
#pragma omp parallel for collapse(2) schedule(static) if (work > (1u << 20))
  for (std::size_t ci = 0; ci < ic; ++ci) {
    for (std::size_t iy = 0; iy < h; ++iy) {
      for (std::size_t ix = 0; ix < w; ++ix) {
        real acc = 0;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const std::ptrdiff_t num_y =
              static_cast<std::ptrdiff_t>(iy + cfg.pad) -
              static_cast<std::ptrdiff_t>(ky);
          if (num_y < 0 || num_y % static_cast<std::ptrdiff_t>(cfg.stride))
            continue;
          const std::size_t oy = static_cast<std::size_t>(num_y) / cfg.stride;
          if (oy >= oh) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const std::ptrdiff_t num_x =
                static_cast<std::ptrdiff_t>(ix + cfg.pad) -
                static_cast<std::ptrdiff_t>(kx);
            if (num_x < 0 || num_x % static_cast<std::ptrdiff_t>(cfg.stride))
              continue;
            const std::size_t ox =
                static_cast<std::size_t>(num_x) / cfg.stride;
            if (ox >= ow) continue;
            for (std::size_t c = 0; c < oc; ++c) {
              acc += wt[((c * ic + ci) * k + ky) * k + kx] *
                     go[(c * oh + oy) * ow + ox];
            }
          }
        }
        gi[(ci * h + iy) * w + ix] = acc;
      }
    }
  }

  // weight gradient: each weight cell is an independent reduction
  real* gw = p.grad_weights.data();
#pragma omp parallel for collapse(2) schedule(static) if (work > (1u << 20))
  for (std::size_t c = 0; c < oc; ++c) {
    for (std::size_t ci = 0; ci < ic; ++ci) {
      for (std::size_t ky = 0; ky < k; ++ky) {
        for (std::size_t kx = 0; kx < k; ++kx) {
          real acc = 0;
          for (std::size_t oy = 0; oy < oh; ++oy) {
            const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(
                                          oy * cfg.stride + ky) -
                                      static_cast<std::ptrdiff_t>(cfg.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
            for (std::size_t ox = 0; ox < ow; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(
                                            ox * cfg.stride + kx) -
                                        static_cast<std::ptrdiff_t>(cfg.pad);
              if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
              acc += go[(c * oh + oy) * ow + ox] * in[(ci * h + iy) * w + ix];
            }
          }
          gw[((c * ic + ci) * k + ky) * k + kx] += acc;
        }
      }
    }
  }

  if (p.has_bias()) {
    real* gb = p.grad_bias.data();
#pragma omp parallel for schedule(static) if (oc * oh * ow > 65536)
    for (std::size_t c = 0; c < oc; ++c) {
      real acc = 0;
      for (std::size_t i = 0; i < oh * ow; ++i) acc += go[c * oh * ow + i];
      gb[c] += acc;
    }
  }
  return grad_in;
}

Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k) {
  detail::check_pool_shapes(input, k);
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / k, ow = w / k;
  Tensor out({c, oh, ow});
  const real* in = input.data();
  real* o = out.data();
#pragma omp parallel for collapse(2) schedule(static) if (c * h * w > 65536)
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        if (kind == PoolKind::Max) {
          real best = in[(ci * h + oy * k) * w + ox * k];
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const real v = in[(ci * h + oy * k + dy) * w + ox * k + dx];
              if (v > best) best = v;
            }
          }
          o[(ci * oh + oy) * ow + ox] = best;
        } else {
          real acc = 0;
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              acc += in[(ci * h + oy * k + dy) * w + ox * k + dx];
            }
          }
          o[(ci * oh + oy) * ow + ox] = acc / static_cast<real>(k * k);
        }
      }
    }
  }
  return out;
}

Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t k,
                       const Tensor& grad_out) {
  detail::check_pool_shapes(input, k);
  const std::size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t oh = h / k, ow = w / k;
  if (grad_out.rank() != 3 || grad_out.dim(0) != c || grad_out.dim(1) != oh ||
      grad_out.dim(2) != ow) {
    throw ConfigError("pool2d_backward: grad_out shape mismatch");
  }
  Tensor grad_in({c, h, w});
  const real* in = input.data();
  const real* go = grad_out.data();
  real* gi = grad_in.data();
#pragma omp parallel for collapse(2) schedule(static) if (c * h * w > 65536)
  for (std::size_t ci = 0; ci < c; ++ci) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const real g = go[(ci * oh + oy) * ow + ox];
        if (kind == PoolKind::Max) {
          std::size_t best_y = oy * k, best_x = ox * k;
          real best = in[(ci * h + best_y) * w + best_x];
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              const real v = in[(ci * h + oy * k + dy) * w + ox * k + dx];
              if (v > best) {
                best = v;
                best_y = oy * k + dy;
                best_x = ox * k + dx;
              }
            }
          }
          gi[(ci * h + best_y) * w + best_x] = g;
        } else {
          const real share = g / static_cast<real>(k * k);
          for (std::size_t dy = 0; dy < k; ++dy) {
            for (std::size_t dx = 0; dx < k; ++dx) {
              gi[(ci * h + oy * k + dy) * w + ox * k + dx] = share;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor linear(const Tensor& input, const LayerParams& p) {
  detail::check_linear_shapes(input, p);
  const std::size_t m = p.weights.dim(0), n = p.weights.dim(1);
  Tensor out({m});
  const real* x = input.data();
  const real* wt = p.weights.data();
  const real* bias = p.has_bias() ? p.bias.data() : nullptr;
  real* o = out.data();
#pragma omp parallel for schedule(static) if (m * n > (1u << 20))
  for (std::size_t i = 0; i < m; ++i) {
    real acc = bias ? bias[i] : real(0);
    for (std::size_t j = 0; j < n; ++j) acc += wt[i * n + j] * x[j];
    o[i] = acc;
  }
  return out;
}

Tensor linear_backward(const Tensor& input, LayerParams& p,
                       const Tensor& grad_out) {
  detail::check_linear_shapes(input, p);
  const std::size_t m = p.weights.dim(0), n = p.weights.dim(1);
  if (grad_out.size() != m) {
    throw ConfigError("linear_backward: grad_out length mismatch");
  }
  Tensor grad_in(input.shape());
  const real* x = input.data();
  const real* wt = p.weights.data();
  const real* go = grad_out.data();
  real* gi = grad_in.data();
#pragma omp parallel for schedule(static) if (m * n > (1u << 20))
  for (std::size_t j = 0; j < n; ++j) {
    real acc = 0;
    for (std::size_t i = 0; i < m; ++i) acc += wt[i * n + j] * go[i];
    gi[j] = acc;
  }
  real* gw = p.grad_weights.data();
#pragma omp parallel for schedule(static) if (m * n > (1u << 20))
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) gw[i * n + j] += go[i] * x[j];
  }
  if (p.has_bias()) {
    real* gb = p.grad_bias.data();
    for (std::size_t i = 0; i < m; ++i) gb[i] += go[i];
  }
  return grad_in;
}

Tensor pointwise(const Tensor& input, Pointwise fn, real surrogate_width) {
  if (fn == Pointwise::Heaviside && !(surrogate_width > 0)) {
    throw ConfigError("pointwise: heaviside needs surrogate_width > 0");
  }
  Tensor out(input.shape());
  const real* x = input.data();
  real* o = out.data();
  const std::size_t n = input.size();
#pragma omp parallel for schedule(static) if (n > 262144)
  for (std::size_t i = 0; i < n; ++i) {
    switch (fn) {
      case Pointwise::Relu:
        o[i] = x[i] > 0 ? x[i] : real(0);
        break;
      case Pointwise::Sigmoid:
        o[i] = detail::sigmoid(x[i]);
        break;
      case Pointwise::Heaviside:
        o[i] = x[i] >= 0 ? real(1) : real(0);
        break;
    }
  }
  return out;
}

Tensor pointwise_backward(const Tensor& input, Pointwise fn,
                          const Tensor& grad_out, real surrogate_width) {
  if (!input.same_shape(grad_out)) {
    throw ConfigError("pointwise_backward: shape mismatch");
  }
  if (fn == Pointwise::Heaviside && !(surrogate_width > 0)) {
    throw ConfigError("pointwise_backward: heaviside needs surrogate_width > 0");
  }
  Tensor grad_in(input.shape());
  const real* x = input.data();
  const real* go = grad_out.data();
  real* gi = grad_in.data();
  const std::size_t n = input.size();
#pragma omp parallel for schedule(static) if (n > 262144)
  for (std::size_t i = 0; i < n; ++i) {
    switch (fn) {
      case Pointwise::Relu:
        gi[i] = x[i] > 0 ? go[i] : real(0);
        break;
      case Pointwise::Sigmoid: {
        const real s = detail::sigmoid(x[i]);
        gi[i] = go[i] * s * (real(1) - s);
        break;
      }
      case Pointwise::Heaviside:
        gi[i] = go[i] * detail::surrogate_factor_scalar(x[i], surrogate_width);
        break;
    }
  }
  return grad_in;
}

}  // namespace ops
}  // namespace tasnn
