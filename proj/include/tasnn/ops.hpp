#pragma once

#include "tasnn/tensor.hpp"

namespace tasnn {

struct ConvConfig {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;
};

enum class PoolKind { Max, Avg };
enum class Pointwise { Relu, Sigmoid, Heaviside };

// OpenMP-parallel kernels. Each output element is owned by exactly one
// thread and accumulated in a fixed order, so results do not depend on the
// thread count. Backward passes return the input gradient and add the
// parameter gradients into the LayerParams accumulators.
namespace ops {

// input [C,H,W], weights [out_c,C,k,k] -> [out_c,OH,OW]; zero padding
Tensor conv2d(const Tensor& input, const LayerParams& p,
              const ConvConfig& cfg = {});
Tensor conv2d_backward(const Tensor& input, LayerParams& p,
                       const ConvConfig& cfg, const Tensor& grad_out);

// window k, stride k; spatial dims must divide by k
Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k);
// max routes gradient to the first (row-major) argmax of each window
Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t k,
                       const Tensor& grad_out);

// input flattened to length N, weights [M,N] -> [M]
Tensor linear(const Tensor& input, const LayerParams& p);
Tensor linear_backward(const Tensor& input, LayerParams& p,
                       const Tensor& grad_out);

// heaviside(x) = 1 for x >= 0; its backward uses the rectangular surrogate
// (1/a) * [|x| < a/2]. relu'(0) = 0.
Tensor pointwise(const Tensor& input, Pointwise fn, real surrogate_width = 0);
Tensor pointwise_backward(const Tensor& input, Pointwise fn,
                          const Tensor& grad_out, real surrogate_width = 0);

}  // namespace ops

// Plain serial implementations of the same contracts, written as the
// straight-line textbook loops (the backward passes use the scatter form
// instead of the gather form). Kept as the reference the parallel kernels
// are tested and benchmarked against.
namespace serial_ops {

Tensor conv2d(const Tensor& input, const LayerParams& p,
              const ConvConfig& cfg = {});
Tensor conv2d_backward(const Tensor& input, LayerParams& p,
                       const ConvConfig& cfg, const Tensor& grad_out);
Tensor pool2d(const Tensor& input, PoolKind kind, std::size_t k);
Tensor pool2d_backward(const Tensor& input, PoolKind kind, std::size_t k,
                       const Tensor& grad_out);
Tensor linear(const Tensor& input, const LayerParams& p);
Tensor linear_backward(const Tensor& input, LayerParams& p,
                       const Tensor& grad_out);
Tensor pointwise(const Tensor& input, Pointwise fn, real surrogate_width = 0);
Tensor pointwise_backward(const Tensor& input, Pointwise fn,
                          const Tensor& grad_out, real surrogate_width = 0);

}  // namespace serial_ops

namespace detail {

real sigmoid(real x);
real surrogate_factor_scalar(real x, real width);
void check_conv_shapes(const Tensor& input, const LayerParams& p,
                       const ConvConfig& cfg, std::size_t& out_h,
                       std::size_t& out_w);
void check_pool_shapes(const Tensor& input, std::size_t k);
void check_linear_shapes(const Tensor& input, const LayerParams& p);

}  // namespace detail

}  // namespace tasnn
