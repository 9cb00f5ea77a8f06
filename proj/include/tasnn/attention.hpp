#pragma once

#include <cstdint>
#include <vector>

#include "tasnn/events.hpp"
#include "tasnn/tensor.hpp"

namespace tasnn {

enum class TAHiddenRule { Ceil, Floor };

// hidden width m: ceil(T/r) or floor(T/r), floored at 1
std::size_t ta_hidden_width(std::size_t T, std::size_t r, TAHiddenRule rule);

// Two bias-free excitation matrices; parameter count is exactly 2*T*m.
struct TAParams {
  Tensor w1;  // [m, T]
  Tensor w2;  // [T, m]
  Tensor grad_w1;
  Tensor grad_w2;
  real d_th = 0;  // inference keep-threshold; 0 keeps every frame

  std::size_t T() const { return w1.dim(1); }
  std::size_t m() const { return w1.dim(0); }
  std::size_t param_count() const { return w1.size() + w2.size(); }
  void zero_grads();

  static TAParams make(std::size_t T, std::size_t r, TAHiddenRule rule,
                       real d_th, Rng& rng);
};

// intermediates of the excitation pass, kept for backward
struct TACache {
  std::vector<real> s;       // squeeze statistic, length T
  std::vector<real> pre;     // w1 s, length m
  std::vector<real> hidden;  // relu(pre)
  std::vector<real> d;       // sigmoid(w2 hidden), length T
};

// mean of each frame over all channels and pixels
std::vector<real> squeeze(const FrameTensor& frames);
std::vector<real> squeeze_seq(const std::vector<Tensor>& frames);

// training branch of the excitation: d = sigmoid(W2 relu(W1 s)), every
// entry strictly inside (0,1)
TACache excite_train(const std::vector<real>& s, const TAParams& params);

// accumulates grad_w1/grad_w2 and returns dL/ds
std::vector<real> excite_backward(const TACache& cache, TAParams& params,
                                  const std::vector<real>& grad_d);

// inference branch: 1 where sigmoid score >= d_th, else 0
std::vector<real> excite_infer(const std::vector<real>& s,
                               const TAParams& params, real d_th);

FrameTensor apply_scores(const FrameTensor& frames,
                         const std::vector<real>& d);

// Threshold with exactly floor(p*T) scores strictly below it when scores are
// distinct (p=1 returns max+1 so everything drops).
real threshold_for_proportion(const std::vector<real>& scores, real p);

// Exact-count keep mask (1 keep, 0 drop): drops the floor(p*T) smallest
// scores; ties keep the earlier frame.
std::vector<std::uint8_t> proportion_mask(const std::vector<real>& scores,
                                          real p);

// keep mask with exactly floor(p*T) uniformly random zeros
std::vector<std::uint8_t> irp_mask(std::size_t T, real p, Rng& rng);

std::size_t drop_count(std::size_t T, real p);

}  // namespace tasnn
