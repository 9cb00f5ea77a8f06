#pragma once

#include <utility>

#include "tasnn/tensor.hpp"

namespace tasnn {

enum class NeuronMode { LIF, LIAF };

struct NeuronConfig {
  NeuronMode mode = NeuronMode::LIF;
  real u_th = real(0.3);
  real leak = real(0.3);  // e^(-dt/tau), in (0,1)
  real surrogate_width = real(1.0);
  bool detach_reset = false;  // when true the reset gate carries no gradient

  void validate() const;
};

// Decayed membrane carry H; one tensor per layer, zeroed at t=0.
struct NeuronState {
  Tensor h;
};

// One timestep of the iterative dynamics:
//   U = H + current
//   Z = heaviside(U - u_th)        (heaviside(0) = 1)
//   H' = leak * U * (1 - Z)        (hard reset to 0)
//   X = Z for LIF, relu(U) for LIAF
std::pair<Tensor, NeuronState> lif_step(const NeuronState& state,
                                        const Tensor& current,
                                        const NeuronConfig& cfg);
std::pair<Tensor, NeuronState> liaf_step(const NeuronState& state,
                                         const Tensor& current,
                                         const NeuronConfig& cfg);

// Elementwise (1/a) * [|u - u_th| < a/2], the stand-in for dZ/dU during
// backward. Input is already u - u_th.
Tensor surrogate_factor(const Tensor& u_minus_th, const NeuronConfig& cfg);

namespace detail {
// shared membrane update; writes U and Z, returns new H
void neuron_update(const Tensor& h, const Tensor& current,
                   const NeuronConfig& cfg, Tensor& u, Tensor& z,
                   Tensor& h_next);
}  // namespace detail

}  // namespace tasnn
