#include "tasnn/neurons.hpp"

#include <cmath>

#include "tasnn/ops.hpp"

namespace tasnn {

void NeuronConfig::validate() const {
  if (!(leak > 0 && leak < 1)) {
    throw ConfigError("neuron leak must lie in (0,1), got " +
                      std::to_string(double(leak)));
  }
  if (!(u_th > 0)) throw ConfigError("neuron u_th must be positive");
  if (!(surrogate_width > 0)) {
    throw ConfigError("surrogate_width must be positive");
  }
}

namespace detail {

void neuron_update(const Tensor& h, const Tensor& current,
                   const NeuronConfig& cfg, Tensor& u, Tensor& z,
                   Tensor& h_next) {
  if (!h.same_shape(current)) {
    throw ConfigError("neuron step: state shape " + shape_string(h.shape()) +
                      " does not match current " +
                      shape_string(current.shape()));
  }
  u = Tensor(current.shape());
  z = Tensor(current.shape());
  h_next = Tensor(current.shape());
  const std::size_t n = current.size();
  for (std::size_t i = 0; i < n; ++i) {
    const real ui = h[i] + current[i];
    const real zi = ui - cfg.u_th >= 0 ? real(1) : real(0);
    u[i] = ui;
    z[i] = zi;
    h_next[i] = cfg.leak * ui * (real(1) - zi);
  }
}

}  // namespace detail

std::pair<Tensor, NeuronState> lif_step(const NeuronState& state,
                                        const Tensor& current,
                                        const NeuronConfig& cfg) {
  cfg.validate();
  if (cfg.mode != NeuronMode::LIF) {
    throw ConfigError("lif_step called with a non-LIF config");
  }
  Tensor u, z, h_next;
  detail::neuron_update(state.h, current, cfg, u, z, h_next);
  return {std::move(z), NeuronState{std::move(h_next)}};
}

std::pair<Tensor, NeuronState> liaf_step(const NeuronState& state,
                                         const Tensor& current,
                                         const NeuronConfig& cfg) {
  cfg.validate();
  if (cfg.mode != NeuronMode::LIAF) {
    throw ConfigError("liaf_step called with a non-LIAF config");
  }
  Tensor u, z, h_next;
  detail::neuron_update(state.h, current, cfg, u, z, h_next);
  Tensor out = ops::pointwise(u, Pointwise::Relu);
  return {std::move(out), NeuronState{std::move(h_next)}};
}

Tensor surrogate_factor(const Tensor& u_minus_th, const NeuronConfig& cfg) {
  cfg.validate();
  Tensor out(u_minus_th.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::abs(u_minus_th[i]) < cfg.surrogate_width / 2
                 ? real(1) / cfg.surrogate_width
                 : real(0);
  }
  return out;
}

}  // namespace tasnn
