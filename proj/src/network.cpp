#include "tasnn/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace tasnn {

namespace {

bool parse_uint(const std::string& s, std::size_t& out) {
  if (s.empty()) return false;
  out = 0;
  for (const char c : s) {
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    out = out * 10 + static_cast<std::size_t>(c - '0');
  }
  return true;
}

}  // namespace

std::vector<LayerDesc> parse_structure(const std::string& notation) {
  std::vector<std::string> tokens;
  std::string cur;
  for (const char c : notation) {
    if (c == '-') {
      if (!cur.empty()) tokens.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);

  std::vector<LayerDesc> layers;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    std::size_t n = 0;
    if (tok == "Input" || tok == "input") {
      if (i != 0) throw ConfigError("structure: Input must come first");
      continue;
    }
    if (tok.size() > 2 && tok.compare(0, 2, "MP") == 0 &&
        parse_uint(tok.substr(2), n)) {
      layers.push_back({LayerDesc::Kind::MaxPool, n, 0, 0});
    } else if (tok.size() > 2 && tok.compare(0, 2, "AP") == 0 &&
               parse_uint(tok.substr(2), n)) {
      layers.push_back({LayerDesc::Kind::AvgPool, n, 0, 0});
    } else if (tok.size() > 2 && tok.compare(0, 2, "DO") == 0 &&
               parse_uint(tok.substr(2), n)) {
      if (n >= 100) throw ConfigError("structure: dropout rate " + tok);
      layers.push_back(
          {LayerDesc::Kind::Dropout, 0, 0, static_cast<real>(n) / 100});
    } else if (tok.size() > 2 && tok.substr(tok.size() - 2) == "FC" &&
               parse_uint(tok.substr(0, tok.size() - 2), n)) {
      layers.push_back({LayerDesc::Kind::Linear, n, 0, 0});
    } else if (tok.find('C') != std::string::npos) {
      const std::size_t pos = tok.find('C');
      std::size_t ch = 0, k = 0;
      if (!parse_uint(tok.substr(0, pos), ch) ||
          !parse_uint(tok.substr(pos + 1), k) || k == 0 || k % 2 == 0) {
        throw ConfigError("structure: cannot parse conv token '" + tok + "'");
      }
      layers.push_back({LayerDesc::Kind::Conv, ch, k, 0});
    } else if (parse_uint(tok, n)) {
      layers.push_back({LayerDesc::Kind::Linear, n, 0, 0});
    } else {
      throw ConfigError("structure: unknown token '" + tok + "'");
    }
  }
  if (layers.empty()) throw ConfigError("structure: no layers");
  return layers;
}

std::size_t Block::macs_per_frame() const {
  if (desc.kind == LayerDesc::Kind::Conv) {
    return out_c * out_h * out_w * in_c * desc.kernel * desc.kernel;
  }
  if (desc.kind == LayerDesc::Kind::Linear) {
    return out_c * in_size();
  }
  return 0;
}

void NetworkSpec::validate() {
  if (in_c == 0 || in_h == 0 || in_w == 0) {
    throw ConfigError("network input dimensions unset");
  }
  if (T < 1) throw ConfigError("network T must be >= 1");
  neuron.validate();
  if (ta_r == 0) throw ConfigError("ta_r must be >= 1");
  if (ta_d_th < 0 || ta_d_th > 1) throw ConfigError("ta_d_th must lie in [0,1]");
  if (layers.empty()) throw ConfigError("network has no layers");

  std::size_t h = in_h, w = in_w;
  bool flat = false;
  bool any_weighted = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerDesc& d = layers[i];
    const std::string where = "layer " + std::to_string(i + 1);
    switch (d.kind) {
      case LayerDesc::Kind::MaxPool:
      case LayerDesc::Kind::AvgPool:
        if (flat) throw ConfigError(where + ": pooling after a linear layer");
        if (d.arg == 0 || h % d.arg != 0 || w % d.arg != 0) {
          throw ConfigError(where + ": pool window " + std::to_string(d.arg) +
                            " does not divide " + std::to_string(h) + "x" +
                            std::to_string(w));
        }
        h /= d.arg;
        w /= d.arg;
        break;
      case LayerDesc::Kind::Conv:
        // stride 1, pad k/2 preserves h and w
        if (flat) throw ConfigError(where + ": conv after a linear layer");
        if (d.arg == 0) throw ConfigError(where + ": conv needs channels");
        any_weighted = true;
        break;
      case LayerDesc::Kind::Linear:
        if (d.arg == 0) throw ConfigError(where + ": linear needs width");
        h = w = 1;
        flat = true;
        any_weighted = true;
        break;
      case LayerDesc::Kind::Dropout:
        if (!(d.rate >= 0 && d.rate < 1)) {
          throw ConfigError(where + ": dropout rate out of range");
        }
        break;
    }
  }
  if (!any_weighted) throw ConfigError("network has no weighted layers");
  if (layers.back().kind != LayerDesc::Kind::Linear) {
    throw ConfigError("network must end in a linear readout layer");
  }
  classes = layers.back().arg;
  if (classes < 2) throw ConfigError("readout layer needs >= 2 classes");
}

Network Network::build(const NetworkSpec& spec_in, std::uint64_t init_seed) {
  Network net;
  net.spec_ = spec_in;
  net.spec_.validate();
  const NetworkSpec& spec = net.spec_;

  // count weighted layers first so strategy attachment is explicit
  std::size_t n_weighted = 0;
  for (const LayerDesc& d : spec.layers) {
    if (d.weighted()) ++n_weighted;
  }

  Rng rng(derive_seed(init_seed, "net-init"));
  std::size_t c = spec.in_c, h = spec.in_h, w = spec.in_w;
  std::size_t widx = 0;
  for (const LayerDesc& d : spec.layers) {
    Block b;
    b.desc = d;
    b.in_c = c;
    b.in_h = h;
    b.in_w = w;
    switch (d.kind) {
      case LayerDesc::Kind::MaxPool:
      case LayerDesc::Kind::AvgPool:
        h /= d.arg;
        w /= d.arg;
        break;
      case LayerDesc::Kind::Conv:
        b.params = LayerParams::conv(d.arg, c, d.kernel, spec.bias, rng);
        c = d.arg;
        break;
      case LayerDesc::Kind::Linear:
        b.params = LayerParams::dense(d.arg, c * h * w, spec.bias, rng);
        c = d.arg;
        h = w = 1;
        break;
      case LayerDesc::Kind::Dropout:
        break;
    }
    b.out_c = c;
    b.out_h = h;
    b.out_w = w;
    if (d.weighted()) {
      b.weighted_index = widx;
      const bool attach =
          spec.strategy == TAStrategy::S4 ||
          (spec.strategy == TAStrategy::S2 && widx == 0) ||
          (spec.strategy == TAStrategy::S3 && widx > 0);
      if (attach) {
        b.ta = TAParams::make(spec.T, spec.ta_r, spec.ta_hidden, spec.ta_d_th,
                              rng);
      }
      ++widx;
    }
    net.blocks_.push_back(std::move(b));
  }
  net.trace_.resize(net.blocks_.size());
  return net;
}

namespace {

Tensor scale_tensor(const Tensor& x, real s) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return out;
}

}  // namespace

Tensor Network::forward(const FrameTensor& frames, RunMode mode,
                        const PruneContext* prune, Rng* dropout_rng) {
  const std::size_t T = spec_.T;
  if (frames.T() != T) {
    throw ConfigError("forward: frames have T=" + std::to_string(frames.T()) +
                      ", network expects " + std::to_string(T));
  }
  if (frames.C() != spec_.in_c || frames.H() != spec_.in_h ||
      frames.W() != spec_.in_w) {
    throw ConfigError("forward: frame shape " +
                      shape_string(frames.values.shape()) +
                      " does not match network input");
  }
  const bool train = mode == RunMode::Train;
  if (prune && prune->kind != PruneKind::None && train) {
    throw ConfigError("forward: pruning applies to infer mode only");
  }

  // unstack [T,C,H,W] into per-step tensors
  std::vector<Tensor> seq(T);
  for (std::size_t t = 0; t < T; ++t) {
    seq[t] = Tensor({frames.C(), frames.H(), frames.W()});
    const real* src = frames.frame(t);
    for (std::size_t i = 0; i < seq[t].size(); ++i) seq[t][i] = src[i];
  }

  std::vector<real> prepool_s;
  if (spec_.ta_squeeze_prepool) prepool_s = squeeze(frames);

  std::vector<real> irp_scores;
  if (prune && prune->kind == PruneKind::Irp) {
    if (!prune->rng) throw ConfigError("IRP pruning needs an rng");
    const std::vector<std::uint8_t> keep = irp_mask(T, prune->p, *prune->rng);
    irp_scores.assign(keep.begin(), keep.end());
  }

  last_scores_.clear();
  last_executed_.clear();

  for (std::size_t bi = 0; bi < blocks_.size(); ++bi) {
    Block& b = blocks_[bi];
    BlockTrace& tr = trace_[bi];
    tr = BlockTrace{};
    switch (b.desc.kind) {
      case LayerDesc::Kind::MaxPool:
      case LayerDesc::Kind::AvgPool: {
        const PoolKind kind = b.desc.kind == LayerDesc::Kind::MaxPool
                                  ? PoolKind::Max
                                  : PoolKind::Avg;
        std::vector<Tensor> out(T);
        for (std::size_t t = 0; t < T; ++t) {
          out[t] = ops::pool2d(seq[t], kind, b.desc.arg);
        }
        if (train) tr.in_seq = std::move(seq);
        seq = std::move(out);
        break;
      }
      case LayerDesc::Kind::Dropout: {
        if (train) {
          if (!dropout_rng) {
            throw ConfigError("dropout layer needs a training rng");
          }
          const real keep = real(1) - b.desc.rate;
          tr.drop_mask.resize(T);
          for (std::size_t t = 0; t < T; ++t) {
            Tensor mask(seq[t].shape());
            for (std::size_t i = 0; i < mask.size(); ++i) {
              mask[i] = dropout_rng->uniform01() < keep ? real(1) / keep
                                                        : real(0);
              seq[t][i] *= mask[i];
            }
            tr.drop_mask[t] = std::move(mask);
          }
        }
        break;
      }
      case LayerDesc::Kind::Conv:
      case LayerDesc::Kind::Linear: {
        const bool is_conv = b.desc.kind == LayerDesc::Kind::Conv;
        const ConvConfig conv_cfg{b.desc.kernel, 1, b.desc.kernel / 2};
        tr.in_seq = std::move(seq);

        // per-frame scores; random input pruning owns the first weighted
        // layer and replaces whatever attention would have decided there
        if (b.weighted_index == 0 && !irp_scores.empty()) {
          tr.scores = irp_scores;
        } else if (b.ta) {
          const std::vector<real> s =
              (spec_.ta_squeeze_prepool && b.weighted_index == 0)
                  ? prepool_s
                  : squeeze_seq(tr.in_seq);
          if (train) {
            tr.ta_cache = excite_train(s, *b.ta);
            tr.scores = tr.ta_cache.d;
          } else {
            const TACache cache = excite_train(s, *b.ta);
            tr.scores.resize(T);
            if (prune && prune->kind == PruneKind::Iap) {
              const std::vector<std::uint8_t> keep =
                  proportion_mask(cache.d, prune->p);
              for (std::size_t t = 0; t < T; ++t) tr.scores[t] = keep[t];
            } else {
              for (std::size_t t = 0; t < T; ++t) {
                tr.scores[t] = cache.d[t] - b.ta->d_th >= 0 ? real(1) : real(0);
              }
            }
          }
        }
        last_scores_.push_back(tr.scores);

        // weighted op + membrane dynamics, unrolled over t
        if (train) {
          tr.post_ta.resize(T);
          tr.u_seq.resize(T);
          tr.z_seq.resize(T);
        }
        std::vector<Tensor> out(T);
        const std::vector<std::size_t> out_shape =
            is_conv ? std::vector<std::size_t>{b.out_c, b.out_h, b.out_w}
                    : std::vector<std::size_t>{b.out_c};
        Tensor h_state(out_shape);
        std::size_t executed = 0;
        for (std::size_t t = 0; t < T; ++t) {
          Tensor current;
          const bool skip = !train && !tr.scores.empty() && tr.scores[t] == 0;
          if (skip) {
            current = Tensor(out_shape);
          } else {
            const Tensor* src = &tr.in_seq[t];
            Tensor scaled;
            if (!tr.scores.empty() && (train || tr.scores[t] != 1)) {
              scaled = scale_tensor(tr.in_seq[t], tr.scores[t]);
              src = &scaled;
            }
            current = is_conv ? ops::conv2d(*src, b.params, conv_cfg)
                              : ops::linear(*src, b.params);
            ++executed;
            if (train && !tr.scores.empty()) tr.post_ta[t] = std::move(scaled);
          }
          Tensor u(out_shape), z(out_shape);
          const std::size_t n = current.size();
          for (std::size_t i = 0; i < n; ++i) {
            const real ui = h_state[i] + current[i];
            const real zi = ui - spec_.neuron.u_th >= 0 ? real(1) : real(0);
            u[i] = ui;
            z[i] = zi;
            h_state[i] = spec_.neuron.leak * ui * (real(1) - zi);
          }
          if (spec_.neuron.mode == NeuronMode::LIF) {
            out[t] = z;
          } else {
            out[t] = Tensor(out_shape);
            for (std::size_t i = 0; i < n; ++i) {
              out[t][i] = u[i] > 0 ? u[i] : real(0);
            }
          }
          if (train) {
            tr.u_seq[t] = std::move(u);
            tr.z_seq[t] = std::move(z);
          }
        }
        last_executed_.push_back(executed);
        seq = std::move(out);
        break;
      }
    }
  }

  trace_valid_ = train;

  Tensor outputs({T, spec_.classes});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < spec_.classes; ++k) {
      outputs[t * spec_.classes + k] = seq[t][k];
    }
  }
  return outputs;
}

std::vector<real> rate_readout(const Tensor& outputs) {
  if (outputs.rank() != 2 || outputs.dim(0) < 1) {
    throw ConfigError("rate_readout: outputs must be [T,classes]");
  }
  const std::size_t T = outputs.dim(0), K = outputs.dim(1);
  std::vector<real> scores(K, 0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) scores[k] += outputs[t * K + k];
  }
  for (real& v : scores) v /= static_cast<real>(T);
  return scores;
}

std::size_t argmax_index(const std::vector<real>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

real Network::loss_value(const Tensor& outputs, std::size_t label,
                         LossKind loss) const {
  if (label >= spec_.classes) {
    throw ConfigError("label " + std::to_string(label) + " out of range");
  }
  const std::vector<real> rate = rate_readout(outputs);
  const std::size_t K = rate.size();
  if (loss == LossKind::MseRate) {
    real acc = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const real d = rate[k] - (k == label ? real(1) : real(0));
      acc += d * d;
    }
    return acc / static_cast<real>(K);
  }
  // softmax cross-entropy on the rates
  real mx = rate[0];
  for (const real v : rate) mx = v > mx ? v : mx;
  real denom = 0;
  for (const real v : rate) denom += std::exp(v - mx);
  return -(rate[label] - mx - std::log(denom));
}

real Network::loss_and_backward(const FrameTensor& frames, std::size_t label,
                                LossKind loss, Rng* dropout_rng) {
  const Tensor outputs = forward(frames, RunMode::Train, nullptr, dropout_rng);
  const std::size_t T = spec_.T, K = spec_.classes;
  const real loss_val = loss_value(outputs, label, loss);

  const std::vector<real> rate = rate_readout(outputs);
  std::vector<real> grad_rate(K);
  if (loss == LossKind::MseRate) {
    for (std::size_t k = 0; k < K; ++k) {
      grad_rate[k] = 2 * (rate[k] - (k == label ? real(1) : real(0))) /
                     static_cast<real>(K);
    }
  } else {
    real mx = rate[0];
    for (const real v : rate) mx = v > mx ? v : mx;
    real denom = 0;
    for (const real v : rate) denom += std::exp(v - mx);
    for (std::size_t k = 0; k < K; ++k) {
      grad_rate[k] = std::exp(rate[k] - mx) / denom -
                     (k == label ? real(1) : real(0));
    }
  }
  Tensor grad_outputs({T, K});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t k = 0; k < K; ++k) {
      grad_outputs[t * K + k] = grad_rate[k] / static_cast<real>(T);
    }
  }
  backward(grad_outputs);
  return loss_val;
}

void Network::backward(const Tensor& grad_outputs) {
  if (!trace_valid_) {
    throw ConfigError("backward without a preceding train-mode forward");
  }
  const std::size_t T = spec_.T;

  std::vector<Tensor> g_seq(T);
  {
    const Block& last = blocks_.back();
    for (std::size_t t = 0; t < T; ++t) {
      g_seq[t] = Tensor({last.out_c});
      for (std::size_t k = 0; k < last.out_c; ++k) {
        g_seq[t][k] = grad_outputs[t * last.out_c + k];
      }
    }
  }

  for (std::size_t bj = blocks_.size(); bj-- > 0;) {
    Block& b = blocks_[bj];
    BlockTrace& tr = trace_[bj];
    switch (b.desc.kind) {
      case LayerDesc::Kind::MaxPool:
      case LayerDesc::Kind::AvgPool: {
        const PoolKind kind = b.desc.kind == LayerDesc::Kind::MaxPool
                                  ? PoolKind::Max
                                  : PoolKind::Avg;
        for (std::size_t t = 0; t < T; ++t) {
          g_seq[t] = ops::pool2d_backward(tr.in_seq[t], kind, b.desc.arg,
                                          g_seq[t]);
        }
        break;
      }
      case LayerDesc::Kind::Dropout: {
        if (!tr.drop_mask.empty()) {
          for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t i = 0; i < g_seq[t].size(); ++i) {
              g_seq[t][i] *= tr.drop_mask[t][i];
            }
          }
        }
        break;
      }
      case LayerDesc::Kind::Conv:
      case LayerDesc::Kind::Linear: {
        const bool is_conv = b.desc.kind == LayerDesc::Kind::Conv;
        const ConvConfig conv_cfg{b.desc.kernel, 1, b.desc.kernel / 2};
        const NeuronConfig& nc = spec_.neuron;

        // membrane dynamics, reverse time
        std::vector<Tensor> g_current(T);
        Tensor dh(tr.u_seq[0].shape());
        for (std::size_t t = T; t-- > 0;) {
          const Tensor& u = tr.u_seq[t];
          const Tensor& z = tr.z_seq[t];
          Tensor du(u.shape());
          const std::size_t n = u.size();
          for (std::size_t i = 0; i < n; ++i) {
            real dzi = 0;
            real dui = 0;
            if (nc.mode == NeuronMode::LIF) {
              dzi = g_seq[t][i];
            } else {
              dui = u[i] > 0 ? g_seq[t][i] : real(0);
            }
            // H = leak * U * (1 - Z)
            dui += dh[i] * nc.leak * (real(1) - z[i]);
            if (!nc.detach_reset) dzi += dh[i] * (-nc.leak * u[i]);
            // Z = heaviside(U - u_th), surrogate factor in place of the delta
            const real x = u[i] - nc.u_th;
            if (std::abs(x) < nc.surrogate_width / 2) {
              dui += dzi / nc.surrogate_width;
            }
            du[i] = dui;
          }
          g_current[t] = du;
          dh = std::move(du);
        }

        // weighted op, then the attention paths
        std::vector<Tensor> gx(T);
        for (std::size_t t = 0; t < T; ++t) {
          const Tensor& src =
              tr.scores.empty() ? tr.in_seq[t] : tr.post_ta[t];
          gx[t] = is_conv
                      ? ops::conv2d_backward(src, b.params, conv_cfg,
                                             g_current[t])
                      : ops::linear_backward(src, b.params, g_current[t]);
        }
        if (b.ta) {
          std::vector<real> gd(T);
          for (std::size_t t = 0; t < T; ++t) {
            real acc = 0;
            for (std::size_t i = 0; i < gx[t].size(); ++i) {
              acc += gx[t][i] * tr.in_seq[t][i];
            }
            gd[t] = acc;
            for (std::size_t i = 0; i < gx[t].size(); ++i) {
              gx[t][i] *= tr.scores[t];
            }
          }
          const std::vector<real> gs =
              excite_backward(tr.ta_cache, *b.ta, gd);
          // statistic path; skipped when the statistic came straight from
          // the raw network input
          if (!(spec_.ta_squeeze_prepool && b.weighted_index == 0)) {
            for (std::size_t t = 0; t < T; ++t) {
              const real share = gs[t] / static_cast<real>(tr.in_seq[t].size());
              for (std::size_t i = 0; i < gx[t].size(); ++i) {
                gx[t][i] += share;
              }
            }
          }
        }
        g_seq = std::move(gx);
        break;
      }
    }
  }
  trace_valid_ = false;
}

void Network::zero_grads() {
  for (Block& b : blocks_) {
    if (b.desc.weighted()) b.params.zero_grads();
    if (b.ta) b.ta->zero_grads();
  }
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (Block& b : blocks_) {
    if (b.desc.weighted()) {
      out.push_back(&b.params.weights);
      if (b.params.has_bias()) out.push_back(&b.params.bias);
    }
    if (b.ta) {
      out.push_back(&b.ta->w1);
      out.push_back(&b.ta->w2);
    }
  }
  return out;
}

std::vector<Tensor*> Network::gradients() {
  std::vector<Tensor*> out;
  for (Block& b : blocks_) {
    if (b.desc.weighted()) {
      out.push_back(&b.params.grad_weights);
      if (b.params.has_bias()) out.push_back(&b.params.grad_bias);
    }
    if (b.ta) {
      out.push_back(&b.ta->grad_w1);
      out.push_back(&b.ta->grad_w2);
    }
  }
  return out;
}

std::vector<std::string> Network::parameter_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const Block& b = blocks_[i];
    const std::string base = "b" + std::to_string(i);
    if (b.desc.weighted()) {
      out.push_back(base + ".weights");
      if (b.params.has_bias()) out.push_back(base + ".bias");
    }
    if (b.ta) {
      out.push_back(base + ".ta.w1");
      out.push_back(base + ".ta.w2");
    }
  }
  return out;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const Block& b : blocks_) {
    if (b.desc.weighted()) {
      n += b.params.weights.size();
      if (b.params.has_bias()) n += b.params.bias.size();
    }
    if (b.ta) n += b.ta->param_count();
  }
  return n;
}

real Network::min_membrane_margin() const {
  if (!trace_valid_) {
    throw ConfigError("min_membrane_margin needs a train-mode forward");
  }
  real margin = std::numeric_limits<real>::infinity();
  for (const BlockTrace& tr : trace_) {
    for (const Tensor& u : tr.u_seq) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        margin = std::min(margin, std::abs(u[i] - spec_.neuron.u_th));
        margin = std::min(margin, std::abs(u[i]));
      }
    }
    // the excitation relu kink counts too
    for (const real p : tr.ta_cache.pre) {
      margin = std::min(margin, std::abs(p));
    }
  }
  return margin;
}

std::size_t Network::ta_param_count() const {
  std::size_t n = 0;
  for (const Block& b : blocks_) {
    if (b.ta) n += b.ta->param_count();
  }
  return n;
}

}  // namespace tasnn
