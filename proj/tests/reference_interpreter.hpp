#pragma once

// Straight-line reference interpreter of the layer dynamics, written
// independently of the library kernels: plain double loops, scatter-form
// backward, no shared code paths. Tests compare the production network
// against this.

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "tasnn/network.hpp"

namespace refimpl {

using tasnn::Block;
using tasnn::FrameTensor;
using tasnn::LayerDesc;
using tasnn::Network;
using tasnn::NeuronMode;

using Vec = std::vector<double>;

struct RBlock {
  LayerDesc desc;
  std::size_t in_c, in_h, in_w, out_c, out_h, out_w;
  Vec w, b;        // weighted layers
  bool has_ta = false;
  std::size_t m = 0;
  Vec w1, w2;      // attention
  std::string name;
};

struct RefNet {
  std::size_t T, classes;
  NeuronMode mode;
  double u_th, leak, a;
  bool detach_reset;
  std::vector<RBlock> blocks;

  explicit RefNet(const Network& net) {
    const auto& spec = net.spec();
    T = spec.T;
    classes = spec.classes;
    mode = spec.neuron.mode;
    u_th = double(spec.neuron.u_th);
    leak = double(spec.neuron.leak);
    a = double(spec.neuron.surrogate_width);
    detach_reset = spec.neuron.detach_reset;
    for (std::size_t i = 0; i < net.blocks().size(); ++i) {
      const Block& b = net.blocks()[i];
      RBlock rb;
      rb.desc = b.desc;
      rb.in_c = b.in_c;
      rb.in_h = b.in_h;
      rb.in_w = b.in_w;
      rb.out_c = b.out_c;
      rb.out_h = b.out_h;
      rb.out_w = b.out_w;
      rb.name = "b" + std::to_string(i);
      if (b.desc.weighted()) {
        for (std::size_t j = 0; j < b.params.weights.size(); ++j) {
          rb.w.push_back(double(b.params.weights[j]));
        }
        if (b.params.has_bias()) {
          for (std::size_t j = 0; j < b.params.bias.size(); ++j) {
            rb.b.push_back(double(b.params.bias[j]));
          }
        }
      }
      if (b.ta) {
        rb.has_ta = true;
        rb.m = b.ta->m();
        for (std::size_t j = 0; j < b.ta->w1.size(); ++j) {
          rb.w1.push_back(double(b.ta->w1[j]));
        }
        for (std::size_t j = 0; j < b.ta->w2.size(); ++j) {
          rb.w2.push_back(double(b.ta->w2[j]));
        }
      }
      blocks.push_back(std::move(rb));
    }
  }

  struct Trace {
    // per block: input sequence, scaled input, U, Z; attention internals
    std::vector<std::vector<Vec>> in_seq, scaled, u_seq, z_seq;
    std::vector<Vec> s, hidden, d;
    std::vector<std::vector<double>> outputs;  // [T][classes]
  };

  static double step(double x) { return x >= 0 ? 1.0 : 0.0; }

  Vec conv_fwd(const RBlock& rb, const Vec& x) const {
    const std::size_t k = rb.desc.kernel, pad = k / 2;
    Vec out(rb.out_c * rb.out_h * rb.out_w, 0.0);
    for (std::size_t oc = 0; oc < rb.out_c; ++oc)
      for (std::size_t oy = 0; oy < rb.out_h; ++oy)
        for (std::size_t ox = 0; ox < rb.out_w; ++ox) {
          double acc = rb.b.empty() ? 0.0 : rb.b[oc];
          for (std::size_t ic = 0; ic < rb.in_c; ++ic)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = long(oy + ky) - long(pad);
                const long ix = long(ox + kx) - long(pad);
                if (iy < 0 || iy >= long(rb.in_h) || ix < 0 ||
                    ix >= long(rb.in_w))
                  continue;
                acc += rb.w[((oc * rb.in_c + ic) * k + ky) * k + kx] *
                       x[(ic * rb.in_h + iy) * rb.in_w + ix];
              }
          out[(oc * rb.out_h + oy) * rb.out_w + ox] = acc;
        }
    return out;
  }

  Vec linear_fwd(const RBlock& rb, const Vec& x) const {
    Vec out(rb.out_c, 0.0);
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < rb.out_c; ++i) {
      double acc = rb.b.empty() ? 0.0 : rb.b[i];
      for (std::size_t j = 0; j < n; ++j) acc += rb.w[i * n + j] * x[j];
      out[i] = acc;
    }
    return out;
  }

  Vec pool_fwd(const RBlock& rb, const Vec& x) const {
    const std::size_t kk = rb.desc.arg;
    Vec out(rb.out_c * rb.out_h * rb.out_w, 0.0);
    for (std::size_t c = 0; c < rb.out_c; ++c)
      for (std::size_t oy = 0; oy < rb.out_h; ++oy)
        for (std::size_t ox = 0; ox < rb.out_w; ++ox) {
          double v = rb.desc.kind == LayerDesc::Kind::MaxPool
                         ? x[(c * rb.in_h + oy * kk) * rb.in_w + ox * kk]
                         : 0.0;
          for (std::size_t dy = 0; dy < kk; ++dy)
            for (std::size_t dx = 0; dx < kk; ++dx) {
              const double e =
                  x[(c * rb.in_h + oy * kk + dy) * rb.in_w + ox * kk + dx];
              if (rb.desc.kind == LayerDesc::Kind::MaxPool)
                v = std::max(v, e);
              else
                v += e;
            }
          out[(c * rb.out_h + oy) * rb.out_w + ox] =
              rb.desc.kind == LayerDesc::Kind::MaxPool ? v : v / double(kk * kk);
        }
    return out;
  }

  Trace forward(const FrameTensor& frames) const {
    Trace tr;
    tr.in_seq.resize(blocks.size());
    tr.scaled.resize(blocks.size());
    tr.u_seq.resize(blocks.size());
    tr.z_seq.resize(blocks.size());
    tr.s.resize(blocks.size());
    tr.hidden.resize(blocks.size());
    tr.d.resize(blocks.size());

    std::vector<Vec> seq(T);
    for (std::size_t t = 0; t < T; ++t) {
      seq[t].assign(frames.frame(t), frames.frame(t) + frames.frame_size());
    }
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      const RBlock& rb = blocks[bi];
      tr.in_seq[bi] = seq;
      if (rb.desc.kind == LayerDesc::Kind::MaxPool ||
          rb.desc.kind == LayerDesc::Kind::AvgPool) {
        for (std::size_t t = 0; t < T; ++t) seq[t] = pool_fwd(rb, seq[t]);
        continue;
      }
      // attention scores
      Vec d(T, 1.0);
      if (rb.has_ta) {
        Vec s(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
          for (const double v : seq[t]) s[t] += v;
          s[t] /= double(seq[t].size());
        }
        Vec h(rb.m, 0.0);
        for (std::size_t j = 0; j < rb.m; ++j) {
          for (std::size_t t = 0; t < T; ++t) h[j] += rb.w1[j * T + t] * s[t];
          h[j] = std::max(h[j], 0.0);
        }
        for (std::size_t t = 0; t < T; ++t) {
          double acc = 0;
          for (std::size_t j = 0; j < rb.m; ++j) acc += rb.w2[t * rb.m + j] * h[j];
          d[t] = 1.0 / (1.0 + std::exp(-acc));
        }
        tr.s[bi] = s;
        tr.hidden[bi] = h;
      }
      tr.d[bi] = d;
      // scale, weighted op, membrane dynamics
      tr.scaled[bi].resize(T);
      tr.u_seq[bi].resize(T);
      tr.z_seq[bi].resize(T);
      Vec hcarry(rb.out_c * rb.out_h * rb.out_w, 0.0);
      std::vector<Vec> out(T);
      for (std::size_t t = 0; t < T; ++t) {
        Vec xt = seq[t];
        for (double& v : xt) v *= d[t];
        tr.scaled[bi][t] = xt;
        const Vec cur = rb.desc.kind == LayerDesc::Kind::Conv
                            ? conv_fwd(rb, xt)
                            : linear_fwd(rb, xt);
        Vec u(cur.size()), z(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) {
          u[i] = hcarry[i] + cur[i];
          z[i] = step(u[i] - u_th);
          hcarry[i] = leak * u[i] * (1.0 - z[i]);
        }
        out[t].resize(cur.size());
        for (std::size_t i = 0; i < cur.size(); ++i) {
          out[t][i] = mode == NeuronMode::LIF ? z[i] : std::max(u[i], 0.0);
        }
        tr.u_seq[bi][t] = std::move(u);
        tr.z_seq[bi][t] = std::move(z);
      }
      seq = std::move(out);
    }
    tr.outputs = seq;
    return tr;
  }

  double loss(const Trace& tr, std::size_t label) const {
    Vec rate(classes, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < classes; ++k) rate[k] += tr.outputs[t][k];
    double L = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      const double diff = rate[k] / double(T) - (k == label ? 1.0 : 0.0);
      L += diff * diff;
    }
    return L / double(classes);
  }

  // full surrogate-relaxed backward; returns grads keyed like
  // Network::parameter_names()
  std::map<std::string, Vec> backward(const Trace& tr,
                                      std::size_t label) const {
    std::map<std::string, Vec> grads;
    for (const RBlock& rb : blocks) {
      if (rb.desc.weighted()) {
        grads[rb.name + ".weights"] = Vec(rb.w.size(), 0.0);
        if (!rb.b.empty()) grads[rb.name + ".bias"] = Vec(rb.b.size(), 0.0);
      }
      if (rb.has_ta) {
        grads[rb.name + ".ta.w1"] = Vec(rb.w1.size(), 0.0);
        grads[rb.name + ".ta.w2"] = Vec(rb.w2.size(), 0.0);
      }
    }

    Vec rate(classes, 0.0);
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < classes; ++k) rate[k] += tr.outputs[t][k];
    for (double& r : rate) r /= double(T);

    std::vector<Vec> g_seq(T, Vec(classes, 0.0));
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t k = 0; k < classes; ++k) {
        g_seq[t][k] = 2.0 * (rate[k] - (k == label ? 1.0 : 0.0)) /
                      double(classes) / double(T);
      }

    for (std::size_t bi = blocks.size(); bi-- > 0;) {
      const RBlock& rb = blocks[bi];
      if (rb.desc.kind == LayerDesc::Kind::MaxPool ||
          rb.desc.kind == LayerDesc::Kind::AvgPool) {
        const std::size_t kk = rb.desc.arg;
        for (std::size_t t = 0; t < T; ++t) {
          const Vec& x = tr.in_seq[bi][t];
          Vec gin(x.size(), 0.0);
          for (std::size_t c = 0; c < rb.out_c; ++c)
            for (std::size_t oy = 0; oy < rb.out_h; ++oy)
              for (std::size_t ox = 0; ox < rb.out_w; ++ox) {
                const double g =
                    g_seq[t][(c * rb.out_h + oy) * rb.out_w + ox];
                if (rb.desc.kind == LayerDesc::Kind::MaxPool) {
                  std::size_t bx = ox * kk, by = oy * kk;
                  double best = x[(c * rb.in_h + by) * rb.in_w + bx];
                  for (std::size_t dy = 0; dy < kk; ++dy)
                    for (std::size_t dx = 0; dx < kk; ++dx) {
                      const double e = x[(c * rb.in_h + oy * kk + dy) * rb.in_w +
                                         ox * kk + dx];
                      if (e > best) {
                        best = e;
                        by = oy * kk + dy;
                        bx = ox * kk + dx;
                      }
                    }
                  gin[(c * rb.in_h + by) * rb.in_w + bx] += g;
                } else {
                  for (std::size_t dy = 0; dy < kk; ++dy)
                    for (std::size_t dx = 0; dx < kk; ++dx)
                      gin[(c * rb.in_h + oy * kk + dy) * rb.in_w + ox * kk +
                          dx] += g / double(kk * kk);
                }
              }
          g_seq[t] = std::move(gin);
        }
        continue;
      }

      // membrane dynamics backward
      std::vector<Vec> g_cur(T);
      Vec dh(rb.out_c * rb.out_h * rb.out_w, 0.0);
      for (std::size_t t = T; t-- > 0;) {
        const Vec& u = tr.u_seq[bi][t];
        const Vec& z = tr.z_seq[bi][t];
        Vec du(u.size(), 0.0);
        for (std::size_t i = 0; i < u.size(); ++i) {
          double dz = 0, dui = 0;
          if (mode == NeuronMode::LIF) {
            dz = g_seq[t][i];
          } else {
            dui = u[i] > 0 ? g_seq[t][i] : 0.0;
          }
          dui += dh[i] * leak * (1.0 - z[i]);
          if (!detach_reset) dz += dh[i] * (-leak * u[i]);
          if (std::abs(u[i] - u_th) < a / 2) dui += dz / a;
          du[i] = dui;
        }
        g_cur[t] = du;
        dh = std::move(du);
      }

      // weighted op backward (scatter form)
      std::vector<Vec> gx(T);
      Vec& gw = grads[rb.name + ".weights"];
      Vec* gb = rb.b.empty() ? nullptr : &grads[rb.name + ".bias"];
      for (std::size_t t = 0; t < T; ++t) {
        const Vec& x = tr.scaled[bi][t];
        Vec gin(x.size(), 0.0);
        if (rb.desc.kind == LayerDesc::Kind::Conv) {
          const std::size_t k = rb.desc.kernel, pad = k / 2;
          for (std::size_t oc = 0; oc < rb.out_c; ++oc)
            for (std::size_t oy = 0; oy < rb.out_h; ++oy)
              for (std::size_t ox = 0; ox < rb.out_w; ++ox) {
                const double g =
                    g_cur[t][(oc * rb.out_h + oy) * rb.out_w + ox];
                if (gb) (*gb)[oc] += g;
                for (std::size_t ic = 0; ic < rb.in_c; ++ic)
                  for (std::size_t ky = 0; ky < k; ++ky)
                    for (std::size_t kx = 0; kx < k; ++kx) {
                      const long iy = long(oy + ky) - long(pad);
                      const long ix = long(ox + kx) - long(pad);
                      if (iy < 0 || iy >= long(rb.in_h) || ix < 0 ||
                          ix >= long(rb.in_w))
                        continue;
                      const std::size_t wi =
                          ((oc * rb.in_c + ic) * k + ky) * k + kx;
                      const std::size_t xi =
                          (ic * rb.in_h + iy) * rb.in_w + ix;
                      gw[wi] += g * x[xi];
                      gin[xi] += g * rb.w[wi];
                    }
              }
        } else {
          const std::size_t n = x.size();
          for (std::size_t i = 0; i < rb.out_c; ++i) {
            const double g = g_cur[t][i];
            if (gb) (*gb)[i] += g;
            for (std::size_t j = 0; j < n; ++j) {
              gw[i * n + j] += g * x[j];
              gin[j] += g * rb.w[i * n + j];
            }
          }
        }
        gx[t] = std::move(gin);
      }

      if (rb.has_ta) {
        Vec gd(T, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
          const Vec& x = tr.in_seq[bi][t];
          for (std::size_t i = 0; i < x.size(); ++i) gd[t] += gx[t][i] * x[i];
          for (double& v : gx[t]) v *= tr.d[bi][t];
        }
        // through sigmoid, w2, relu, w1
        Vec g2(T);
        for (std::size_t t = 0; t < T; ++t) {
          g2[t] = gd[t] * tr.d[bi][t] * (1.0 - tr.d[bi][t]);
        }
        Vec& gw2 = grads[rb.name + ".ta.w2"];
        Vec gh(rb.m, 0.0);
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t j = 0; j < rb.m; ++j) {
            gw2[t * rb.m + j] += g2[t] * tr.hidden[bi][j];
            gh[j] += rb.w2[t * rb.m + j] * g2[t];
          }
        for (std::size_t j = 0; j < rb.m; ++j) {
          if (!(tr.hidden[bi][j] > 0)) gh[j] = 0;
        }
        Vec& gw1 = grads[rb.name + ".ta.w1"];
        Vec gs(T, 0.0);
        for (std::size_t j = 0; j < rb.m; ++j)
          for (std::size_t t = 0; t < T; ++t) {
            gw1[j * T + t] += gh[j] * tr.s[bi][t];
            gs[t] += rb.w1[j * T + t] * gh[j];
          }
        for (std::size_t t = 0; t < T; ++t) {
          const double share = gs[t] / double(tr.in_seq[bi][t].size());
          for (double& v : gx[t]) v += share;
        }
      }
      g_seq = std::move(gx);
    }
    return grads;
  }
};

// time-major traversal for attention-free networks: for each timestep, walk
// the whole layer stack carrying every layer's membrane state
inline std::vector<std::vector<double>> time_major_forward(
    const Network& net, const FrameTensor& frames) {
  const RefNet ref(net);
  std::vector<Vec> hcarry;
  for (const RBlock& rb : ref.blocks) {
    hcarry.emplace_back(rb.desc.weighted()
                            ? Vec(rb.out_c * rb.out_h * rb.out_w, 0.0)
                            : Vec());
  }
  std::vector<std::vector<double>> outputs;
  for (std::size_t t = 0; t < ref.T; ++t) {
    Vec x(frames.frame(t), frames.frame(t) + frames.frame_size());
    for (std::size_t bi = 0; bi < ref.blocks.size(); ++bi) {
      const RBlock& rb = ref.blocks[bi];
      if (rb.desc.kind == LayerDesc::Kind::MaxPool ||
          rb.desc.kind == LayerDesc::Kind::AvgPool) {
        x = ref.pool_fwd(rb, x);
        continue;
      }
      if (rb.has_ta) {
        throw std::runtime_error("time-major traversal is for S1 networks");
      }
      const Vec cur = rb.desc.kind == LayerDesc::Kind::Conv
                          ? ref.conv_fwd(rb, x)
                          : ref.linear_fwd(rb, x);
      Vec& h = hcarry[bi];
      Vec out(cur.size());
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const double u = h[i] + cur[i];
        const double z = RefNet::step(u - ref.u_th);
        h[i] = ref.leak * u * (1.0 - z);
        out[i] = ref.mode == NeuronMode::LIF ? z : std::max(u, 0.0);
      }
      x = std::move(out);
    }
    outputs.push_back(x);
  }
  return outputs;
}

}  // namespace refimpl
