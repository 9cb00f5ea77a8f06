#include "tasnn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tasnn/ops.hpp"

namespace tasnn {

std::size_t ta_hidden_width(std::size_t T, std::size_t r, TAHiddenRule rule) {
  if (r == 0) throw ConfigError("TA reduction ratio r must be >= 1");
  const std::size_t m =
      rule == TAHiddenRule::Ceil ? (T + r - 1) / r : T / r;
  return m < 1 ? 1 : m;
}

void TAParams::zero_grads() {
  grad_w1.fill(0);
  grad_w2.fill(0);
}

TAParams TAParams::make(std::size_t T, std::size_t r, TAHiddenRule rule,
                        real d_th, Rng& rng) {
  if (T == 0) throw ConfigError("TA needs T >= 1");
  if (d_th < 0 || d_th > 1) {
    throw ConfigError("TA d_th must lie in [0,1]");
  }
  const std::size_t m = ta_hidden_width(T, r, rule);
  TAParams p;
  p.w1 = Tensor({m, T});
  p.w2 = Tensor({T, m});
  const real b1 = static_cast<real>(1.0 / std::sqrt(static_cast<double>(T)));
  const real b2 = static_cast<real>(1.0 / std::sqrt(static_cast<double>(m)));
  p.w1.fill_uniform(rng, -b1, b1);
  p.w2.fill_uniform(rng, -b2, b2);
  p.grad_w1 = Tensor({m, T});
  p.grad_w2 = Tensor({T, m});
  p.d_th = d_th;
  return p;
}

std::vector<real> squeeze(const FrameTensor& frames) {
  const std::size_t T = frames.T(), n = frames.frame_size();
  std::vector<real> s(T);
  for (std::size_t t = 0; t < T; ++t) {
    const real* f = frames.frame(t);
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += f[i];
    s[t] = acc / static_cast<real>(n);
  }
  return s;
}

std::vector<real> squeeze_seq(const std::vector<Tensor>& frames) {
  std::vector<real> s(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    s[t] = frames[t].sum() / static_cast<real>(frames[t].size());
  }
  return s;
}

namespace {

std::vector<real> excite_sigmoid(const std::vector<real>& s,
                                 const TAParams& p, std::vector<real>* pre,
                                 std::vector<real>* hidden) {
  const std::size_t T = p.T(), m = p.m();
  if (s.size() != T) {
    throw ConfigError("excite: statistic length " + std::to_string(s.size()) +
                      " does not match TA T=" + std::to_string(T));
  }
  std::vector<real> p1(m), h(m);
  for (std::size_t j = 0; j < m; ++j) {
    real acc = 0;
    for (std::size_t t = 0; t < T; ++t) acc += p.w1[j * T + t] * s[t];
    p1[j] = acc;
    h[j] = acc > 0 ? acc : real(0);
  }
  std::vector<real> d(T);
  for (std::size_t t = 0; t < T; ++t) {
    real acc = 0;
    for (std::size_t j = 0; j < m; ++j) acc += p.w2[t * m + j] * h[j];
    d[t] = detail::sigmoid(acc);
  }
  if (pre) *pre = std::move(p1);
  if (hidden) *hidden = std::move(h);
  return d;
}

}  // namespace

TACache excite_train(const std::vector<real>& s, const TAParams& params) {
  TACache cache;
  cache.s = s;
  cache.d = excite_sigmoid(s, params, &cache.pre, &cache.hidden);
  return cache;
}

std::vector<real> excite_backward(const TACache& cache, TAParams& params,
                                  const std::vector<real>& grad_d) {
  const std::size_t T = params.T(), m = params.m();
  // through the sigmoid
  std::vector<real> g2(T);
  for (std::size_t t = 0; t < T; ++t) {
    g2[t] = grad_d[t] * cache.d[t] * (real(1) - cache.d[t]);
  }
  std::vector<real> gh(m, 0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < m; ++j) {
      params.grad_w2[t * m + j] += g2[t] * cache.hidden[j];
      gh[j] += params.w2[t * m + j] * g2[t];
    }
  }
  // through the relu (hidden[j] > 0 iff pre-activation > 0)
  for (std::size_t j = 0; j < m; ++j) {
    if (!(cache.hidden[j] > 0)) gh[j] = 0;
  }
  std::vector<real> gs(T, 0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t t = 0; t < T; ++t) {
      params.grad_w1[j * T + t] += gh[j] * cache.s[t];
      gs[t] += params.w1[j * T + t] * gh[j];
    }
  }
  return gs;
}

std::vector<real> excite_infer(const std::vector<real>& s,
                               const TAParams& params, real d_th) {
  std::vector<real> d = excite_sigmoid(s, params, nullptr, nullptr);
  for (real& v : d) v = v - d_th >= 0 ? real(1) : real(0);
  return d;
}

FrameTensor apply_scores(const FrameTensor& frames,
                         const std::vector<real>& d) {
  if (d.size() != frames.T()) {
    throw ConfigError("apply_scores: ranks " + std::to_string(d.size()) +
                      " scores vs T=" + std::to_string(frames.T()));
  }
  FrameTensor out{Tensor(frames.values.shape())};
  const std::size_t n = frames.frame_size();
  for (std::size_t t = 0; t < frames.T(); ++t) {
    const real* src = frames.frame(t);
    real* dst = out.frame(t);
    for (std::size_t i = 0; i < n; ++i) dst[i] = d[t] * src[i];
  }
  return out;
}

std::size_t drop_count(std::size_t T, real p) {
  if (p < 0 || p > 1) throw ConfigError("pruning proportion must lie in [0,1]");
  // nudge so that proportions like 0.7 with T=10 land on the intended count
  const double k = std::floor(double(p) * double(T) + 1e-9);
  const std::size_t n = static_cast<std::size_t>(k);
  return n > T ? T : n;
}

namespace {

// drop order: smallest score first; on ties the later frame drops first
std::vector<std::size_t> drop_order(const std::vector<real>& scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a > b;
  });
  return idx;
}

}  // namespace

real threshold_for_proportion(const std::vector<real>& scores, real p) {
  if (scores.empty()) throw ConfigError("threshold_for_proportion: no scores");
  const std::size_t k = drop_count(scores.size(), p);
  std::vector<real> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  if (k == 0) return sorted.front();
  if (k == scores.size()) return sorted.back() + real(1);
  return sorted[k];
}

std::vector<std::uint8_t> proportion_mask(const std::vector<real>& scores,
                                          real p) {
  const std::size_t k = drop_count(scores.size(), p);
  std::vector<std::uint8_t> keep(scores.size(), 1);
  const std::vector<std::size_t> order = drop_order(scores);
  for (std::size_t i = 0; i < k; ++i) keep[order[i]] = 0;
  return keep;
}

std::vector<std::uint8_t> irp_mask(std::size_t T, real p, Rng& rng) {
  const std::size_t k = drop_count(T, p);
  std::vector<std::size_t> idx(T);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(T - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::uint8_t> keep(T, 1);
  for (std::size_t i = 0; i < k; ++i) keep[idx[i]] = 0;
  return keep;
}

}  // namespace tasnn
