#include "tasnn/synth.hpp"

#include <algorithm>
#include <cmath>

namespace tasnn {

SynthConfig SynthConfig::defaults() {
  SynthConfig cfg;
  for (std::uint64_t s = 0; s < 200000; s += 50000) {
    cfg.signal_windows.emplace_back(s, 25000);
  }
  cfg.motions.resize(cfg.n_classes);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    cfg.motions[c] = {2.0 * M_PI * static_cast<double>(c) /
                          static_cast<double>(cfg.n_classes),
                      1.0, false};
  }
  return cfg;
}

void SynthConfig::validate() const {
  if (width == 0 || height == 0) throw ConfigError("synth: zero extent");
  if (n_classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (samples_per_class < 1) throw ConfigError("synth: need samples");
  if (duration_us < 1) throw ConfigError("synth: zero duration");
  if (noise_rate_per_pixel_us < 0) throw ConfigError("synth: negative noise");
  if (motions.size() != n_classes) {
    throw ConfigError("synth: one motion spec per class required");
  }
  for (const auto& [start, len] : signal_windows) {
    if (len == 0 || start + len > duration_us) {
      throw ConfigError("synth: signal window outside duration");
    }
  }
  if (bar_length == 0 || bar_width == 0) throw ConfigError("synth: bar size");
}

namespace {

constexpr std::uint64_t kTickUs = 500;

// pixels covered by the bar centered at (cx, cy), long axis perpendicular
// to the motion direction, toroidal wrap
void rasterize_bar(double cx, double cy, double ux, double uy,
                   const SynthConfig& cfg, std::vector<std::uint8_t>& cover) {
  std::fill(cover.begin(), cover.end(), std::uint8_t(0));
  const double hl = static_cast<double>(cfg.bar_length) / 2.0;
  const double hw = static_cast<double>(cfg.bar_width) / 2.0;
  const int radius = static_cast<int>(std::ceil(std::max(hl, hw))) + 1;
  const int icx = static_cast<int>(std::floor(cx));
  const int icy = static_cast<int>(std::floor(cy));
  const int W = static_cast<int>(cfg.width), H = static_cast<int>(cfg.height);
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double px = static_cast<double>(icx + dx) + 0.5 - cx;
      const double py = static_cast<double>(icy + dy) + 0.5 - cy;
      const double along = px * ux + py * uy;
      const double across = -px * uy + py * ux;
      if (std::abs(along) <= hw && std::abs(across) <= hl) {
        const int x = ((icx + dx) % W + W) % W;
        const int y = ((icy + dy) % H + H) % H;
        cover[static_cast<std::size_t>(y) * cfg.width +
              static_cast<std::size_t>(x)] = 1;
      }
    }
  }
}

void emit_signal_window(const SynthConfig& cfg, const MotionSpec& motion,
                        std::uint64_t start, std::uint64_t len, Rng& rng,
                        std::vector<Event>& events) {
  const double ux = std::cos(motion.angle_rad);
  const double uy = std::sin(motion.angle_rad);
  // random initial position so samples of one class differ
  double cx = rng.uniform(0.0, static_cast<double>(cfg.width));
  double cy = rng.uniform(0.0, static_cast<double>(cfg.height));
  double dir = 1.0;

  std::vector<std::uint8_t> prev(cfg.width * cfg.height, 0);
  std::vector<std::uint8_t> cur(cfg.width * cfg.height, 0);
  rasterize_bar(cx, cy, ux, uy, cfg, prev);
  for (std::uint64_t t = start + kTickUs; t < start + len; t += kTickUs) {
    const double step =
        motion.speed_px_per_ms * static_cast<double>(kTickUs) / 1000.0;
    cx += dir * ux * step;
    cy += dir * uy * step;
    if (motion.oscillate) {
      if (cx < 0 || cx >= static_cast<double>(cfg.width) || cy < 0 ||
          cy >= static_cast<double>(cfg.height)) {
        dir = -dir;
        cx += 2 * dir * ux * step;
        cy += 2 * dir * uy * step;
      }
    }
    rasterize_bar(cx, cy, ux, uy, cfg, cur);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      if (cur[i] == prev[i]) continue;
      Event e;
      e.t_us = static_cast<std::uint32_t>(t);
      e.x = static_cast<std::uint16_t>(i % cfg.width);
      e.y = static_cast<std::uint16_t>(i / cfg.width);
      e.p = cur[i] ? std::int8_t(1) : std::int8_t(-1);
      events.push_back(e);
    }
    std::swap(prev, cur);
  }
}

void emit_noise(const SynthConfig& cfg, std::uint64_t start, std::uint64_t len,
                Rng& rng, std::vector<Event>& events) {
  const double lambda = cfg.noise_rate_per_pixel_us *
                        static_cast<double>(cfg.width * cfg.height) *
                        static_cast<double>(len);
  const std::uint64_t count = rng.poisson(lambda);
  for (std::uint64_t i = 0; i < count; ++i) {
    Event e;
    e.t_us = static_cast<std::uint32_t>(start + rng.below(len));
    e.x = static_cast<std::uint16_t>(rng.below(cfg.width));
    e.y = static_cast<std::uint16_t>(rng.below(cfg.height));
    e.p = rng.below(2) == 0 ? std::int8_t(1) : std::int8_t(-1);
    events.push_back(e);
  }
}

}  // namespace

std::vector<Sample> generate(const SynthConfig& cfg) {
  cfg.validate();
  // noise fills the gaps between signal windows
  std::vector<std::pair<std::uint64_t, std::uint64_t>> windows =
      cfg.signal_windows;
  std::sort(windows.begin(), windows.end());
  std::vector<std::pair<std::uint64_t, std::uint64_t>> gaps;
  std::uint64_t cursor = 0;
  for (const auto& [start, len] : windows) {
    if (start < cursor) throw ConfigError("synth: overlapping signal windows");
    if (start > cursor) gaps.emplace_back(cursor, start - cursor);
    cursor = start + len;
  }
  if (cursor < cfg.duration_us) {
    gaps.emplace_back(cursor, cfg.duration_us - cursor);
  }

  std::vector<Sample> samples;
  samples.reserve(cfg.n_classes * cfg.samples_per_class);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    for (std::size_t i = 0; i < cfg.samples_per_class; ++i) {
      Rng rng(derive_seed(cfg.seed, "synth-sample", c, i));
      Sample s;
      s.label = static_cast<int>(c);
      s.stream.width = static_cast<std::uint32_t>(cfg.width);
      s.stream.height = static_cast<std::uint32_t>(cfg.height);
      s.stream.n_polarities = 2;
      s.stream.duration_us = cfg.duration_us;
      for (const auto& [start, len] : windows) {
        emit_signal_window(cfg, cfg.motions[c], start, len, rng,
                           s.stream.events);
      }
      for (const auto& [start, len] : gaps) {
        emit_noise(cfg, start, len, rng, s.stream.events);
      }
      std::stable_sort(s.stream.events.begin(), s.stream.events.end(),
                       [](const Event& a, const Event& b) {
                         return a.t_us < b.t_us;
                       });
      s.stream.validate();
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<int>& labels, double train_fraction,
    std::uint64_t seed) {
  if (!(train_fraction > 0 && train_fraction < 1)) {
    throw ConfigError("train fraction must lie strictly inside (0,1)");
  }
  int max_label = -1;
  for (const int l : labels) max_label = std::max(max_label, l);
  if (labels.size() < static_cast<std::size_t>(max_label + 1)) {
    throw DataError("fewer samples than classes");
  }
  std::vector<std::vector<std::size_t>> by_class(
      static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) throw DataError("negative label");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  Rng rng(derive_seed(seed, "split"));
  std::vector<std::size_t> train, test;
  for (std::vector<std::size_t>& cls : by_class) {
    for (std::size_t i = cls.size(); i > 1; --i) {
      std::swap(cls[i - 1], cls[rng.below(i)]);
    }
    const std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(cls.size())));
    for (std::size_t i = 0; i < cls.size(); ++i) {
      (i < n_train ? train : test).push_back(cls[i]);
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> make_split_dataset(const SynthConfig& cfg,
                                               double train_fraction) {
  std::vector<Sample> all = generate(cfg);
  std::vector<int> labels;
  labels.reserve(all.size());
  for (const Sample& s : all) labels.push_back(s.label);
  const auto [train_idx, test_idx] =
      split_indices(labels, train_fraction, cfg.seed);
  Dataset train, test;
  for (Dataset* d : {&train, &test}) {
    d->width = static_cast<std::uint32_t>(cfg.width);
    d->height = static_cast<std::uint32_t>(cfg.height);
    d->n_polarities = 2;
    d->classes = cfg.n_classes;
  }
  for (const std::size_t i : train_idx) train.samples.push_back(all[i]);
  for (const std::size_t i : test_idx) test.samples.push_back(all[i]);
  return {std::move(train), std::move(test)};
}

}  // namespace tasnn
