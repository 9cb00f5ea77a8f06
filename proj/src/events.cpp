#include "tasnn/events.hpp"

namespace tasnn {

void EventStream::validate() const {
  if (width == 0 || height == 0) {
    throw DataError("event stream has zero spatial extent");
  }
  if (n_polarities != 1 && n_polarities != 2) {
    throw DataError("n_polarities must be 1 or 2");
  }
  std::uint32_t prev_t = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const Event& e = events[i];
    if (e.x >= width || e.y >= height) {
      throw DataError("event " + std::to_string(i) + " at (" +
                      std::to_string(e.x) + "," + std::to_string(e.y) +
                      ") outside " + std::to_string(width) + "x" +
                      std::to_string(height));
    }
    if (e.p != 1 && e.p != -1) {
      throw DataError("event " + std::to_string(i) + " has polarity " +
                      std::to_string(int(e.p)));
    }
    if (n_polarities == 1 && e.p != 1) {
      throw DataError("event " + std::to_string(i) +
                      " is negative in a single-polarity stream");
    }
    if (i > 0 && e.t_us < prev_t) {
      throw DataError("event " + std::to_string(i) + " out of time order");
    }
    if (e.t_us >= duration_us) {
      throw DataError("event " + std::to_string(i) + " at t=" +
                      std::to_string(e.t_us) + "us past duration " +
                      std::to_string(duration_us) + "us");
    }
    prev_t = e.t_us;
  }
}

void AggregationConfig::validate() const {
  if (dt_us < 1) throw ConfigError("aggregation dt_us must be >= 1");
  if (T < 1) throw ConfigError("aggregation T must be >= 1");
}

FrameTensor aggregate(const EventStream& stream, const AggregationConfig& cfg) {
  cfg.validate();
  const std::size_t C = stream.n_polarities;
  const std::size_t H = stream.height, W = stream.width;
  FrameTensor out{Tensor({cfg.T, C, H, W})};
  real* v = out.values.data();
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x >= W || e.y >= H) {
      throw DataError("event " + std::to_string(i) + " at (" +
                      std::to_string(e.x) + "," + std::to_string(e.y) +
                      ") outside stream bounds");
    }
    if (e.t_us < cfg.t0_us) continue;
    const std::uint64_t w = (e.t_us - cfg.t0_us) / cfg.dt_us;
    if (w >= cfg.T) continue;
    const std::size_t c = e.p == 1 ? 0 : 1;
    if (c >= C) {
      throw DataError("event " + std::to_string(i) +
                      " is negative in a single-polarity stream");
    }
    v[((w * C + c) * H + e.y) * W + e.x] += 1;
  }
  return out;
}

FrameTensor rcs_sample(const EventStream& stream, std::uint64_t dt_us,
                       std::size_t T, Rng& rng) {
  AggregationConfig cfg{dt_us, T, 0};
  cfg.validate();
  const std::uint64_t lat = cfg.latency_us();
  if (stream.duration_us > lat) {
    cfg.t0_us = rng.between(0, stream.duration_us - lat);
  }
  return aggregate(stream, cfg);
}

std::vector<std::uint64_t> crop_starts(std::uint64_t duration_us,
                                       std::uint64_t dt_us, std::size_t T,
                                       std::size_t n_crops) {
  AggregationConfig{dt_us, T, 0}.validate();
  if (n_crops < 1) throw ConfigError("n_crops must be >= 1");
  const std::uint64_t lat = dt_us * T;
  if (duration_us < lat) {
    throw DataError("sample of " + std::to_string(duration_us) +
                    "us is shorter than one crop of " + std::to_string(lat) +
                    "us");
  }
  std::vector<std::uint64_t> starts(n_crops);
  if (duration_us >= lat * n_crops) {
    for (std::size_t i = 0; i < n_crops; ++i) starts[i] = i * lat;
  } else if (n_crops == 1) {
    starts[0] = 0;
  } else {
    // overlapped: first at 0, last at duration - lat, evenly spaced between
    const std::uint64_t span = duration_us - lat;
    for (std::size_t i = 0; i < n_crops; ++i) {
      starts[i] = (i * span + (n_crops - 1) / 2) / (n_crops - 1);
    }
    starts[n_crops - 1] = span;
  }
  return starts;
}

std::vector<FrameTensor> test_crops(const EventStream& stream,
                                    std::uint64_t dt_us, std::size_t T,
                                    std::size_t n_crops) {
  const std::vector<std::uint64_t> starts =
      crop_starts(stream.duration_us, dt_us, T, n_crops);
  std::vector<FrameTensor> crops;
  crops.reserve(starts.size());
  for (const std::uint64_t t0 : starts) {
    crops.push_back(aggregate(stream, AggregationConfig{dt_us, T, t0}));
  }
  return crops;
}

EventStream pad_or_cut(const EventStream& stream, std::uint64_t window_us) {
  if (window_us < 1) throw ConfigError("pad_or_cut window must be >= 1");
  EventStream out;
  out.width = stream.width;
  out.height = stream.height;
  out.n_polarities = stream.n_polarities;
  out.duration_us = window_us;
  out.events.reserve(stream.events.size());
  for (const Event& e : stream.events) {
    if (e.t_us < window_us) out.events.push_back(e);
  }
  return out;
}

}  // namespace tasnn
