#pragma once

#include <cstdint>
#include <vector>

#include "tasnn/rng.hpp"
#include "tasnn/tensor.hpp"

namespace tasnn {

struct Event {
  std::uint32_t t_us = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;  // +1 on (brightness up), -1 off
};

struct EventStream {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t n_polarities = 2;  // 1 for position-only streams
  std::uint64_t duration_us = 0;
  std::vector<Event> events;  // nondecreasing in t, all t < duration_us

  // throws DataError naming the first offending event index
  void validate() const;
};

struct AggregationConfig {
  std::uint64_t dt_us = 1000;
  std::size_t T = 60;
  std::uint64_t t0_us = 0;

  std::uint64_t latency_us() const { return dt_us * T; }
  void validate() const;
};

// [T, C, H, W] tensor of per-window, per-polarity event counts.
struct FrameTensor {
  Tensor values;

  std::size_t T() const { return values.dim(0); }
  std::size_t C() const { return values.dim(1); }
  std::size_t H() const { return values.dim(2); }
  std::size_t W() const { return values.dim(3); }
  std::size_t frame_size() const { return C() * H() * W(); }
  real* frame(std::size_t t) { return values.data() + t * frame_size(); }
  const real* frame(std::size_t t) const {
    return values.data() + t * frame_size();
  }
};

// Counts events into T windows of dt_us starting at t0_us. Polarity +1 maps
// to channel 0, -1 to channel 1. Windows past the end of the stream simply
// stay zero.
FrameTensor aggregate(const EventStream& stream, const AggregationConfig& cfg);

// Aggregation with a uniformly random start in [0, duration - dt*T]
// (0 when the stream is shorter than one window).
FrameTensor rcs_sample(const EventStream& stream, std::uint64_t dt_us,
                       std::size_t T, Rng& rng);

// Start times of n crops of length dt*T: back-to-back from 0 when the stream
// is long enough, otherwise evenly spaced with the first at 0 and the last
// flush with the end. Throws DataError when duration < dt*T.
std::vector<std::uint64_t> crop_starts(std::uint64_t duration_us,
                                       std::uint64_t dt_us, std::size_t T,
                                       std::size_t n_crops);

std::vector<FrameTensor> test_crops(const EventStream& stream,
                                    std::uint64_t dt_us, std::size_t T,
                                    std::size_t n_crops = 10);

// Drops events at or past window_us and fixes the duration to window_us
// (short streams are padded implicitly: the empty tail aggregates to zeros).
EventStream pad_or_cut(const EventStream& stream, std::uint64_t window_us);

}  // namespace tasnn
