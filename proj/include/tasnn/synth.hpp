#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "tasnn/trainer.hpp"

namespace tasnn {

// class-specific sweep of a bright bar across the field
struct MotionSpec {
  double angle_rad = 0;        // sweep direction
  double speed_px_per_ms = 1;  // bar speed
  bool oscillate = false;      // bounce instead of wrapping around
};

struct SynthConfig {
  std::size_t width = 32;
  std::size_t height = 32;
  std::size_t n_classes = 3;
  std::size_t samples_per_class = 150;
  std::uint64_t duration_us = 200000;
  // (start, length) intervals carrying the class-informative motion; events
  // outside them are pure Poisson noise
  std::vector<std::pair<std::uint64_t, std::uint64_t>> signal_windows;
  double noise_rate_per_pixel_us = 2e-6;
  std::vector<MotionSpec> motions;  // one per class
  std::size_t bar_length = 12;
  std::size_t bar_width = 2;
  std::uint64_t seed = 1;

  // default: evenly spread classes on the circle, periodic 25 ms signal
  // windows covering half the duration
  static SynthConfig defaults();
  void validate() const;
};

// Deterministic in (seed, sample index). The bar's leading edge emits +1
// events, the trailing edge -1.
std::vector<Sample> generate(const SynthConfig& cfg);

// class-stratified, seed-deterministic index split
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    const std::vector<int>& labels, double train_fraction, std::uint64_t seed);

std::pair<Dataset, Dataset> make_split_dataset(const SynthConfig& cfg,
                                               double train_fraction);

}  // namespace tasnn
