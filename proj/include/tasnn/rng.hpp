#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "tasnn/common.hpp"

namespace tasnn {

// mt19937_64 core with hand-rolled samplers so that draws are identical
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // unbiased integer in [0, n)
  std::uint64_t below(std::uint64_t n);

  // integer in [lo, hi], inclusive
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi);

  // [0, 1) with 53 random bits
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  // Box-Muller, no cached second value
  double normal();

  std::uint64_t poisson(double lambda);

 private:
  std::mt19937_64 eng_;
};

// Labeled seed derivation: one master seed, one stream per (label, indices).
std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0,
                          std::uint64_t c = 0);

}  // namespace tasnn
