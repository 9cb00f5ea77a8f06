#include "tasnn/rng.hpp"

#include <cmath>

namespace tasnn {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw ConfigError("Rng::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

std::uint64_t Rng::between(std::uint64_t lo, std::uint64_t hi) {
  if (hi < lo) throw ConfigError("Rng::between: empty range");
  const std::uint64_t span = hi - lo;
  if (span == UINT64_MAX) return next_u64();
  return lo + below(span + 1);
}

double Rng::normal() {
  double u1;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t Rng::poisson(double lambda) {
  if (lambda < 0.0) throw ConfigError("Rng::poisson: negative rate");
  // multiplicative method, chunked so exp(-lambda) never underflows
  std::uint64_t k = 0;
  double remaining = lambda;
  double p = 1.0;
  while (true) {
    const double chunk = remaining > 500.0 ? 500.0 : remaining;
    const double floor_p = std::exp(-chunk);
    remaining -= chunk;
    while (true) {
      p *= uniform01();
      if (p <= floor_p) break;
      ++k;
    }
    if (remaining <= 0.0) break;
    p /= floor_p;
  }
  return k;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                          std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (const char ch : label) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  h = splitmix64(h ^ splitmix64(master));
  h = splitmix64(h ^ splitmix64(a));
  h = splitmix64(h ^ splitmix64(b));
  h = splitmix64(h ^ splitmix64(c));
  return h;
}

}  // namespace tasnn
