#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace annoloop {

/// FNV-1a, 64-bit. Stable across platforms; used for seed derivation.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Sub-seed for a named role: `seed XOR fnv1a64(role)`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view role) noexcept {
  return seed ^ fnv1a64(role);
}

/// Portable random stream. The engine is std::mt19937_64, whose output is
/// fixed by the standard; all distributions are implemented here so that the
/// drawn values do not depend on the standard library vendor.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Centered noise, uniform in [-scale, scale).
  double centered(double scale) { return scale * (2.0 * uniform01() - 1.0); }

  /// Uniform integer in [0, bound) by rejection sampling; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

 private:
  std::mt19937_64 engine_;
};

/// Poisson(mean) by CDF inversion of a single uniform `u` in [0,1). Using
/// one uniform per draw keeps the count monotone in `mean` for a fixed u.
inline std::uint64_t poisson_from_uniform(double mean, double u) {
  if (!(mean > 0.0)) return 0;
  double p = std::exp(-mean);
  double cdf = p;
  std::uint64_t k = 0;
  while (u >= cdf && k < 10000) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p == 0.0 && cdf < u) break;
  }
  return k;
}

}  // namespace annoloop

namespace annoloop {

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace annoloop
