#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace calm {

// SplitMix64 (Steele, Lea & Flood 2014): 64-bit state, Weyl increment
// 0x9E3779B97F4A7C15 followed by the variant-13 finalizer. The integer stream
// is identical on every platform. Distributions are implemented here instead
// of <random> because the standard distributions are not portable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return finalize(state_);
  }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Uniform in (0, 1].
  double uniform_open0() noexcept { return 1.0 - uniform(); }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() noexcept {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open0();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  /// Derives an independent seed for a sub-stream (class id, epoch, ...).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) noexcept {
    return finalize(seed ^ finalize(stream + 0x632BE59BD9B4E019ULL));
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace calm
