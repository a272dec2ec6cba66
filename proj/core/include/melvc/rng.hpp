// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace melvc {

/// Seeded generator whose real-valued draws are defined here rather than by
/// the standard library distributions, so sequences are identical across
/// toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless 64-bit mixer (splitmix64 finalizer); used for counter-based randomness.
std::uint64_t mix64(std::uint64_t x);

/// Uniform in [0,1) as a pure function of (seed, a, b).
double hash_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace melvc
