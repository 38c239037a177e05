#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace simdrift {

/// 64-bit FNV-1a. Stable across platforms and releases; used to derive
/// per-trial random streams from string identifiers.
std::uint64_t stable_hash(std::string_view bytes) noexcept;

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ (mix64(value) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

/// Seeded random source. Only the raw mt19937_64 output is used (its
/// sequence is fixed by the standard), so every derived draw below is
/// reproducible across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t below(std::size_t n);

  /// Standard exponential variate.
  double exponential();

  /// Index drawn from an (approximately) normalized weight vector by
  /// inverse CDF. Falls back to the last positive entry on rounding.
  std::size_t categorical(std::span<const double> probs);

  /// Standard normal variate (Box-Muller, no caching).
  double normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace simdrift
