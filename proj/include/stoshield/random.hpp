#pragma once

#include <cstdint>
#include <random>

namespace stoshield {

/// Independent stream keyed by (seed, a, b, c). The engine is seeded through
/// std::seed_seq so any key tuple gives a reproducible, decorrelated stream.
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal() { return normal_(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Stream domains, so OU noise and population draws never share a key.
enum class StreamDomain : std::uint64_t { OU = 1, Population = 2, Ensemble = 3, Ssa = 4, Signs = 5, Graded = 6 };

/// Smallest k with P(X ≤ k) > u for X ~ Poisson(mean). Monotone in u, which
/// is what couples paired runs drawing from a common uniform.
std::uint64_t poisson_inverse(double u, double mean);

/// Smallest k with P(X ≤ k) > u for X ~ Binomial(trials, p).
std::uint64_t binomial_inverse(double u, std::uint64_t trials, double p);

}  // namespace stoshield
