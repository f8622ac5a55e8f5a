#include "stoshield/random.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace stoshield {

namespace {

std::seed_seq make_seq(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto lo = [](std::uint64_t x) { return static_cast<std::uint32_t>(x & 0xffffffffu); };
  auto hi = [](std::uint64_t x) { return static_cast<std::uint32_t>(x >> 32); };
  return std::seed_seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(c), hi(c)};
}

double normal_quantile(double u) {
  static const boost::math::normal_distribution<double> z;
  u = std::clamp(u, 1e-300, 1.0 - 1e-16);
  return boost::math::quantile(z, u);
}

constexpr double kWalkFromZero = 40.0;

}  // namespace

KeyedStream::KeyedStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto seq = make_seq(seed, a, b, c);
  engine_.seed(seq);
}

std::uint64_t poisson_inverse(double u, double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson mean must be >= 0");
  if (mean == 0.0) return 0;
  if (mean < kWalkFromZero) {
    double p = std::exp(-mean);
    double F = p;
    std::uint64_t k = 0;
    while (u >= F) {
      ++k;
      p *= mean / static_cast<double>(k);
      if (p == 0.0 && static_cast<double>(k) > mean) break;  // tail underflow
      F += p;
    }
    return k;
  }
  // Start near the quantile, then walk with the pmf recurrence.
  const double guess = std::floor(mean + std::sqrt(mean) * normal_quantile(u));
  std::uint64_t k = static_cast<std::uint64_t>(std::max(0.0, guess));
  double F = boost::math::gamma_q(static_cast<double>(k) + 1.0, mean);  // P(X ≤ k)
  double p = std::exp(static_cast<double>(k) * std::log(mean) - mean -
                      std::lgamma(static_cast<double>(k) + 1.0));
  if (u >= F) {
    while (u >= F) {
      ++k;
      p *= mean / static_cast<double>(k);
      if (p == 0.0) break;
      F += p;
    }
  } else {
    while (k > 0 && u < F - p) {
      F -= p;
      p *= static_cast<double>(k) / mean;
      --k;
    }
  }
  return k;
}

std::uint64_t binomial_inverse(double u, std::uint64_t trials, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial probability must be in [0,1]");
  if (trials == 0 || p == 0.0) return 0;
  if (p == 1.0) return trials;
  if (p > 0.5) {
    // X = N − Y with Y ~ Binom(N, 1−p) drawn at 1−u keeps X monotone in u.
    return trials - binomial_inverse(1.0 - u, trials, 1.0 - p);
  }
  const double n = static_cast<double>(trials);
  const double ratio = p / (1.0 - p);
  const double mean = n * p;
  if (mean < kWalkFromZero) {
    double pk = std::exp(n * std::log1p(-p));
    double F = pk;
    std::uint64_t k = 0;
    while (u >= F && k < trials) {
      pk *= (n - static_cast<double>(k)) / static_cast<double>(k + 1) * ratio;
      ++k;
      F += pk;
      if (pk == 0.0 && static_cast<double>(k) > mean) break;
    }
    return k;
  }
  const double sd = std::sqrt(mean * (1.0 - p));
  const double guess = std::floor(mean + sd * normal_quantile(u));
  std::uint64_t k = static_cast<std::uint64_t>(std::clamp(guess, 0.0, n));
  auto cdf = [&](std::uint64_t j) {
    if (j >= trials) return 1.0;
    return boost::math::ibetac(static_cast<double>(j) + 1.0, n - static_cast<double>(j), p);
  };
  auto pmf = [&](std::uint64_t j) {
    const double jj = static_cast<double>(j);
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(jj + 1.0) - std::lgamma(n - jj + 1.0) +
                    jj * std::log(p) + (n - jj) * std::log1p(-p));
  };
  double F = cdf(k);
  double pk = pmf(k);
  if (u >= F) {
    while (u >= F && k < trials) {
      pk *= (n - static_cast<double>(k)) / static_cast<double>(k + 1) * ratio;
      ++k;
      F += pk;
      if (pk == 0.0) break;
    }
  } else {
    while (k > 0 && u < F - pk) {
      F -= pk;
      pk *= static_cast<double>(k) / ((n - static_cast<double>(k) + 1.0) * ratio);
      --k;
    }
  }
  return k;
}

}  // namespace stoshield
