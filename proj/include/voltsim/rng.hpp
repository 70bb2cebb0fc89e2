#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

// Counter-based randomness. Every random quantity in the simulator is a pure
// function of explicit keys, so serial and parallel schedules agree bit for bit.

namespace voltsim::rng {

constexpr std::uint64_t Mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Folds a sequence of keys into one 64-bit value.
constexpr std::uint64_t Derive(std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t k : keys) h = Mix64(h ^ Mix64(k));
  return h;
}

// Maps 64 random bits to [0, 1) with 53-bit resolution.
inline double ToUnit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

inline double Hash01(std::initializer_list<std::uint64_t> keys) {
  return ToUnit(Derive(keys));
}

// SplitMix64 stream seeded from a derived key.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t NextU64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  double Uniform() { return ToUnit(NextU64()); }

  // Uniform integer in [0, n). Lemire's multiply-shift with rejection.
  std::uint64_t Below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const unsigned __int128 m =
          static_cast<unsigned __int128>(NextU64()) * n;
      if (static_cast<std::uint64_t>(m) >= threshold) {
        return static_cast<std::uint64_t>(m >> 64);
      }
    }
  }

  double Normal() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Marsaglia-Tsang; mean = shape * scale.
  double Gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double u = Uniform();
      return Gamma(shape + 1.0, scale) * std::pow(u > 0 ? u : 1e-300, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = Normal();
      double v = 1.0 + c * x;
      if (v <= 0) continue;
      v = v * v * v;
      const double u = Uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v * scale;
      }
    }
  }

  // Geometric on {1, 2, ...} with the given mean (>= 1).
  std::uint64_t GeometricPositive(double mean) {
    if (mean <= 1.0) return 1;
    const double p = 1.0 / mean;
    double u = Uniform();
    while (u <= 0.0) u = Uniform();
    return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
  }

 private:
  std::uint64_t state_;
};

}  // namespace voltsim::rng
