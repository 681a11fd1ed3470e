#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>

#include "mmr/numerics.hpp"

namespace mmr {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent stream derived from (seed, stream id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Seeded generator whose derived draws do not depend on the standard
/// library's distribution implementations, so streams are reproducible
/// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform index in [0, n), n > 0 (rejection sampling, unbiased).
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Standard normal (Box-Muller, no cached second value).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double exponential() {
    double u = uniform();
    while (u <= 0.0) u = uniform();
    return -std::log(u);
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 uses the boost
  /// Gamma(shape + 1) * U^(1/shape).
  double gamma(double shape) {
    if (shape < 1.0) {
      double u = uniform();
      while (u <= 0.0) u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    while (true) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

/// Uniform draw from the l_p ball of radius eps in `dim` dimensions.
inline Vector uniform_in_ball(Rng& rng, std::size_t dim, NormKind p, double eps) {
  Vector r(dim, 0.0);
  if (eps == 0.0 || dim == 0) return r;
  switch (p) {
    case NormKind::LInf:
      for (double& x : r) x = rng.uniform(-eps, eps);
      break;
    case NormKind::L2: {
      for (double& x : r) x = rng.normal();
      const double n = lp_norm(r, NormKind::L2);
      const double radius = eps * std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
      for (double& x : r) x *= (n > 0.0 ? radius / n : 0.0);
      break;
    }
    case NormKind::L1: {
      // signed exponentials normalised with one extra exponential slack term
      double total = 0.0;
      for (double& x : r) {
        x = rng.exponential();
        total += x;
        if (rng.uniform() < 0.5) x = -x;
      }
      total += rng.exponential();
      for (double& x : r) x *= eps / total;
      break;
    }
  }
  return lp_project(r, p, eps);
}

}  // namespace mmr
