#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmr/errors.hpp"

namespace mmr {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;
using MutSpan = std::span<double>;

enum class NormKind { L1, L2, LInf };

inline std::string_view to_string(NormKind p) {
  switch (p) {
    case NormKind::L1: return "l1";
    case NormKind::L2: return "l2";
    case NormKind::LInf: return "linf";
  }
  return "?";
}

inline NormKind parse_norm(std::string_view s) {
  if (s == "l1" || s == "L1") return NormKind::L1;
  if (s == "l2" || s == "L2") return NormKind::L2;
  if (s == "linf" || s == "Linf" || s == "LInf" || s == "inf") return NormKind::LInf;
  throw DomainError("unknown norm '" + std::string(s) + "'");
}

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  MutSpan row(std::size_t r) { return {data.data() + r * cols, cols}; }
  ConstSpan row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool empty() const { return rows == 0; }
};

inline bool all_finite(ConstSpan v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void require_finite(ConstSpan v, const char* what) {
  if (!all_finite(v)) throw DomainError(std::string(what) + " contains a non-finite value");
}

inline double dot(ConstSpan a, ConstSpan b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// y += a * x
inline void axpy(double a, ConstSpan x, MutSpan y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline Vector add(ConstSpan a, ConstSpan b) {
  Vector r(a.begin(), a.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += b[i];
  return r;
}

inline Vector sub(ConstSpan a, ConstSpan b) {
  Vector r(a.begin(), a.end());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

inline Vector scaled(ConstSpan a, double c) {
  Vector r(a.begin(), a.end());
  for (double& x : r) x *= c;
  return r;
}

inline Vector concat(ConstSpan a, ConstSpan b) {
  Vector r;
  r.reserve(a.size() + b.size());
  r.insert(r.end(), a.begin(), a.end());
  r.insert(r.end(), b.begin(), b.end());
  return r;
}

inline std::size_t argmax(ConstSpan v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline double lp_norm(ConstSpan v, NormKind p) {
  switch (p) {
    case NormKind::L1: {
      double s = 0.0;
      for (double x : v) s += std::abs(x);
      return s;
    }
    case NormKind::L2: {
      // scaled accumulation keeps tiny and huge gradients representable
      double scale = 0.0;
      for (double x : v) scale = std::max(scale, std::abs(x));
      if (scale == 0.0) return 0.0;
      double s = 0.0;
      for (double x : v) {
        const double r = x / scale;
        s += r * r;
      }
      return scale * std::sqrt(s);
    }
    case NormKind::LInf: {
      double m = 0.0;
      for (double x : v) m = std::max(m, std::abs(x));
      return m;
    }
  }
  return 0.0;
}

namespace detail {

// Sorted simplex projection onto the l1 ball (Duchi et al. style).
inline Vector project_l1(ConstSpan v, double eps) {
  Vector mag(v.size());
  std::transform(v.begin(), v.end(), mag.begin(), [](double x) { return std::abs(x); });
  Vector sorted = mag;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    cumulative += sorted[j];
    const double candidate = (cumulative - eps) / static_cast<double>(j + 1);
    if (sorted[j] - candidate > 0.0) theta = candidate;
  }
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = std::max(mag[i] - theta, 0.0);
    r[i] = std::copysign(m, v[i]);
  }
  return r;
}

}  // namespace detail

/// Euclidean projection onto {r : ||r||_p <= eps}. Inputs already inside the
/// ball are returned unchanged.
inline Vector lp_project(ConstSpan v, NormKind p, double eps) {
  if (!(eps >= 0.0)) throw BudgetError("projection radius must be non-negative");
  const double n = lp_norm(v, p);
  if (n <= eps) return Vector(v.begin(), v.end());
  if (eps == 0.0) return Vector(v.size(), 0.0);
  Vector r;
  switch (p) {
    case NormKind::L2: r = scaled(v, eps / n); break;
    case NormKind::LInf:
      r.assign(v.begin(), v.end());
      for (double& x : r) x = std::clamp(x, -eps, eps);
      break;
    case NormKind::L1: r = detail::project_l1(v, eps); break;
  }
  // rounding can leave the result a few ulps outside
  const double rn = lp_norm(r, p);
  if (rn > eps) {
    const double shrink = eps / rn;
    for (double& x : r) x *= shrink;
  }
  return r;
}

/// Natural log of the Gamma function for x > 0 (Lanczos, g = 7, 9 terms).
inline double log_gamma(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("log_gamma requires a finite x > 0");
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) {
    // reflection: Gamma(x) Gamma(1 - x) = pi / sin(pi x)
    return std::log(std::numbers::pi / std::sin(std::numbers::pi * x)) - log_gamma(1.0 - x);
  }
  static constexpr double kCoef[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double g = 7.0;
  const double z = x - 1.0;
  double series = kCoef[0];
  for (int i = 1; i < 9; ++i) series += kCoef[i] / (z + static_cast<double>(i));
  const double t = z + g + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(series);
}

/// Ceil-rank order statistic: the element at rank ceil(tau * n) of the
/// ascending sort, with rank clamped to [1, n].
inline double quantile(ConstSpan values, double tau) {
  if (values.empty()) throw EmptyInputError("quantile of an empty sequence");
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("quantile level must lie in [0, 1]");
  const std::size_t n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(tau * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  Vector v(values.begin(), values.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile. Acklam's rational approximation followed by one
/// Halley refinement against erfc.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -HUGE_VAL;
    if (p == 1.0) return HUGE_VAL;
    throw DomainError("normal_quantile requires p in [0, 1]");
  }
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace mmr
