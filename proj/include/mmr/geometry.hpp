#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mmr/errors.hpp"
#include "mmr/models.hpp"
#include "mmr/numerics.hpp"
#include "mmr/parallel.hpp"
#include "mmr/random.hpp"

namespace mmr {

/// Class-wise robustness summary over bottleneck embeddings.
struct ClassGeometry {
  std::size_t class_id = 0;
  std::size_t n_c = 0;
  Vector centroid;
  double R_full = 0.0;
  double R_tau = 0.0;
  double tau = 0.8;
  std::size_t n_tau = 0;
  NormKind norm = NormKind::L2;
  /// Outer-shell density; empty when the shell is degenerate.
  std::optional<double> rho;
  double kappa = 0.0;
  std::size_t n_convexity = 0;
  /// Embedding rows within R_tau of the centroid.
  std::vector<std::size_t> inner_members;
};

/// Rows of `labels` belonging to class c (label entry >= 0.5).
inline std::vector<std::size_t> class_members(const Matrix& labels, std::size_t c) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.rows; ++i)
    if (labels(i, c) >= 0.5) rows.push_back(i);
  return rows;
}

inline Vector class_centroid(const Matrix& points, std::span<const std::size_t> rows) {
  if (rows.empty()) throw EmptyInputError("centroid of an empty class");
  Vector c(points.cols, 0.0);
  for (std::size_t r : rows) axpy(1.0, points.row(r), c);
  for (double& x : c) x /= static_cast<double>(rows.size());
  return c;
}

inline Vector class_centroid(const Matrix& points) {
  std::vector<std::size_t> rows(points.rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return class_centroid(points, rows);
}

struct ClassRadii {
  double full = 0.0;
  double tau = 0.0;
  std::size_t n_tau = 0;
};

inline Vector centroid_distances(const Matrix& points, std::span<const std::size_t> rows,
                                 ConstSpan centroid, NormKind p) {
  Vector d(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) d[k] = lp_norm(sub(points.row(rows[k]), centroid), p);
  return d;
}

/// Maximum and tau-quantile distances to the centroid. n_tau counts the
/// samples at distance <= R_tau, so ties at the quantile radius sit inside
/// the inner ball.
inline ClassRadii class_radii(const Matrix& points, std::span<const std::size_t> rows, ConstSpan centroid,
                              NormKind p, double tau) {
  if (rows.empty()) throw EmptyInputError("radii of an empty class");
  if (!(tau > 0.0 && tau < 1.0)) throw DomainError("tau must lie in (0, 1)");
  const Vector d = centroid_distances(points, rows, centroid, p);
  ClassRadii r;
  r.full = *std::max_element(d.begin(), d.end());
  r.tau = quantile(d, tau);
  r.n_tau = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [&](double x) { return x <= r.tau; }));
  return r;
}

/// 1/p for the supported norms (LInf -> 0).
inline double inverse_exponent(NormKind p) {
  switch (p) {
    case NormKind::L1: return 1.0;
    case NormKind::L2: return 0.5;
    case NormKind::LInf: return 0.0;
  }
  return 0.0;
}

/// log of the volume of the d-dimensional l_p ball of radius R:
/// d log(2 Gamma(1/p + 1) R) - log Gamma(d/p + 1).
inline double ball_log_volume(std::size_t d, NormKind p, double R) {
  if (d == 0) throw DomainError("ball dimension must be positive");
  if (!(R > 0.0)) throw DomainError("ball radius must be positive");
  const double inv_p = inverse_exponent(p);
  const double dd = static_cast<double>(d);
  return dd * (std::log(2.0) + log_gamma(inv_p + 1.0) + std::log(R)) - log_gamma(dd * inv_p + 1.0);
}

struct DensityInputs {
  std::size_t n_c = 0;
  std::size_t n_tau = 0;
  std::size_t d = 0;
  NormKind p = NormKind::L2;
  double R_full = 0.0;
  double R_tau = 0.0;
};

/// Outer-crust density: samples beyond R_tau per unit of log-volume between
/// the R_tau and R_full balls.
inline double density_metric(const DensityInputs& in) {
  if (!(in.R_tau > 0.0)) throw DegenerateShellError("inner radius is zero");
  if (!(in.R_full > in.R_tau)) throw DegenerateShellError("outer and inner radii coincide");
  const double shell = ball_log_volume(in.d, in.p, in.R_full) - ball_log_volume(in.d, in.p, in.R_tau);
  return static_cast<double>(in.n_c - in.n_tau) / shell;
}

/// Fraction of n random segment points between class embeddings that the
/// fusion head assigns to class_id. Endpoints are drawn uniformly with
/// replacement from `rows`; the random stream is derived from
/// (seed, class_id).
inline double convexity_metric(const FusionModel& model, const Matrix& points, std::span<const std::size_t> rows,
                               std::size_t class_id, std::size_t n, std::uint64_t seed) {
  if (rows.empty()) throw EmptyInputError("convexity of an empty class");
  if (n == 0) throw DomainError("convexity needs at least one sample point");
  if (points.cols != model.bottleneck_dim()) throw ShapeError("embedding dimension does not match head");
  Rng rng(derive_seed(seed, class_id));
  std::size_t inside = 0;
  Vector x(points.cols);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = rows[rng.index(rows.size())];
    const std::size_t j = rows[rng.index(rows.size())];
    const double theta = rng.uniform();
    const ConstSpan a = points.row(i), b = points.row(j);
    for (std::size_t c = 0; c < x.size(); ++c) x[c] = theta * a[c] + (1.0 - theta) * b[c];
    if (predicts_class(model.loss_kind, mlp_forward(model.head, x), class_id)) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(n);
}

struct GeometryConfig {
  NormKind norm = NormKind::L2;
  double tau = 0.8;
  std::size_t n_convexity = 2000;
  std::uint64_t seed = 0;
};

inline ClassGeometry class_geometry(const FusionModel& model, const Matrix& points, const Matrix& labels,
                                    std::size_t class_id, const GeometryConfig& cfg) {
  ClassGeometry g;
  g.class_id = class_id;
  g.tau = cfg.tau;
  g.norm = cfg.norm;
  g.n_convexity = cfg.n_convexity;
  const std::vector<std::size_t> rows = class_members(labels, class_id);
  g.n_c = rows.size();
  g.centroid = class_centroid(points, rows);
  const ClassRadii r = class_radii(points, rows, g.centroid, cfg.norm, cfg.tau);
  g.R_full = r.full;
  g.R_tau = r.tau;
  g.n_tau = r.n_tau;
  if (r.tau > 0.0 && r.full > r.tau)
    g.rho = density_metric({g.n_c, g.n_tau, points.cols, cfg.norm, r.full, r.tau});
  const Vector d = centroid_distances(points, rows, g.centroid, cfg.norm);
  for (std::size_t k = 0; k < rows.size(); ++k)
    if (d[k] <= g.R_tau) g.inner_members.push_back(rows[k]);
  g.kappa = convexity_metric(model, points, rows, class_id, cfg.n_convexity, cfg.seed);
  return g;
}

/// Geometry for every class that has at least one member, in class order.
inline std::vector<ClassGeometry> all_class_geometry(const FusionModel& model, const Embeddings& emb,
                                                     const GeometryConfig& cfg) {
  const std::size_t k = emb.labels.cols;
  std::vector<std::optional<ClassGeometry>> slots(k);
  parallel_for(k, [&](std::size_t c) {
    if (!class_members(emb.labels, c).empty()) slots[c] = class_geometry(model, emb.points, emb.labels, c, cfg);
  });
  std::vector<ClassGeometry> out;
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

}  // namespace mmr
