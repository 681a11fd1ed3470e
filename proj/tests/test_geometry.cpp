#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "helpers.hpp"

using namespace mmr;
using namespace testing_helpers;

namespace {

std::vector<std::size_t> all_rows(const Matrix& m) {
  std::vector<std::size_t> r(m.rows);
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

Matrix random_points(Rng& rng, std::size_t n, std::size_t d, double scale = 1.0) {
  Matrix m(n, d);
  for (double& x : m.data) x = scale * rng.normal();
  return m;
}

// Two identity encoders of width 1, so the bottleneck is the plane.
FusionModel planar_model(Mlp head) {
  FusionModel m = linear_model(1, 1, 2, Vector(4, 0.0), Vector(2, 0.0));
  m.head = std::move(head);
  return m;
}

// Class 0 wherever |x| + |y| > 1.5, class 1 near the origin.
FusionModel diamond_hole_head() {
  Layer folds = affine(2, 4, {1, 0, -1, 0, 0, 1, 0, -1}, Vector(4, 0.0), Activation::Relu);
  Layer out = affine(4, 2, {1, 1, 1, 1, 0, 0, 0, 0}, {-1.5, 0.0});
  return planar_model({folds, out});
}

Matrix ring(std::size_t n, double r) {
  Matrix m(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    m(i, 0) = r * std::cos(a);
    m(i, 1) = r * std::sin(a);
  }
  return m;
}

}  // namespace

TEST(BallVolume, Examples) {
  EXPECT_NEAR(ball_log_volume(2, NormKind::L2, 1.0), std::log(std::numbers::pi), 1e-9);
  EXPECT_NEAR(ball_log_volume(3, NormKind::LInf, 1.0), std::log(8.0), 1e-9);
  EXPECT_NEAR(ball_log_volume(1, NormKind::L1, 2.0), std::log(4.0), 1e-9);
  EXPECT_NEAR(ball_log_volume(3, NormKind::L2, 1.0), std::log(4.0 * std::numbers::pi / 3.0), 1e-9);
  EXPECT_NEAR(ball_log_volume(3, NormKind::L1, 1.0), std::log(8.0 / 6.0), 1e-9);
  EXPECT_THROW(ball_log_volume(2, NormKind::L2, 0.0), DomainError);
  EXPECT_THROW(ball_log_volume(0, NormKind::L2, 1.0), DomainError);
}

TEST(BallVolume, MatchesMonteCarlo) {
  Rng rng(21);
  const double R = 1.3;
  const int n = 1000000;
  for (std::size_t d = 1; d <= 3; ++d)
    for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf}) {
      // hit rate in the bounding cube [-R, R]^d
      Vector x(d);
      int hits = 0;
      for (int k = 0; k < n; ++k) {
        for (double& v : x) v = rng.uniform(-R, R);
        hits += lp_norm(x, p) <= R;
      }
      const double mc = std::pow(2.0 * R, static_cast<double>(d)) * hits / n;
      EXPECT_NEAR(std::exp(ball_log_volume(d, p, R)) / mc, 1.0, 0.02) << d << " " << to_string(p);
    }
}

TEST(Centroid, Examples) {
  const Matrix two = matrix_from_rows({{0, 0}, {2, 0}});
  EXPECT_EQ(class_centroid(two), (Vector{1, 0}));
  EXPECT_EQ(class_centroid(matrix_from_rows({{3, -4, 5}})), (Vector{3, -4, 5}));
  EXPECT_THROW(class_centroid(Matrix(0, 2)), EmptyInputError);
}

TEST(Centroid, MatchesLongDoubleMean) {
  Rng rng(22);
  for (int t = 0; t < 20; ++t) {
    const Matrix m = random_points(rng, 10, 4, 100.0);
    const Vector c = class_centroid(m);
    for (std::size_t j = 0; j < 4; ++j) {
      long double s = 0;
      for (std::size_t i = 0; i < 10; ++i) s += m(i, j);
      EXPECT_NEAR(c[j], static_cast<double>(s / 10), 1e-12);
    }
  }
}

TEST(Radii, Examples) {
  const Matrix two = matrix_from_rows({{0, 0}, {2, 0}});
  const auto rows2 = all_rows(two);
  EXPECT_EQ(class_radii(two, rows2, Vector{1, 0}, NormKind::L2, 0.8).full, 1.0);

  const Matrix one = matrix_from_rows({{5, 5}});
  const auto rows1 = all_rows(one);
  const ClassRadii r1 = class_radii(one, rows1, Vector{5, 5}, NormKind::L2, 0.6);
  EXPECT_EQ(r1.full, 0.0);
  EXPECT_EQ(r1.tau, 0.0);

  Matrix line(10, 2);
  for (std::size_t i = 0; i < 10; ++i) line(i, 0) = static_cast<double>(i + 1);
  const auto rows = all_rows(line);
  const ClassRadii r = class_radii(line, rows, Vector{0, 0}, NormKind::L2, 0.6);
  EXPECT_EQ(r.full, 10.0);
  EXPECT_EQ(r.tau, 6.0);
  EXPECT_EQ(r.n_tau, 6u);
  EXPECT_THROW(class_radii(line, rows, Vector{0, 0}, NormKind::L2, 1.0), DomainError);
  EXPECT_THROW(class_radii(line, {}, Vector{0, 0}, NormKind::L2, 0.5), EmptyInputError);
}

TEST(Density, LineExample) {
  const double want = 4.0 / (2.0 * std::log(10.0 / 6.0));
  EXPECT_NEAR(want, 3.9152, 1e-4);
  const DensityInputs in{10, 6, 2, NormKind::L2, 10.0, 6.0};
  EXPECT_NEAR(density_metric(in), want, 1e-12);
  // full volume form, evaluated directly as pi R^2
  const double full = 4.0 / (std::log(std::numbers::pi * 100.0) - std::log(std::numbers::pi * 36.0));
  EXPECT_NEAR(density_metric(in), full, 1e-12);
}

TEST(Density, DegenerateShells) {
  EXPECT_THROW(density_metric({10, 6, 2, NormKind::L2, 3.0, 3.0}), DegenerateShellError);
  EXPECT_THROW(density_metric({10, 6, 2, NormKind::L2, 3.0, 0.0}), DegenerateShellError);
  // equidistant points leave rho undefined rather than throwing
  const Matrix pts = matrix_from_rows({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
  const Matrix labels = matrix_from_rows({{1, 0}, {1, 0}, {1, 0}, {1, 0}});
  const ClassGeometry g = class_geometry(diamond_hole_head(), pts, labels, 0, {});
  EXPECT_FALSE(g.rho.has_value());
}

TEST(Density, ScaleAndPermutationInvariant) {
  Rng rng(23);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf}) {
    Matrix pts = random_points(rng, 40, 3);
    Matrix labels(40, 1, 1.0);
    FusionModel head = linear_model(1, 2, 1, Vector(3, 0.0), Vector(1, 0.0));
    GeometryConfig cfg;
    cfg.norm = p;
    cfg.n_convexity = 10;
    const double base = *class_geometry(head, pts, labels, 0, cfg).rho;
    Matrix big = pts;
    for (double& x : big.data) x *= 10.0;
    EXPECT_NEAR(*class_geometry(head, big, labels, 0, cfg).rho / base, 1.0, 1e-9);
    Matrix perm(40, 3);
    for (std::size_t i = 0; i < 40; ++i)
      for (std::size_t j = 0; j < 3; ++j) perm(i, j) = pts((i * 7) % 40, j);
    EXPECT_NEAR(*class_geometry(head, perm, labels, 0, cfg).rho / base, 1.0, 1e-9);
  }
}

TEST(Convexity, SinglePointAndLinearHead) {
  const FusionModel lin = linear_model(1, 1, 2, {1, 1, -1, -1}, {0, 0});
  const Matrix one = matrix_from_rows({{1, 2}});
  const auto rows1 = all_rows(one);
  EXPECT_EQ(convexity_metric(lin, one, rows1, 0, 2000, 5), 1.0);

  Rng rng(24);
  Matrix pts(60, 2);
  for (std::size_t i = 0; i < 60; ++i) {
    pts(i, 0) = rng.uniform(0.6, 3.0);
    pts(i, 1) = rng.uniform(-0.5, 3.0);
  }
  const auto rows = all_rows(pts);
  for (std::size_t i : rows) ASSERT_TRUE(predicts_class(lin.loss_kind, head_logits(lin, pts.row(i)), 0));
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_EQ(convexity_metric(lin, pts, rows, 0, 2000, seed), 1.0);
}

TEST(Convexity, RingAroundAHoleIsNotConvex) {
  const FusionModel m = diamond_hole_head();
  const Matrix pts = ring(50, 2.0);
  const auto rows = all_rows(pts);
  const double k = convexity_metric(m, pts, rows, 0, 2000, 3);
  EXPECT_GT(k, 0.2);
  EXPECT_LT(k, 0.9);
}

TEST(Convexity, MatchesIndependentSampler) {
  Rng prng(25);
  FusionModel m = diamond_hole_head();
  for (Layer& l : m.head)
    for (double& w : l.weight) w += 0.3 * prng.normal();
  const Matrix pts = random_points(prng, 30, 2, 2.0);
  const std::vector<std::size_t> rows{0, 3, 4, 9, 10, 17, 22, 29};
  for (std::size_t cls : {0u, 1u}) {
    const std::uint64_t seed = 77;
    Rng rng(derive_seed(seed, cls));
    int inside = 0;
    for (int k = 0; k < 500; ++k) {
      const std::size_t i = rows[rng.index(rows.size())];
      const std::size_t j = rows[rng.index(rows.size())];
      const double th = rng.uniform();
      const Vector x{th * pts(i, 0) + (1 - th) * pts(j, 0), th * pts(i, 1) + (1 - th) * pts(j, 1)};
      const Vector z = mlp_forward(m.head, x);
      inside += argmax(z) == cls;
    }
    EXPECT_EQ(convexity_metric(m, pts, rows, cls, 500, seed), inside / 500.0);
  }
  EXPECT_THROW(convexity_metric(m, pts, {}, 0, 10, 1), EmptyInputError);
  EXPECT_THROW(convexity_metric(m, pts, rows, 0, 0, 1), DomainError);
}

TEST(ClassGeometry, InvariantsAndDeterminism) {
  const FusionModel model = small_model(26);
  Rng rng(27);
  Dataset d{{}, 3, 3, 3, false};
  for (int i = 0; i < 90; ++i) d.samples.push_back(random_sample(rng, 3, 3, 3, i % 3));
  const Embeddings emb = extract_bottleneck(model, d);
  GeometryConfig cfg;
  cfg.seed = 4;
  const auto a = all_class_geometry(model, emb, cfg);
  const auto b = all_class_geometry(model, emb, cfg);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t c = 0; c < 3; ++c) {
    const ClassGeometry& g = a[c];
    EXPECT_EQ(g.n_c, 30u);
    EXPECT_LE(g.R_tau, g.R_full);
    EXPECT_LE(g.n_tau, g.n_c);
    EXPECT_EQ(g.inner_members.size(), g.n_tau);
    EXPECT_GE(g.n_tau, static_cast<std::size_t>(std::ceil(0.8 * 30)));
    EXPECT_GE(g.kappa, 0.0);
    EXPECT_LE(g.kappa, 1.0);
    EXPECT_EQ(g.kappa, b[c].kappa);
    EXPECT_EQ(g.rho, b[c].rho);
  }
}
