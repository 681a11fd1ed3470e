#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "helpers.hpp"

using namespace mmr;
using testing_helpers::random_vector;

TEST(LpNorm, Examples) {
  EXPECT_DOUBLE_EQ(lp_norm(Vector{3, 4}, NormKind::L2), 5.0);
  EXPECT_DOUBLE_EQ(lp_norm(Vector{0, 0, 0}, NormKind::L1), 0.0);
  EXPECT_DOUBLE_EQ(lp_norm(Vector{-1, 0.5}, NormKind::LInf), 1.0);
}

TEST(LpNorm, HomogeneousAndOverflowSafe) {
  Rng rng(1);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf})
    for (int k = 0; k < 200; ++k) {
      const Vector v = random_vector(rng, 1 + rng.index(9));
      const double c = rng.uniform(0.0, 10.0);
      EXPECT_NEAR(lp_norm(scaled(v, c), p), c * lp_norm(v, p), 1e-12 * (1 + c * lp_norm(v, p)));
    }
  EXPECT_DOUBLE_EQ(lp_norm(Vector{3e200, 4e200}, NormKind::L2), 5e200);
  EXPECT_DOUBLE_EQ(lp_norm(Vector{3e-200, 4e-200}, NormKind::L2), 5e-200);
}

TEST(LpProject, Examples) {
  const Vector in = lp_project(Vector{0.03, 0.04}, NormKind::L2, 0.1);
  EXPECT_EQ(in, (Vector{0.03, 0.04}));
  const Vector radial = lp_project(Vector{3, 4}, NormKind::L2, 1.0);
  EXPECT_NEAR(radial[0], 0.6, 1e-15);
  EXPECT_NEAR(radial[1], 0.8, 1e-15);
  EXPECT_EQ(lp_project(Vector{0.5, -0.2}, NormKind::LInf, 0.1), (Vector{0.1, -0.1}));
  EXPECT_EQ(lp_project(Vector{1, -2}, NormKind::L1, 0.0), (Vector{0, 0}));
  EXPECT_THROW(lp_project(Vector{1}, NormKind::L2, -1.0), BudgetError);
}

namespace {

// l1 projection by bisection on the soft-threshold level.
Vector l1_projection_oracle(const Vector& v, double eps) {
  if (lp_norm(v, NormKind::L1) <= eps) return v;
  double lo = 0.0, hi = lp_norm(v, NormKind::LInf);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    double s = 0.0;
    for (double x : v) s += std::max(std::abs(x) - mid, 0.0);
    (s > eps ? lo : hi) = mid;
  }
  Vector r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = std::copysign(std::max(std::abs(v[i]) - hi, 0.0), v[i]);
  return r;
}

}  // namespace

TEST(LpProject, L1MatchesThresholdBisection) {
  Rng rng(2);
  for (int k = 0; k < 500; ++k) {
    const Vector v = random_vector(rng, 1 + rng.index(12), 2.0);
    const double eps = rng.uniform(0.01, 3.0);
    const Vector got = lp_project(v, NormKind::L1, eps);
    const Vector want = l1_projection_oracle(v, eps);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9);
  }
}

TEST(LpProject, FeasibleIdempotentAndNearest) {
  Rng rng(3);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf})
    for (int k = 0; k < 300; ++k) {
      const Vector v = random_vector(rng, 1 + rng.index(10), 3.0);
      const double eps = rng.uniform(0.0, 2.0);
      const Vector r = lp_project(v, p, eps);
      EXPECT_LE(lp_norm(r, p), eps + 1e-12);
      const Vector rr = lp_project(r, p, eps);
      for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(rr[i], r[i], 1e-12);
      // no feasible point is closer in l2
      const double best = lp_norm(sub(v, r), NormKind::L2);
      for (int t = 0; t < 10; ++t) {
        const Vector z = uniform_in_ball(rng, v.size(), p, eps);
        EXPECT_LE(best, lp_norm(sub(v, z), NormKind::L2) + 1e-9);
      }
    }
}

TEST(LogGamma, Examples) {
  EXPECT_DOUBLE_EQ(log_gamma(1.0), 0.0);
  EXPECT_NEAR(log_gamma(0.5), 0.5723649429247001, 1e-12);
  EXPECT_NEAR(log_gamma(5.0), std::log(24.0), 1e-12);
  EXPECT_THROW(log_gamma(0.0), DomainError);
  EXPECT_THROW(log_gamma(-1.0), DomainError);
}

TEST(LogGamma, MatchesStdAndRecurrence) {
  for (double x = 0.01; x < 200.0; x *= 1.07) EXPECT_NEAR(log_gamma(x), std::lgamma(x), 1e-11 * (1 + std::abs(std::lgamma(x))));
  for (double x = 0.5; x <= 50.0; x += 0.25) EXPECT_NEAR(log_gamma(x + 1.0) - log_gamma(x), std::log(x), 1e-9);
}

TEST(Quantile, Examples) {
  const Vector v{1, 2, 3, 4, 5};
  EXPECT_EQ(quantile(v, 1.0), 5);
  EXPECT_EQ(quantile(v, 0.6), 3);
  EXPECT_EQ(quantile(Vector{7}, 0.5), 7);
  EXPECT_EQ(quantile(v, 0.0), 1);
  EXPECT_THROW(quantile(Vector{}, 0.5), EmptyInputError);
  EXPECT_THROW(quantile(v, 1.5), DomainError);
}

TEST(Quantile, MatchesSortAndIndex) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    Vector v = random_vector(rng, 1 + rng.index(30));
    const double tau = rng.uniform();
    const double got = quantile(v, tau);
    std::sort(v.begin(), v.end());
    const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(tau * v.size())));
    EXPECT_EQ(got, v[rank - 1]);
  }
}

TEST(NormalQuantile, InvertsTheCdf) {
  EXPECT_NEAR(normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_DOUBLE_EQ(normal_quantile(0.5), 0.0);
  for (double p = 1e-10; p < 1.0; p = p < 0.5 ? p * 3.0 : 1.0 - (1.0 - p) / 3.0) {
    if (p >= 1.0 - 1e-10) break;
    EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-9 * std::min(p, 1.0 - p) + 1e-15);
  }
  EXPECT_THROW(normal_quantile(1.2), DomainError);
}

TEST(Random, StreamsAreReproducibleAndDistinct) {
  Rng a(derive_seed(7, 1)), b(derive_seed(7, 1)), c(derive_seed(7, 2));
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Random, BallSamplesStayInside) {
  Rng rng(5);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf})
    for (int k = 0; k < 1000; ++k) {
      const Vector v = uniform_in_ball(rng, 1 + rng.index(6), p, 0.3);
      EXPECT_LE(lp_norm(v, p), 0.3 + 1e-15);
    }
}

TEST(Random, BallSamplerIsUniform) {
  // half the volume of a d-ball lies beyond radius 2^(-1/d)
  Rng rng(6);
  const std::size_t d = 3;
  const double r_half = std::pow(0.5, 1.0 / d);
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf}) {
    int outer = 0;
    const int n = 40000;
    for (int k = 0; k < n; ++k) outer += lp_norm(uniform_in_ball(rng, d, p, 1.0), p) > r_half;
    EXPECT_NEAR(outer / double(n), 0.5, 0.015) << to_string(p);
  }
}

TEST(Random, GammaAndBetaMoments) {
  Rng rng(8);
  const int n = 100000;
  for (double shape : {0.4, 1.0, 3.5}) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += rng.gamma(shape);
    EXPECT_NEAR(s / n, shape, 0.03 * shape + 0.01);
  }
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += rng.beta(0.4, 0.4);
  EXPECT_NEAR(s / n, 0.5, 0.01);
}

TEST(Random, IndexIsInRangeAndCoversAll) {
  Rng rng(9);
  std::vector<int> hits(7, 0);
  for (int k = 0; k < 7000; ++k) ++hits[rng.index(7)];
  for (int h : hits) EXPECT_GT(h, 800);
}

TEST(Parallel, IndexedSlotsAndExceptions) {
  std::vector<int> out(100, 0);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], static_cast<int>(i * i));
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 3) throw DomainError("boom"); }), DomainError);
}

TEST(Norms, ParseRoundTrips) {
  for (NormKind p : {NormKind::L1, NormKind::L2, NormKind::LInf}) EXPECT_EQ(parse_norm(to_string(p)), p);
  EXPECT_THROW(parse_norm("l7"), DomainError);
}
