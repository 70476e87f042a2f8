#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "spiked/thresholds.hpp"

using namespace spiked;

TEST(MLambda, Values) {
  EXPECT_NEAR(m_lambda(ModelParams(3, 1, 10.0)), std::sqrt(3.0) / (10.0 * std::sqrt(2.0)), 1e-14);
  EXPECT_NEAR(m_lambda(ModelParams(3, 1, 10.0)), 0.12247, 1e-5);
  EXPECT_EQ(m_lambda(ModelParams(3, 2, 1.0)), 1.0);
  EXPECT_EQ(m_lambda(ModelParams(3, 2, 0.0)), 1.0);
  EXPECT_NEAR(m_lambda(ModelParams(3, 60, 5.0)), std::pow(std::sqrt(3.0) / (5.0 * std::sqrt(2.0)), 1.0 / 60), 1e-14);
}

TEST(MStar, ClosedFormsAndResidual) {
  EXPECT_NEAR(*m_star(ModelParams(3, 1, std::sqrt(3.0))), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(*m_star(ModelParams(3, 2, 10.0)), std::sqrt(0.97), 1e-14);
  EXPECT_NEAR(*m_star(ModelParams(3, 3, lambda1(3, 3))), std::sqrt(0.5), 1e-6);
  EXPECT_FALSE(m_star(ModelParams(3, 3, 3.0)).has_value());

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> L(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const int p = 3 + i % 4, k = 1 + i % 5;
    const double lam = std::max(lambda1(p, k), k == 2 ? std::sqrt(double(p)) : 0.0) + 0.01 + 30.0 * L(rng);
    const ModelParams P(p, k, lam);
    const auto ms = m_star(P);
    ASSERT_TRUE(ms.has_value());
    EXPECT_LT(std::abs(m_star_residual(*ms, P)), 1e-10) << p << k << lam;
  }
}

TEST(MStar, IncreasingInLambda) {
  for (int k : {3, 4}) {
    double prev = 0.0;
    for (double lam = lambda1(3, k) + 1e-3; lam < 60.0; lam += 0.25) {
      const double ms = *m_star(ModelParams(3, k, lam));
      EXPECT_GT(ms, prev);
      prev = ms;
    }
  }
}

TEST(Lambda1, Values) {
  EXPECT_NEAR(lambda1(3, 3), std::sqrt(12.0), 1e-14);
  EXPECT_NEAR(lambda1(4, 3), 4.0, 1e-14);
  EXPECT_EQ(lambda1(3, 2), 0.0);
  EXPECT_EQ(lambda1(3, 1), 0.0);
}

TEST(Lambda2, FigureValues) {
  EXPECT_NEAR(lambda2(3, 1), 1.732, 2e-3);
  EXPECT_NEAR(lambda2(3, 2), 2.449, 2e-3);
  EXPECT_NEAR(lambda2(3, 3), 3.464, 2e-3);
  EXPECT_NEAR(lambda2(4, 3), 4.243, 2e-3);
  for (int p = 3; p <= 6; ++p)
    for (int k = 1; k <= 5; ++k) {
      const double l2 = lambda2(p, k);
      const ModelParams P(p, k, l2);
      // Crossing for p > k; for p <= k lambda2 = lambda1 and m* already sits above m_lambda.
      if (p > k) {
        EXPECT_LT(std::abs(*m_star(P) - m_lambda(P)), 1e-8) << p << k;
      } else {
        EXPECT_GE(*m_star(P), m_lambda(P) - 1e-12) << p << k;
      }
    }
}

TEST(Lambda2, EqualsLambda1ExactlyWhenPAtMostK) {
  for (int p = 3; p <= 8; ++p)
    for (int k = 3; k <= 8; ++k) {
      if (p <= k) {
        EXPECT_EQ(lambda1(p, k), lambda2(p, k)) << p << k;
      } else {
        EXPECT_GT(lambda2(p, k), lambda1(p, k) + 1e-6) << p << k;
      }
    }
}

TEST(Lambda2, SeparatesLatitudeRegimes) {
  for (auto [p, k] : {std::pair{4, 3}, {5, 3}, {5, 4}}) {
    const double l1 = lambda1(p, k), l2 = lambda2(p, k);
    for (double t : {0.2, 0.5, 0.8}) {
      const ModelParams P(p, k, l1 + t * (l2 - l1));
      EXPECT_LT(*m_star(P), m_lambda(P));
    }
    for (double lam : {l2 * 1.01, l2 * 2, l2 * 10}) {
      const ModelParams P(p, k, lam);
      EXPECT_GE(*m_star(P), m_lambda(P));
    }
  }
}

TEST(LambdaTr, FigureValues) {
  const auto r33 = lambda_tr(3, 3);
  EXPECT_NEAR(r33.lambda_tr, 3.619, 2e-3);
  EXPECT_TRUE(r33.monotonicity_verified);
  EXPECT_NEAR(lambda_tr(3, 1).lambda_tr, 1.732, 2e-3);
  EXPECT_NEAR(lambda_tr(4, 3).lambda_tr, 4.243, 2e-3);
  for (auto [p, k] : {std::pair{3, 1}, {3, 2}, {3, 3}, {4, 3}}) {
    const auto r = lambda_tr(p, k);
    EXPECT_LE(r.lambda1, r.lambda2);
    EXPECT_LE(r.lambda2, r.lambda_tr);
  }
}

TEST(LambdaTr, MonotonicityFlagOnRequestedGrid) {
  std::vector<double> grid;
  for (int i = 0; i < 30; ++i) grid.push_back(3.47 + (8.0 - 3.47) * i / 29.0);
  EXPECT_TRUE(monotonicity_holds(3, 3, grid));
  ThresholdOptions opt;
  opt.monotonicity_grid = grid;
  const auto r = lambda_tr(3, 3, opt);
  EXPECT_TRUE(r.monotonicity_verified);
  EXPECT_EQ(r.monotonicity_grid, grid);
}

TEST(LowLatitudeSup, SignAroundThreshold) {
  EXPECT_LT(low_latitude_sup(ModelParams(3, 3, 4.0)).sup, 0.0);
  EXPECT_GT(low_latitude_sup(ModelParams(3, 3, 3.5)).sup, 0.0);
  const double tr = lambda_tr(3, 3).lambda_tr;
  EXPECT_LT(std::abs(low_latitude_sup(ModelParams(3, 3, tr)).sup), 1e-3);
  const auto lo = low_latitude_sup(ModelParams(3, 3, tr - 0.1));
  const auto hi = low_latitude_sup(ModelParams(3, 3, tr + 0.1));
  EXPECT_GT(lo.sup, 0.0);
  EXPECT_LT(hi.sup, 0.0);
  // f(0) is the pure p-spin complexity at y*.
  const ModelParams P(3, 3, 4.0);
  EXPECT_NEAR(hi.f_zero, s(0.0, x_star(ModelParams(3, 3, tr + 0.1)), ModelParams(3, 3, tr + 0.1)), 1e-14);
  EXPECT_LE(low_latitude_sup(P).f_zero, low_latitude_sup(P).sup);
}

TEST(Gse, Prediction) {
  const auto g = gse_predict(ModelParams(3, 2, 10.0));
  EXPECT_NEAR(g.m_star, 0.98489, 1e-5);
  EXPECT_NEAR(g.x_star, -5.15, 1e-10);
  EXPECT_NEAR(g.gse_alt_form, -5.15, 1e-10);
  EXPECT_NEAR(g.y_star, g.y_star_alt, 1e-10);
  EXPECT_THROW(gse_predict(ModelParams(3, 3, 3.0)), DomainError);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> L(0.0, 1.0);
  for (auto [p, k] : {std::pair{3, 1}, {3, 2}, {3, 3}, {4, 3}, {5, 2}}) {
    const double tr = lambda_tr(p, k).lambda_tr;
    for (int i = 0; i < 50; ++i) {
      const auto gp = gse_predict(ModelParams(p, k, tr + 50.0 * L(rng)));
      EXPECT_NEAR(gp.x_star, gp.gse_alt_form, 1e-10);
    }
  }
  const auto big = gse_predict(ModelParams(3, 3, 1e4));
  EXPECT_NEAR(big.x_star / (-1e4 / 3.0), 1.0, 1e-3);
  EXPECT_GT(big.m_star, 0.9999);
}

TEST(Gse, FixedLatitudeBound) {
  EXPECT_NEAR(gse_fixed_latitude(0.0, ModelParams(3, 2, 10.0)), -std::sqrt(3.0), 1e-14);
  EXPECT_NEAR(xi_prime_at_one(0.5, 4), 3.0, 1e-6);
  const ModelParams P(3, 2, 10.0);
  double best = kInf, arg = 0.0;
  for (double m = 0.0; m < 0.9999; m += 1e-5) {
    const double v = gse_fixed_latitude(m, P);
    if (v < best) {
      best = v;
      arg = m;
    }
  }
  EXPECT_NEAR(arg, *m_star(P), 1e-4);
  EXPECT_NEAR(best, x_star(P), 1e-8);
}
