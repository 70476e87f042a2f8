#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "spiked/kac_rice.hpp"
#include "spiked/rmt_mc.hpp"

using namespace spiked;

// GOE normalization used throughout: E[W_ij^2] = 1/(2n) off the diagonal,
// 1/n on it, semicircle edge at sqrt 2.
TEST(Goe, EntryVariances) {
  auto s1 = sample_goe({1, 4, 0});
  Moments d1;
  for (int i = 0; i < 100000; ++i) {
    const double v = s1.next()(0, 0);
    d1.add(v * v);
  }
  EXPECT_TRUE(d1.estimate().within(1.0));

  auto s3 = sample_goe({3, 5, 0});
  Moments off, diag, mean;
  for (int i = 0; i < 100000; ++i) {
    const auto& W = s3.next();
    off.add(W(0, 1) * W(0, 1));
    diag.add(W(2, 2) * W(2, 2));
    mean.add(W(1, 2));
    ASSERT_EQ(W(0, 1), W(1, 0));
  }
  EXPECT_TRUE(off.estimate().within(1.0 / 6.0));
  EXPECT_TRUE(diag.estimate().within(1.0 / 3.0));
  EXPECT_TRUE(mean.estimate().within(0.0));
}

TEST(Goe, SameSeedSameStream) {
  auto a = sample_goe({4, 9, 0});
  auto b = sample_goe({4, 9, 0});
  for (int i = 0; i < 5000; ++i) ASSERT_EQ(a.next(), b.next());
}

TEST(TridiagonalDet, MatchesDenseDeterminant) {
  auto s = sample_goe({7, 2, 0});
  Eigen::VectorXd d, e;
  for (int i = 0; i < 20; ++i) {
    const Eigen::MatrixXd W = s.next();
    detail::tridiagonalize(W, d, e);
    Eigen::MatrixXd A = W - 1.7 * Eigen::MatrixXd::Identity(7, 7);
    A(0, 0) -= 0.6;
    EXPECT_NEAR(tridiagonal_det(d, e, 0.6, 1.7).value(), A.determinant(), 1e-10 * std::abs(A.determinant()) + 1e-13);
  }
}

TEST(McDet, MatchesClosedForm) {
  const GoeSpec spec{1, 21, 100000};
  EXPECT_TRUE(mc_expected_det(1, 0.0, 2.0, spec).within(-2.0));
  for (double th : {0.0, 0.8}) {
    const auto e = mc_expected_det(5, th, 2.2, GoeSpec{5, 22, 200000});
    EXPECT_TRUE(e.within(expected_det_rank1(5, th, 2.2).value())) << th << " z " << e.z_score(expected_det_rank1(5, th, 2.2).value());
  }
  const auto e4 = mc_expected_det(4, 0.7, 2.2, GoeSpec{4, 23, 200000});
  EXPECT_TRUE(e4.within(expected_det_rank1(4, 0.7, 2.2).value()));
}

TEST(McDet, WorkerCountDoesNotChangeResult) {
  const GoeSpec spec{6, 77, 3 * kBlockSize + 100};
  const std::vector<DetConfig> cfg{{0.5, 2.2}, {2.0, 4.0}};
  const auto a = mc_expected_det_grid(spec, cfg, 1);
  const auto b = mc_expected_det_grid(spec, cfg, 3);
  for (std::size_t i = 0; i < cfg.size(); ++i) {
    EXPECT_EQ(a[i].mean, b[i].mean);
    EXPECT_EQ(a[i].std_error, b[i].std_error);
  }
}

TEST(CharIntegral, AgreesWithClosedForm) {
  EXPECT_NEAR(char_integral_det(3, 0.5, 1.0), expected_det_rank1(3, 0.5, -1.0).value(), 1e-8);
  EXPECT_NEAR(char_integral_det(2, 0.0, 0.0), -0.25, 1e-10);
  for (int n = 2; n <= 10; ++n)
    for (double s : {-2.2, 0.3}) {
      const double exact = expected_det_rank1(n, 0.0, -s).value();
      EXPECT_NEAR(char_integral_det(n, 0.0, s), exact, 1e-8 * std::max(1.0, std::abs(exact))) << n;
    }
}

TEST(PrError, DecayAndDepth) {
  const std::vector<int> ns{50, 100, 200, 400};
  const auto a = pr_error_curve(-2.0, ns);
  const auto b = pr_shifted_error_curve(-2.0, ns);
  const auto deep = pr_error_curve(-5.0, ns);
  for (std::size_t i = 1; i < ns.size(); ++i) {
    const double r = a[i].relative_error / a[i - 1].relative_error;
    EXPECT_GE(r, 0.3);
    EXPECT_LE(r, 0.8);
    const double rs = b[i].relative_error / b[i - 1].relative_error;
    EXPECT_GE(rs, 0.3);
    EXPECT_LE(rs, 0.8);
  }
  for (std::size_t i = 0; i < ns.size(); ++i) EXPECT_LT(deep[i].relative_error, a[i].relative_error);
  const auto again = pr_error_curve(-2.0, ns);
  for (std::size_t i = 0; i < ns.size(); ++i) EXPECT_EQ(again[i].relative_error, a[i].relative_error);
  EXPECT_THROW(pr_error_curve(-1.4, ns), DomainError);
}

TEST(ConditionalHessian, MeanAndCovariance) {
  const ModelParams P0(3, 2, 0.0);
  const int N = 5;
  const double x = -3.0, m = 0.6;
  const Eigen::MatrixXd M0 = conditional_hessian_mean(m, x, N, P0);
  EXPECT_TRUE(M0.isApprox(-std::sqrt(double(N)) * 3.0 * x * Eigen::MatrixXd::Identity(N - 1, N - 1)));

  const ModelParams P(3, 2, 6.0);
  auto s = sample_conditional_hessian(m, x, N, P, 31);
  const double gap = -P.lambda() * std::sqrt(double(N)) * (1.0) * (1.0 - m * m);
  EXPECT_NEAR(s.mean()(N - 2, N - 2) - s.mean()(0, 0), gap, 1e-12);

  Moments d0, dl, c01_01, c00_00, c01_23, c00_11;
  for (int i = 0; i < 40000; ++i) {
    const Eigen::MatrixXd H = s.next() - s.mean();
    d0.add(H(0, 0));
    dl.add(H(N - 2, N - 2));
    c01_01.add(H(0, 1) * H(0, 1));
    c00_00.add(H(0, 0) * H(0, 0));
    c01_23.add(H(0, 1) * H(2, 3));
    c00_11.add(H(0, 0) * H(1, 1));
  }
  EXPECT_TRUE(d0.estimate().within(0.0));
  EXPECT_TRUE(dl.estimate().within(0.0));
  EXPECT_TRUE(c01_01.estimate().within(6.0));   // p(p-1)
  EXPECT_TRUE(c00_00.estimate().within(12.0));  // 2 p(p-1)
  EXPECT_TRUE(c01_23.estimate().within(0.0));
  EXPECT_TRUE(c00_11.estimate().within(0.0));
}

TEST(ConditionalHessian, EdgeConcentration) {
  const int N = 200;
  const ModelParams P(3, 2, 0.0);
  auto s = sample_conditional_hessian(0.3, -3.0, N, P, 8);
  const double scale = std::sqrt(2.0 * (N - 1) * 6.0);
  int below = 0;
  const int samples = 60;
  for (int i = 0; i < samples; ++i) {
    const Eigen::MatrixXd H = s.next();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    const double rescaled = (es.eigenvalues()(0) - s.mean()(0, 0)) / scale;
    if (rescaled < -kSqrt2 - 0.2) ++below;
  }
  EXPECT_LT(below, 1 + samples / 100);
}
