#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "spiked/kac_rice.hpp"
#include "spiked/landscape.hpp"

using namespace spiked;

namespace {

Vec sphere_point(int N, std::uint64_t s) { return random_sphere_point(N, s, 7); }

// Direct sum over the couplings as drawn; no symmetrization, no contraction.
double brute_h(const HamiltonianInstance& inst, const Vec& sigma) {
  const int N = inst.N(), p = inst.params().p(), k = inst.params().k();
  double t = 0.0;
  const auto& J = inst.couplings();
  for (std::size_t flat = 0; flat < J.size(); ++flat) {
    std::size_t r = flat;
    double prod = J[flat];
    for (int a = 0; a < p; ++a) {
      prod *= sigma(static_cast<Eigen::Index>(r % N));
      r /= N;
    }
    t += prod;
  }
  const double Nd = N;
  const double mm = sigma(N - 1) / std::sqrt(Nd);
  return -std::pow(Nd, -0.5 * (p - 1)) * t - inst.params().lambda() * Nd / k * std::pow(mm, k);
}

}  // namespace

TEST(Instance, CouplingCountAndDeterminism) {
  const ModelParams P(3, 2, 1.0);
  const auto a = sample_instance(2, P, 11);
  EXPECT_EQ(a.couplings().size(), 8u);
  const auto b = sample_instance(2, P, 11);
  EXPECT_EQ(a.couplings(), b.couplings());
  EXPECT_NE(sample_instance(2, P, 12).couplings(), a.couplings());
  EXPECT_THROW(sample_instance(1000, P, 1), DomainError);
  EXPECT_THROW(sample_instance(1, P, 1), DomainError);
}

TEST(Instance, ValueMatchesDirectSum) {
  for (const ModelParams& P : {ModelParams(3, 2, 4.0), ModelParams(4, 3, 2.5), ModelParams(5, 1, 1.0)}) {
    const auto inst = sample_instance(6, P, 5);
    const Vec s = sphere_point(6, 3);
    EXPECT_NEAR(eval_h(inst, s), brute_h(inst, s), 1e-12 * (1.0 + std::abs(brute_h(inst, s))));
  }
}

TEST(Instance, ParityWithoutSpike) {
  for (int p : {3, 4, 5}) {
    const auto inst = sample_instance(5, ModelParams(p, 2, 0.0), 9);
    const Vec s = sphere_point(5, 1);
    EXPECT_NEAR(eval_h(inst, -s), (p % 2 ? -1.0 : 1.0) * eval_h(inst, s), 1e-12);
  }
}

TEST(Instance, GradientTangentAndFiniteDifference) {
  const ModelParams P(3, 2, 3.0);
  const int N = 7;
  const auto inst = sample_instance(N, P, 21);
  const Vec s = sphere_point(N, 2);
  const Vec g = grad_sphere(inst, s);
  EXPECT_NEAR(g.dot(s), 0.0, 1e-10 * g.norm() * s.norm());
  const Mat Q = tangent_basis(s);
  const Mat Hs = hess_sphere(inst, s);
  const double sN = std::sqrt(double(N));
  const double h = 1e-5;
  for (int j = 0; j < N - 1; ++j) {
    const Vec u = Q.col(j);
    // Geodesic through s along u.
    auto at = [&](double t) { Vec v = std::cos(t / sN) * s + sN * std::sin(t / sN) * u; return eval_h(inst, v); };
    const double d1 = (at(h) - at(-h)) / (2 * h);
    const double d2 = (at(h) - 2 * at(0) + at(-h)) / (h * h);
    EXPECT_NEAR(d1, g.dot(u), 1e-6 * (1 + std::abs(d1)));
    EXPECT_NEAR(d2, u.dot(Hs * u), 1e-3 * (1 + std::abs(d2)));
  }
}

TEST(Instance, PureSpikeIsCriticalAtSpike) {
  const int N = 6;
  HamiltonianInstance inst(N, ModelParams(3, 2, 5.0), 0, std::vector<double>(216, 0.0));
  Vec s = Vec::Zero(N);
  s(N - 1) = std::sqrt(double(N));
  EXPECT_LT(grad_sphere(inst, s).norm(), 1e-12);
  EXPECT_NEAR(eval_h(inst, s), -5.0 * N / 2.0, 1e-12);
  EXPECT_NEAR(inst.overlap(s), 1.0, 1e-15);
}

TEST(Instance, OffSphereIsRejected) {
  const auto inst = sample_instance(4, ModelParams(3, 2, 1.0), 1);
  EXPECT_THROW(grad_sphere(inst, Vec::Ones(4) * 2.0), DomainError);
}

TEST(Instance, RescaledValue) {
  const auto inst = sample_instance(5, ModelParams(3, 2, 2.0), 4);
  const Vec s = sphere_point(5, 8);
  EXPECT_NEAR(rescaled_value(inst, s / std::sqrt(5.0)), brute_h(inst, s) / std::sqrt(5.0), 1e-12);
}

TEST(Blob, RoundTrip) {
  const auto inst = sample_instance(8, ModelParams(3, 2, 6.5), 99);
  std::stringstream ss;
  write_instance(ss, inst);
  EXPECT_EQ(ss.str().size(), 64u + 8u * 512u);
  const auto back = read_instance(ss);
  EXPECT_EQ(back.N(), 8);
  EXPECT_EQ(back.seed(), 99u);
  EXPECT_EQ(back.params().lambda(), 6.5);
  EXPECT_EQ(back.couplings(), inst.couplings());
}

TEST(Blob, RejectsGarbageAndOversize) {
  std::stringstream bad(std::string(128, 'x'));
  EXPECT_THROW(read_instance(bad), std::runtime_error);
  const auto inst = sample_instance(8, ModelParams(3, 2, 1.0), 1);
  std::stringstream ss;
  write_instance(ss, inst);
  EXPECT_THROW(read_instance(ss, 100.0), std::runtime_error);
  std::stringstream cut(ss.str().substr(0, 200));
  EXPECT_THROW(read_instance(cut), std::exception);
}

TEST(Covariance, SmallRunPasses) {
  const auto rep = covariance_mc(5, ModelParams(3, 2, 6.0), 0.4, 20000, 17);
  for (const auto& c : rep.checks) EXPECT_TRUE(c.pass) << c.name << " " << c.estimate << " vs " << c.target;
  EXPECT_GT(rep.entries_total, 0);
}

TEST(Gse, DescentNeverIncreasesEnergy) {
  const auto inst = sample_instance(12, ModelParams(3, 2, 6.0), 3);
  for (int r = 0; r < 5; ++r) {
    const Vec start = random_sphere_point(12, 3, r + 1);
    const auto d = descend(inst, start, GseOptions{});
    EXPECT_TRUE(d.converged);
    EXPECT_LE(d.energy, eval_h(inst, start) + 1e-12);
    EXPECT_LT(grad_sphere(inst, d.sigma).norm(), 1e-8 * std::sqrt(12.0));
    EXPECT_EQ(hessian_index(inst, d.sigma), 0);
  }
}

TEST(Gse, StrongerSpikeGivesLowerEnergy) {
  double prev = kInf;
  for (double lam : {4.0, 7.0, 10.0}) {
    double avg = 0.0;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      GseOptions opt;
      opt.restarts = 20;
      const auto e = estimate_gse(sample_instance(20, ModelParams(3, 2, lam), s), opt);
      EXPECT_LE(std::abs(e.overlap), 1.0 + 1e-12);
      avg += e.energy_per_site / 3.0;
    }
    EXPECT_LT(avg, prev);
    prev = avg;
  }
}

TEST(Census, AlternationAndFullCircle) {
  const ModelParams P(3, 2, 1.5);
  const CircleGrid grid(3, 2, 20000);
  for (std::uint64_t s = 1; s <= 200; ++s) {
    const auto inst = sample_instance(2, P, s);
    const auto c = census_n2(inst, {-1.0, 1.0}, {-50.0, 50.0}, grid);
    ASSERT_EQ(c.degenerate, 0);
    ASSERT_EQ(c.all.size() % 2, 0u);
    ASSERT_GE(c.all.size(), 2u);
    int signed_total = 0;
    for (std::size_t i = 0; i < c.all.size(); ++i) {
      signed_total += c.all[i].index == 0 ? 1 : -1;
      EXPECT_NE(c.all[i].index, c.all[(i + 1) % c.all.size()].index);
      Vec sig(2);
      sig << kSqrt2 * std::cos(c.all[i].angle), kSqrt2 * std::sin(c.all[i].angle);
      EXPECT_LT(grad_sphere(inst, sig).norm(), 1e-8);
      EXPECT_NEAR(c.all[i].energy_density, eval_h(inst, sig) / 2.0, 1e-12);
    }
    EXPECT_EQ(signed_total, 0);
  }
}

TEST(Census, AgreesWithKacRiceIntegral) {
  const ModelParams P(3, 2, 6.0);
  const Interval M{0.3, 0.99}, E{-5.0, -2.7};
  const double exact = euler_char_integral(M, E, 2, P, 1e-9).value;
  const auto mc = census_signed_mc(P, M, E, 20000, 5, 20000);
  EXPECT_TRUE(mc.within(exact)) << mc.mean << " +- " << mc.std_error << " vs " << exact;
}

TEST(IndexProfile, DeepPointsAreMinima) {
  const ModelParams P(3, 2, 10.0);
  std::vector<HamiltonianInstance> batch;
  for (std::uint64_t s = 1; s <= 20; ++s) batch.push_back(sample_instance(10, P, s));
  const double xs = x_star(P);
  const auto prof = index_profile(batch, {-kInf, xs + 0.1});
  ASSERT_GT(prof.points, 0);
  EXPECT_GE(prof.fraction(0), 0.95);
  EXPECT_THROW(index_profile({sample_instance(13, ModelParams(3, 1, 1.0), 1)}, {-10.0, 0.0}), DomainError);
}
