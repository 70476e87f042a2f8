// Predicted ground state for p=3, k=2, lambda=10 against a small simulation,
// and the expected number of deep minima near (m*, x*) at a few N.

#include <cstdio>

#include "spiked/kac_rice.hpp"
#include "spiked/landscape.hpp"
#include "spiked/thresholds.hpp"

int main() {
  using namespace spiked;
  const ModelParams P(3, 2, 10.0);
  const GsePrediction g = gse_predict(P);
  std::printf("predicted: energy %.6f  overlap %.6f\n", g.x_star, g.m_star);

  GseOptions opt;
  opt.restarts = 50;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto inst = sample_instance(32, P, seed);
    const GseEstimate e = estimate_gse(inst, opt);
    std::printf("N=32 seed %llu: energy %.6f  |overlap| %.6f\n", static_cast<unsigned long long>(seed),
                e.energy_per_site, std::abs(e.overlap));
  }

  // A window around (m*, x*) for lambda = 6, below the energy bound.
  const ModelParams Q(3, 2, 6.0);
  const double xs = x_star(Q);
  const CountWindow w{{0.90, 0.99}, {xs - 0.6, xs + 0.55}};
  for (int N : {10, 30, 100}) std::printf("N=%3d  E[Crt0 - Crt1] = %.9f\n", N, expected_euler_char(w, N, Q));
  std::printf("C = %.12f\n", constant_c(Q));
}
