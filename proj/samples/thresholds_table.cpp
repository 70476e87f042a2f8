// Prints lambda1, lambda2 and lambda_tr for a few (p, k), then the constant C
// at growing lambda for (3, 3).

#include <cstdio>

#include "spiked/kac_rice.hpp"
#include "spiked/thresholds.hpp"

int main() {
  const int pk[][2] = {{3, 1}, {3, 2}, {3, 3}, {4, 3}};
  std::printf("%3s %3s %10s %10s %10s\n", "p", "k", "lambda1", "lambda2", "lambda_tr");
  for (const auto& [p, k] : pk) {
    const auto r = spiked::lambda_tr(p, k);
    std::printf("%3d %3d %10.5f %10.5f %10.5f\n", p, k, r.lambda1, r.lambda2, r.lambda_tr);
  }
  for (double lam : {4.0, 10.0, 100.0, 1000.0})
    std::printf("C(%g, 3, 3) = %.12f\n", lam, spiked::constant_c(spiked::ModelParams(3, 3, lam)));
}
