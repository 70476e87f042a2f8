#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace spiked {

/// Raised when an argument lies outside the domain of a formula
/// (poles, |m| >= 1, missing m*, windows violating the energy condition).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Model triple (p, k, lambda) of the spiked tensor Hamiltonian
///   H(sigma) = -N^{-(p-1)/2} sum J_{i1..ip} sigma_i1..sigma_ip - (lambda N / k) m^k.
class ModelParams {
 public:
  ModelParams(int p, int k, double lambda) : p_(p), k_(k), lambda_(lambda) {
    if (p < 3) throw DomainError("ModelParams: p must be >= 3, got " + std::to_string(p));
    if (k < 1) throw DomainError("ModelParams: k must be >= 1, got " + std::to_string(k));
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
      throw DomainError("ModelParams: lambda must be a finite nonnegative number");
  }

  [[nodiscard]] int p() const { return p_; }
  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] double pd() const { return static_cast<double>(p_); }
  [[nodiscard]] double kd() const { return static_cast<double>(k_); }

  [[nodiscard]] ModelParams with_lambda(double lambda) const { return {p_, k_, lambda}; }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  int p_;
  int k_;
  double lambda_;
};

/// Integer power that tolerates negative exponents (returns 0 exponent as 1,
/// including 0^0).
inline double ipow(double base, int e) {
  if (e == 0) return 1.0;
  if (e < 0) return 1.0 / ipow(base, -e);
  double r = 1.0;
  double b = base;
  while (e > 0) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}

/// Boundary between low- and high-latitude regions:
///   m_lambda = min{1, ((p-2) sqrt(p) / (lambda sqrt(p-1)))^{1/k}}.
/// Saturates at 1 for lambda = 0.
inline double m_lambda(const ModelParams& P) {
  const double p = P.pd();
  if (P.lambda() <= 0.0) return 1.0;
  const double arg = (p - 2.0) * std::sqrt(p) / (P.lambda() * std::sqrt(p - 1.0));
  return std::min(1.0, std::pow(arg, 1.0 / P.kd()));
}

}  // namespace spiked
