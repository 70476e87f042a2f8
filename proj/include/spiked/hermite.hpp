#pragma once

// Orthonormal Hermite functions phi_n(x) = (2^n n! sqrt(pi))^{-1/2} h_n(x) e^{-x^2/2}
// evaluated by the three-term recurrence with a running log-scale, so that
// neither the e^{-x^2/2} seed nor the polynomial growth ever leaves double
// range. Raw polynomials h_n are exposed only as (sign, log|h_n|).

#include <cmath>
#include <utility>

#include "spiked/model.hpp"
#include "spiked/scalar_core.hpp"

namespace spiked {

/// A real number stored as sign * exp(log_abs). sign = 0 encodes an exact zero
/// (log_abs = -inf).
struct SignedLog {
  int sign = 0;
  double log_abs = -kInf;

  [[nodiscard]] double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }

  static SignedLog from(double v) {
    if (v == 0.0) return {};
    return {v > 0 ? 1 : -1, std::log(std::abs(v))};
  }
};

inline SignedLog operator*(SignedLog a, SignedLog b) {
  if (a.sign == 0 || b.sign == 0) return {};
  return {a.sign * b.sign, a.log_abs + b.log_abs};
}

/// a + b carried out in log space.
inline SignedLog log_add(SignedLog a, SignedLog b) {
  if (a.sign == 0) return b;
  if (b.sign == 0) return a;
  if (a.log_abs < b.log_abs) std::swap(a, b);
  const double ratio = std::exp(b.log_abs - a.log_abs);
  const double mant = a.sign + b.sign * ratio;
  if (mant == 0.0) return {};
  return {mant > 0 ? 1 : -1, a.log_abs + std::log(std::abs(mant))};
}

/// phi_{n-1}(x) and phi_n(x) from one recurrence pass, in signed-log form.
struct HermitePair {
  SignedLog prev;  // phi_{n-1}; zero when n = 0
  SignedLog curr;  // phi_n
};

inline HermitePair hermite_phi_pair(unsigned n, double x) {
  // Mantissas (a, b) for (phi_{j-1}, phi_j) with common scale exp(log_scale).
  constexpr double kBig = 1e150;
  constexpr double kSmall = 1e-150;
  double log_scale = -0.5 * x * x;
  double a = 0.0;
  double b = std::pow(kPi, -0.25);
  for (unsigned j = 1; j <= n; ++j) {
    const double jd = static_cast<double>(j);
    const double next = std::sqrt(2.0 / jd) * x * b - std::sqrt((jd - 1.0) / jd) * a;
    a = b;
    b = next;
    const double mag = std::max(std::abs(a), std::abs(b));
    if (mag > kBig || (mag < kSmall && mag > 0.0)) {
      a /= mag;
      b /= mag;
      log_scale += std::log(mag);
    }
  }
  HermitePair out;
  out.curr = b == 0.0 ? SignedLog{} : SignedLog{b > 0 ? 1 : -1, std::log(std::abs(b)) + log_scale};
  if (n > 0) out.prev = a == 0.0 ? SignedLog{} : SignedLog{a > 0 ? 1 : -1, std::log(std::abs(a)) + log_scale};
  return out;
}

inline SignedLog hermite_phi_log(unsigned n, double x) { return hermite_phi_pair(n, x).curr; }

/// phi_n(x); underflows gracefully to 0 far outside the oscillatory region.
inline double hermite_phi(unsigned n, double x) { return hermite_phi_log(n, x).value(); }

/// log of the normalization (2^n n! sqrt(pi))^{1/2}.
inline double hermite_log_norm(unsigned n) {
  const double nd = static_cast<double>(n);
  return 0.5 * (nd * std::log(2.0) + std::lgamma(nd + 1.0) + 0.5 * std::log(kPi));
}

/// Sign and log-magnitude of the physicists' Hermite polynomial h_n(x).
inline SignedLog hermite_h_log(unsigned n, double x) {
  SignedLog phi = hermite_phi_log(n, x);
  if (phi.sign == 0) return phi;
  phi.log_abs += hermite_log_norm(n) + 0.5 * x * x;
  return phi;
}

/// Leading Plancherel-Rotach term for phi_n(sqrt(n) x), x < -sqrt2, in signed-log form:
///   (-1)^n e^{-n I1(-x)} h(x) / sqrt(4 pi sqrt(2n)).
/// The sign is (-1)^n, the sign of phi_n on the far negative axis.
inline SignedLog pr_asymptotic_log(unsigned n, double x) {
  if (n == 0) throw DomainError("pr_asymptotic: n must be positive");
  if (!(x < -kSqrt2)) throw DomainError("pr_asymptotic: requires x < -sqrt(2)");
  const double nd = static_cast<double>(n);
  const double log_mag = -nd * i1(-x) + std::log(h_edge(x)) - 0.5 * std::log(4.0 * kPi * std::sqrt(2.0 * nd));
  return {(n % 2 == 0) ? 1 : -1, log_mag};
}

inline double pr_asymptotic(unsigned n, double x) { return pr_asymptotic_log(n, x).value(); }

/// Shifted form for phi_{n-1}(sqrt(n) y), y < -sqrt2:
///   (-1)^{n-1} e^{-n I1(-y)} / sqrt(2 pi sqrt(2n)) * h(y) / (sqrt(y^2-2) - y).
inline SignedLog pr_shifted_log(unsigned n, double y) {
  if (n == 0) throw DomainError("pr_shifted: n must be positive");
  if (!(y < -kSqrt2)) throw DomainError("pr_shifted: requires y < -sqrt(2)");
  const double nd = static_cast<double>(n);
  const double log_mag = -nd * i1(-y) + std::log(h_edge(y) / (std::sqrt(y * y - 2.0) - y)) -
                         0.5 * std::log(2.0 * kPi * std::sqrt(2.0 * nd));
  return {((n - 1) % 2 == 0) ? 1 : -1, log_mag};
}

inline double pr_shifted(unsigned n, double y) { return pr_shifted_log(n, y).value(); }

}  // namespace spiked
