#pragma once

// Scalar formulas of the (p,k) landscape: the rescaled energy y(x,m), the
// annealed complexity S~(m,y) with its partial derivatives, the high-latitude
// maximizer y*(m), and the auxiliary functions h, h~, l and J.

#include <cmath>
#include <string>

#include "spiked/model.hpp"

namespace spiked {

/// A (latitude, energy density) pair together with its rescaled energy y.
struct LandscapePoint {
  double m;
  double x;
  double y;
};

namespace detail {

inline void require_open_latitude(double m, const char* who) {
  if (!(std::abs(m) < 1.0))
    throw DomainError(std::string(who) + ": latitude must satisfy |m| < 1, got " + std::to_string(m));
}

// sqrt(2(p-1)/p), the coefficient that keeps showing up in front of y.
inline double coupling_c(const ModelParams& P) {
  const double p = P.pd();
  return std::sqrt(2.0 * (p - 1.0) / p);
}

// y*(m) without domain checks; finite differences may step past m = 1.
inline double y_star_raw(double m, const ModelParams& P) {
  const double p = P.pd();
  const double v = P.lambda() * ipow(m, P.k()) / (2.0 * std::sqrt(p));
  const double s = std::sqrt(2.0 * (p - 1.0));
  return v * (p - 2.0) / s - p / s * std::sqrt(v * v + 1.0);
}

}  // namespace detail

/// I1(z) = int_{sqrt2}^{z} sqrt(t^2 - 2) dt in closed form; +inf for z < sqrt2.
inline double i1(double z) {
  if (z < kSqrt2) return kInf;
  if (z == kSqrt2) return 0.0;
  const double r = std::sqrt(std::max(0.0, z * z - 2.0));
  return 0.5 * z * r - std::log((z + r) / kSqrt2);
}

/// h(y) = |(y - sqrt2)/(y + sqrt2)|^{1/4} + |(y + sqrt2)/(y - sqrt2)|^{1/4}.
inline double h_edge(double y) {
  if (std::abs(y) == kSqrt2) throw DomainError("h_edge: pole at |y| = sqrt(2)");
  const double ratio = std::abs((y - kSqrt2) / (y + kSqrt2));
  const double q = std::pow(ratio, 0.25);
  return q + 1.0 / q;
}

/// h~(y) = sqrt2 h(y) / (sqrt(y^2 - 2) - y), defined for y < -sqrt2.
inline double h_tilde(double y) {
  if (!(y < -kSqrt2)) throw DomainError("h_tilde: requires y < -sqrt(2)");
  return kSqrt2 * h_edge(y) / (std::sqrt(y * y - 2.0) - y);
}

/// y(x,m) = (p x - (1 - p/k) lambda m^k) / sqrt(2p(p-1)).
inline double y_of(double x, double m, const ModelParams& P) {
  detail::require_open_latitude(m, "y_of");
  const double p = P.pd();
  return (p * x - (1.0 - p / P.kd()) * P.lambda() * ipow(m, P.k())) / std::sqrt(2.0 * p * (p - 1.0));
}

/// Inverse of y_of in x.
inline double x_of(double y, double m, const ModelParams& P) {
  detail::require_open_latitude(m, "x_of");
  const double p = P.pd();
  return (y * std::sqrt(2.0 * p * (p - 1.0)) + (1.0 - p / P.kd()) * P.lambda() * ipow(m, P.k())) / p;
}

inline LandscapePoint make_point_from_x(double m, double x, const ModelParams& P) {
  return {m, x, y_of(x, m, P)};
}

/// Complexity S~_{p,k}(m,y). Returns -inf for y > -sqrt2; at y = -sqrt2 the
/// boundary value (I1 = 0) is returned.
inline double s_tilde(double m, double y, const ModelParams& P) {
  detail::require_open_latitude(m, "s_tilde");
  // A few ulps above the edge still counts as the edge, so that the bulk
  // edge energy computed through y_of lands on the boundary value.
  if (y > -kSqrt2 * (1.0 - 1e-14)) return -kInf;
  y = std::min(y, -kSqrt2);
  const double p = P.pd();
  const double lam = P.lambda();
  const double mk = ipow(m, P.k());
  const double m2k2 = ipow(m, 2 * P.k() - 2);
  return 0.5 * std::log((1.0 - m * m) * (p - 1.0)) + (2.0 - p) / (2.0 * p) * y * y -
         lam * mk / p * detail::coupling_c(P) * y -
         lam * lam * m2k2 / (2.0 * p * p) * (p + (1.0 - p) * m * m) - i1(-y);
}

/// Annealed complexity in energy coordinates, S(m,x) = S~(m, y(x,m)).
inline double s(double m, double x, const ModelParams& P) { return s_tilde(m, y_of(x, m, P), P); }

struct ComplexityPartials {
  double dy;
  double dyy;
  double dm;
  double dmm;
  double dmy;
};

namespace detail {

// Partials with 1 - m^2 supplied by the caller, who may know it more
// accurately than the subtraction (m close to 1).
inline ComplexityPartials partials_with(double m, double y, double one_m2, const ModelParams& P) {
  const double p = P.pd();
  const int k = P.k();
  const double kd = P.kd();
  const double lam = P.lambda();
  const double c = detail::coupling_c(P);
  const double r = std::sqrt(y * y - 2.0);

  ComplexityPartials d{};
  d.dy = -((p - 2.0) / p * y + lam * ipow(m, k) / p * c - r);
  d.dyy = (2.0 - p) / p + y / r;

  // Terms carrying a (k-1) factor vanish identically for k = 1; skip them so a
  // negative power of m = 0 never multiplies a zero.
  const double spike_first = k > 1 ? lam * lam * (kd - 1.0) / p * ipow(m, 2 * k - 3) : 0.0;
  d.dm = -m / one_m2 - lam * kd * ipow(m, k - 1) / p * c * y - spike_first +
         lam * lam * kd * (p - 1.0) / (p * p) * ipow(m, 2 * k - 1);

  const double cross = k > 1 ? lam * kd * (kd - 1.0) * ipow(m, k - 2) / p * c * y : 0.0;
  const double spike_second = k > 1 ? lam * lam * (kd - 1.0) * (2.0 * kd - 3.0) / p * ipow(m, 2 * k - 4) : 0.0;
  d.dmm = -(1.0 + m * m) / (one_m2 * one_m2) - cross - spike_second +
          lam * lam * kd * (p - 1.0) * (2.0 * kd - 1.0) / (p * p) * ipow(m, 2 * k - 2);

  d.dmy = -lam * kd * ipow(m, k - 1) / p * c;
  return d;
}

}  // namespace detail

/// Closed-form first and second partials of S~ at an interior point y < -sqrt2.
inline ComplexityPartials s_tilde_partials(double m, double y, const ModelParams& P) {
  detail::require_open_latitude(m, "s_tilde_partials");
  if (!(y < -kSqrt2)) throw DomainError("s_tilde_partials: requires y < -sqrt(2)");
  return detail::partials_with(m, y, 1.0 - m * m, P);
}

/// Closed-form stationary point of S~(m, .) on (-inf, -sqrt2):
///   y*(m) = v (p-2)/sqrt(2(p-1)) - p/sqrt(2(p-1)) sqrt(v^2 + 1),  v = lambda m^k / (2 sqrt p).
/// It is the maximizer of S~(m, .) when m >= m_lambda.
inline double y_star(double m, const ModelParams& P) {
  if (!(m >= 0.0 && m < 1.0)) throw DomainError("y_star: requires 0 <= m < 1");
  return detail::y_star_raw(m, P);
}

/// Alternative closed form of y* valid at m = m*:
///   ((p-1) m*^2 - p) / (sqrt(2(p-1)) sqrt(1 - m*^2)).
inline double y_star_at_m_star(double m_star, const ModelParams& P) {
  detail::require_open_latitude(m_star, "y_star_at_m_star");
  const double p = P.pd();
  return ((p - 1.0) * m_star * m_star - p) / (std::sqrt(2.0 * (p - 1.0)) * std::sqrt(1.0 - m_star * m_star));
}

struct GValue {
  double g;
  double g2;
};

namespace detail {

inline double g2_with(double m, double one_m2, const ModelParams& P) {
  const double ys = y_star_raw(m, P);
  const double step = 1e-6 * std::max(1.0, std::abs(m));
  const double dys = (y_star_raw(m + step, P) - y_star_raw(m - step, P)) / (2.0 * step);
  const ComplexityPartials d = partials_with(m, ys, one_m2, P);
  return d.dmm + 2.0 * d.dmy * dys + d.dyy * dys * dys;
}

}  // namespace detail

/// g(m) = S~(m, y*(m)) and its second derivative by the chain rule
///   g'' = S_mm + 2 S_my y*' + S_yy (y*')^2
/// (the S_y y*'' term vanishes at the stationary y*). y*' is a central
/// difference of the closed form with step 1e-6 max(1, m).
inline GValue g_and_g2(double m, const ModelParams& P) {
  detail::require_open_latitude(m, "g_and_g2");
  const double ml = m_lambda(P);
  if (m < ml * (1.0 - 1e-12))
    throw DomainError("g_and_g2: requires m >= m_lambda = " + std::to_string(ml));
  const double ys = detail::y_star_raw(m, P);
  return {s_tilde(m, ys, P), detail::g2_with(m, 1.0 - m * m, P)};
}

/// l(v) = 1/2 log(1 - m^2) + (1 - 2/m^2) v^2 + v sqrt(v^2 + 1) + asinh(v),
/// the value of g(m) written through v = lambda m^k / (2 sqrt p). The sign of
/// asinh is the one that makes l = g and puts the maximum l = 0 at
/// v = m^2 / (2 sqrt(1 - m^2)).
inline double l_of_v(double v, double m) {
  if (!(m > 0.0 && m < 1.0)) throw DomainError("l_of_v: requires 0 < m < 1");
  return 0.5 * std::log(1.0 - m * m) + (1.0 - 2.0 / (m * m)) * v * v + v * std::sqrt(v * v + 1.0) + std::asinh(v);
}

/// J(m,y) = exp(-(lambda^2/(2p^2) m^{2k-2} (p(1-m^2) + m^2) + lambda m^k y/(2p) sqrt(2(p-1)/p))).
inline double j_factor(double m, double y, const ModelParams& P) {
  detail::require_open_latitude(m, "j_factor");
  const double p = P.pd();
  const double lam = P.lambda();
  const double a = lam * lam / (2.0 * p * p) * ipow(m, 2 * P.k() - 2) * (p * (1.0 - m * m) + m * m);
  const double b = lam * ipow(m, P.k()) * y / (2.0 * p) * detail::coupling_c(P);
  return std::exp(-(a + b));
}

}  // namespace spiked
