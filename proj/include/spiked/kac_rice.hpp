#pragma once

// Expected critical-point counts in a latitude/energy window: the exact
// finite-N Euler characteristic through Hermite determinants, the asymptotic
// terms I and II, the Laplace saddle, the sharp leading term and the constant C.

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "spiked/hermite.hpp"
#include "spiked/model.hpp"
#include "spiked/numerics.hpp"
#include "spiked/scalar_core.hpp"
#include "spiked/thresholds.hpp"

namespace spiked {

struct Interval {
  double lo;
  double hi;

  [[nodiscard]] double width() const { return hi - lo; }
  [[nodiscard]] bool contains(double v) const { return v > lo && v < hi; }
};

/// Latitude window M and energy-density window E.
struct CountWindow {
  Interval M;
  Interval E;

  /// Upper bound that sup E must stay strictly below.
  static double energy_bound(const ModelParams& P) {
    const double p = P.pd();
    return -2.0 * std::sqrt((p - 1.0) / p) - std::abs(1.0 / p - 1.0 / P.kd()) * P.lambda();
  }

  /// Throws DomainError naming the violated inequality.
  void validate(const ModelParams& P) const {
    if (!(M.lo < M.hi) || !(M.lo > -1.0) || !(M.hi < 1.0))
      throw DomainError("CountWindow: latitude window must satisfy -1 < inf M < sup M < 1");
    if (!(E.lo < E.hi) || !std::isfinite(E.lo) || !std::isfinite(E.hi))
      throw DomainError("CountWindow: energy window must be a bounded nonempty interval");
    const double bound = energy_bound(P);
    if (!(E.hi < bound)) {
      std::ostringstream os;
      os.precision(10);
      os << "CountWindow: energy condition violated: sup E = " << E.hi
         << " must be < -2 sqrt((p-1)/p) - |1/p - 1/k| lambda = " << bound;
      throw DomainError(os.str());
    }
  }

  /// The rescaled energy range at latitude m: sqrt(p/(2(p-1))) (E - lambda m^k (1/p - 1/k)).
  [[nodiscard]] Interval y_range(double m, const ModelParams& P) const {
    const double p = P.pd();
    const double scale = std::sqrt(p / (2.0 * (p - 1.0)));
    const double shift = P.lambda() * ipow(m, P.k()) * (1.0 / p - 1.0 / P.kd());
    return {scale * (E.lo - shift), scale * (E.hi - shift)};
  }
};

/// theta(m) = lambda (k-1) m^{k-2} (1 - m^2) / sqrt(2p(p-1)); 0 for k = 1.
inline double theta(double m, const ModelParams& P) {
  detail::require_open_latitude(m, "theta");
  if (P.k() == 1) return 0.0;
  const double p = P.pd();
  return P.lambda() * (P.kd() - 1.0) * ipow(m, P.k() - 2) * (1.0 - m * m) / std::sqrt(2.0 * p * (p - 1.0));
}

namespace detail {

// h_n(x) and h_{n-1}(x) in signed-log form from one recurrence pass.
inline std::pair<SignedLog, SignedLog> hermite_h_pair(unsigned n, double x) {
  HermitePair ph = hermite_phi_pair(n, x);
  const double shift = 0.5 * x * x;
  SignedLog hn = ph.curr;
  if (hn.sign != 0) hn.log_abs += hermite_log_norm(n) + shift;
  SignedLog hm = ph.prev;
  if (n > 0 && hm.sign != 0) hm.log_abs += hermite_log_norm(n - 1) + shift;
  return {hn, hm};
}

// h_a(z) + c h_{a-1}(z) in signed-log form (the second term absent when a = 0).
inline SignedLog hermite_combo(unsigned a, double z, double c) {
  const auto [ha, hb] = hermite_h_pair(a, z);
  if (a == 0 || c == 0.0) return ha;
  return log_add(ha, SignedLog::from(c) * hb);
}

}  // namespace detail

/// E[det(W_n - theta e e^T - y I_n)] for the GOE with E[W_ij^2] = 1/(2n)
/// (i != j), E[W_ii^2] = 1/n:
///   (-1)^n 2^{-n} n^{-n/2} (h_n(sqrt(n) y) + 2 sqrt(n) theta h_{n-1}(sqrt(n) y)).
inline SignedLog expected_det_rank1(int n, double theta_v, double y) {
  if (n < 1) throw DomainError("expected_det_rank1: n must be positive");
  const double nd = static_cast<double>(n);
  SignedLog r = detail::hermite_combo(static_cast<unsigned>(n), std::sqrt(nd) * y, 2.0 * std::sqrt(nd) * theta_v);
  if (r.sign == 0) return r;
  r.log_abs += -nd * std::log(2.0) - 0.5 * nd * std::log(nd);
  if (n % 2 == 1) r.sign = -r.sign;
  return r;
}

/// G_N(x,m) = (-1)^{N-1} (p(p-1)/2)^{(N-1)/2} (h_{N-1}(sqrt(N) y) + 2 sqrt(N) theta h_{N-2}(sqrt(N) y)),
/// the expected Hessian determinant conditional on a critical point at (m, x).
inline SignedLog g_n_det(double x, double m, int N, const ModelParams& P) {
  if (N < 2) throw DomainError("g_n_det: N must be at least 2");
  const double Nd = static_cast<double>(N);
  const double y = y_of(x, m, P);
  const double th = theta(m, P);
  SignedLog r = detail::hermite_combo(static_cast<unsigned>(N - 1), std::sqrt(Nd) * y, 2.0 * std::sqrt(Nd) * th);
  if (r.sign == 0) return r;
  const double p = P.pd();
  r.log_abs += 0.5 * (Nd - 1.0) * std::log(p * (p - 1.0) / 2.0);
  if ((N - 1) % 2 == 1) r.sign = -r.sign;
  return r;
}

namespace detail {

// Integral of sign * exp(logf(u, v) - scale) over u in [u_lo, u_hi],
// v in vrange(u). `width` is the expected peak width in both coordinates.
// The tolerance is relative to the L1 mass of the integrand, estimated first
// by a Riemann sum; regions that carry no mass are not refined further.
template <class LogF, class VRange>
double scaled_integral_2d(LogF&& logf, double u_lo, double u_hi, VRange&& vrange, double width, double scale,
                          double rel_tol, double* abs_err) {
  // Coarse scan: L1 mass and the location of the outer peak.
  constexpr int kOuter = 81;
  constexpr int kInnerScan = 41;
  double best_u = u_lo;
  double best = -kInf;
  double mass = 0.0;
  const double du = (u_hi - u_lo) / (kOuter - 1.0);
  for (int i = 0; i < kOuter; ++i) {
    const double u = u_lo + du * i;
    const Interval vr = vrange(u);
    if (!(vr.hi > vr.lo)) continue;
    double row = 0.0;
    for (int j = 0; j < kInnerScan; ++j) {
      const SignedLog l = logf(u, vr.lo + vr.width() * j / (kInnerScan - 1.0));
      if (l.sign != 0) row += std::exp(l.log_abs - scale);
      if (l.log_abs > best) {
        best = l.log_abs;
        best_u = u;
      }
    }
    mass += row * vr.width() / kInnerScan * du;
  }
  // A peak narrower than the scan cells can be missed by the Riemann sum;
  // the floor keeps the tolerance meaningful in that case.
  mass = std::max(mass, width * width * 1e-3);
  const double outer_tol = std::max(rel_tol, 1e-13) * mass;
  const double inner_tol = 0.01 * outer_tol / (u_hi - u_lo);

  auto inner = [&](double u) {
    const Interval vr = vrange(u);
    if (!(vr.hi > vr.lo)) return 0.0;
    // Locate the inner peak so the panels can resolve it.
    double best_v = vr.lo;
    double top = -kInf;
    for (int i = 0; i < kInnerScan; ++i) {
      const double v = vr.lo + vr.width() * i / (kInnerScan - 1.0);
      const double l = logf(u, v).log_abs;
      if (l > top) {
        top = l;
        best_v = v;
      }
    }
    const double cell = vr.width() / (kInnerScan - 1.0);
    const auto peak = numerics::golden_max([&](double v) { return logf(u, v).log_abs; },
                                           std::max(vr.lo, best_v - cell), std::min(vr.hi, best_v + cell), 1e-10);
    const double v0 = peak.x;
    std::vector<double> br = numerics::panel_breaks(vr.lo, vr.hi, 4);
    for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) {
      br.push_back(v0 - s * width);
      br.push_back(v0 + s * width);
    }
    br.push_back(v0);
    return numerics::integrate_abs(
        [&](double v) {
          const SignedLog l = logf(u, v);
          return l.sign == 0 ? 0.0 : l.sign * std::exp(l.log_abs - scale);
        },
        vr.lo, vr.hi, br, inner_tol);
  };

  std::vector<double> br = numerics::panel_breaks(u_lo, u_hi, 8);
  for (double s : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    br.push_back(best_u - s * width);
    br.push_back(best_u + s * width);
  }
  br.push_back(best_u);
  return numerics::integrate_abs(inner, u_lo, u_hi, br, outer_tol, abs_err);
}

// Largest log value of logf on a grid, used as the common scale.
template <class LogF, class VRange>
double max_log_on_grid(LogF&& logf, double u_lo, double u_hi, VRange&& vrange, int nu = 101, int nv = 101) {
  double best = -kInf;
  for (int i = 0; i < nu; ++i) {
    const double u = u_lo + (u_hi - u_lo) * i / (nu - 1.0);
    const Interval vr = vrange(u);
    for (int j = 0; j < nv; ++j) best = std::max(best, logf(u, vr.lo + vr.width() * j / (nv - 1.0)).log_abs);
  }
  return best;
}

inline double log_omega(int n) {
  // Surface area of the unit n-sphere: 2 pi^{(n+1)/2} / Gamma((n+1)/2).
  const double nd = static_cast<double>(n);
  return std::log(2.0) + 0.5 * (nd + 1.0) * std::log(kPi) - std::lgamma(0.5 * (nd + 1.0));
}

}  // namespace detail

struct IntegralValue {
  double value;
  double abs_error;
};

/// Exact expected Euler characteristic sum over critical points sigma with
/// latitude in (m_lo, m_hi) and energy density in (x_lo, x_hi) of (-1)^{index}.
/// No energy condition is imposed, so it also serves full-circle checks.
inline IntegralValue euler_char_integral(Interval M, Interval E, int N, const ModelParams& P, double rel_tol = 1e-6) {
  if (N < 2) throw DomainError("euler_char_integral: N must be at least 2");
  if (!(M.lo >= -1.0 && M.hi <= 1.0 && M.lo < M.hi)) throw DomainError("euler_char_integral: bad latitude window");
  const double Nd = static_cast<double>(N);
  const double p = P.pd();
  const double lam = P.lambda();
  const double log_pref = detail::log_omega(N - 2) + 0.5 * std::log(Nd) - 0.5 * Nd * std::log(2.0 * kPi) -
                          0.5 * (Nd - 1.0) * std::log(p);
  // Latitude m = sin t so that dm (1 - m^2)^{(N-3)/2} = cos^{N-2} t dt.
  auto logf = [&](double t, double x) -> SignedLog {
    const double m = std::sin(t);
    const double c = std::cos(t);
    if (!(c > 0.0) || !(std::abs(m) < 1.0)) return {};
    const double mk = ipow(m, P.k());
    const double a = lam * lam * ipow(m, 2 * P.k() - 2) * c * c / p;
    const double b = x + lam * mk / P.kd();
    SignedLog g = g_n_det(x, m, N, P);
    if (g.sign == 0) return g;
    g.log_abs += (Nd - 2.0) * std::log(c) - 0.5 * Nd * (a + b * b);
    return g;
  };
  const double t_lo = std::asin(M.lo);
  const double t_hi = std::asin(M.hi);
  auto vr = [&](double) { return E; };
  const double scale = detail::max_log_on_grid(logf, t_lo, t_hi, vr);
  if (!std::isfinite(scale)) return {0.0, 0.0};
  double err = 0.0;
  const double width = 1.0 / std::sqrt(Nd);
  const double I = detail::scaled_integral_2d(logf, t_lo, t_hi, vr, width, scale, rel_tol, &err);
  const double factor = std::exp(log_pref + scale);
  return {I * factor, err * factor};
}

/// Expected Euler characteristic of the critical points in the window.
inline double expected_euler_char(const CountWindow& w, int N, const ModelParams& P, double rel_tol = 1e-6) {
  w.validate(P);
  return euler_char_integral(w.M, w.E, N, P, rel_tol).value;
}

struct TermIntegrals {
  double term_I;
  double term_II;
};

/// Terms I and II of the large-N expansion after the Plancherel-Rotach
/// substitution:
///   I  = N/(2 pi sqrt p) int_M int_{E~_m} (1-m^2)^{-3/2} h~(y) e^{N S~} dy dm,
///   II = -lambda (N-1)(k-1)/(2 p pi) int_M int_{E~_m} m^{k-2} h~(y) e^{(N-1) S~} J dy dm.
inline TermIntegrals term_integrals(const CountWindow& w, int N, const ModelParams& P, double rel_tol = 1e-6) {
  w.validate(P);
  if (N < 2) throw DomainError("term_integrals: N must be at least 2");
  const double Nd = static_cast<double>(N);
  const double p = P.pd();
  const double width = 1.0 / std::sqrt(Nd);
  auto vr = [&](double m) { return w.y_range(m, P); };

  auto log_I = [&](double m, double y) -> SignedLog {
    const double st = s_tilde(m, y, P);
    if (!std::isfinite(st)) return {};
    return {1, -1.5 * std::log(1.0 - m * m) + std::log(h_tilde(y)) + Nd * st};
  };
  TermIntegrals out{0.0, 0.0};
  {
    const double scale = detail::max_log_on_grid(log_I, w.M.lo, w.M.hi, vr);
    if (std::isfinite(scale)) {
      const double I = detail::scaled_integral_2d(log_I, w.M.lo, w.M.hi, vr, width, scale, rel_tol, nullptr);
      out.term_I = I * std::exp(std::log(Nd / (2.0 * kPi * std::sqrt(p))) + scale);
    }
  }
  if (P.k() == 1 || P.lambda() == 0.0) return out;
  auto log_II = [&](double m, double y) -> SignedLog {
    const double st = s_tilde(m, y, P);
    if (!std::isfinite(st)) return {};
    SignedLog f = SignedLog::from(ipow(m, P.k() - 2));
    if (f.sign == 0) return f;
    f.log_abs += std::log(h_tilde(y)) + (Nd - 1.0) * st + std::log(j_factor(m, y, P));
    return f;
  };
  const double scale = detail::max_log_on_grid(log_II, w.M.lo, w.M.hi, vr);
  if (std::isfinite(scale)) {
    const double I = detail::scaled_integral_2d(log_II, w.M.lo, w.M.hi, vr, width, scale, rel_tol, nullptr);
    const double pref = P.lambda() * (Nd - 1.0) * (P.kd() - 1.0) / (2.0 * p * kPi);
    out.term_II = -pref * I * std::exp(scale);
  }
  return out;
}

struct Saddle {
  double m_o;
  double y_o;
  double rate;
};

/// Maximizer of S~ over the rescaled window at fixed latitude. S~(m, .) is
/// strictly concave below -sqrt2, so the constrained maximizer is the
/// stationary point clamped to the interval.
inline double saddle_y(double m, const CountWindow& w, const ModelParams& P) {
  const Interval yr = w.y_range(m, P);
  auto dy = [&](double y) { return s_tilde_partials(m, y, P).dy; };
  if (dy(yr.hi) >= 0.0) return yr.hi;
  if (dy(yr.lo) <= 0.0) return yr.lo;
  double lo = yr.lo;
  double hi = yr.hi;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (dy(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// The Laplace saddle (m_o, y_o) of the window and the exponential rate S~(m_o, y_o).
inline Saddle saddle(const CountWindow& w, const ModelParams& P) {
  w.validate(P);
  auto g = [&](double m) { return s_tilde(m, saddle_y(m, w, P), P); };
  const auto best = numerics::grid_sup(g, w.M.lo, w.M.hi, 2000, 3);
  return {best.x, saddle_y(best.x, w, P), best.value};
}

namespace detail {

inline bool interior_with_margin(double v, Interval I) {
  const double margin = 1e-8 * I.width();
  return v > I.lo + margin && v < I.hi - margin;
}

// Prefactor of the sharp formula at an interior point (m, y).
inline double sharp_prefactor(double m, double y, double one_m2, double g2, double j, const ModelParams& P) {
  const double p = P.pd();
  const double syy = s_tilde_partials(m, y, P).dyy;
  const double spike = P.k() == 1 ? 0.0 : P.lambda() * (P.kd() - 1.0) * ipow(m, P.k() - 2) * j;
  const double num = kSqrt2 * h_edge(y) * (std::sqrt(p) * std::pow(one_m2, -1.5) - spike);
  return num / ((std::sqrt(y * y - 2.0) - y) * p * std::sqrt(std::abs(syy * g2)));
}

}  // namespace detail

/// Leading Laplace term of the expected number of critical points in the
/// window. Requires an interior saddle; boundary saddles raise DomainError.
inline double sharp_asymptotic(const CountWindow& w, int N, const ModelParams& P) {
  const Saddle sd = saddle(w, P);
  const Interval yr = w.y_range(sd.m_o, P);
  if (!detail::interior_with_margin(sd.m_o, w.M) || !detail::interior_with_margin(sd.y_o, yr))
    throw DomainError("sharp_asymptotic: the saddle lies on the window boundary; use term_integrals instead");
  const double syy = s_tilde_partials(sd.m_o, sd.y_o, P).dyy;
  const GValue g = g_and_g2(sd.m_o, P);
  if (!(syy < 0.0) || !(g.g2 < 0.0))
    throw DomainError("sharp_asymptotic: the saddle is degenerate (second derivatives not negative)");
  const double pref =
      detail::sharp_prefactor(sd.m_o, sd.y_o, 1.0 - sd.m_o * sd.m_o, g.g2, j_factor(sd.m_o, sd.y_o, P), P);
  return pref * std::exp(static_cast<double>(N) * sd.rate);
}

/// Limit constant C(lambda, p, k) of the expected number of deep minima.
/// Requires lambda >= lambda2 so that (m*, y*) is the interior maximizer.
inline double constant_c(const ModelParams& P) {
  const double l2 = lambda2(P.p(), P.k());
  if (P.lambda() < l2 * (1.0 - 1e-12))
    throw DomainError("constant_c: lambda = " + std::to_string(P.lambda()) + " is below lambda2 = " + std::to_string(l2));
  const double ms = require_m_star(P, "constant_c");
  if (!(ms < 1.0)) throw DomainError("constant_c: m* rounds to 1 at this lambda");
  const double ys = y_star(ms, P);
  const double j = j_factor(ms, ys, P);
  // The cancellation in the exponent of J loses digits in proportion to its size.
  const double p = P.pd();
  const double exponent_scale =
      1.0 + P.lambda() * P.lambda() * ipow(ms, 2 * P.k() - 2) / (2.0 * p * p) * (p * (1.0 - ms * ms) + ms * ms);
  if (std::abs(j - 1.0) > 1e-10 * exponent_scale)
    throw std::runtime_error("constant_c: J(m*, y*) = " + std::to_string(j) + " differs from 1");
  // At m* the defining equation gives 1 - m*^2 = p m*^{4-2k} / lambda^2 without
  // the cancellation of 1 - m*^2 when m* is close to 1.
  const double one_m2 = p * ipow(ms, 4 - 2 * P.k()) / (P.lambda() * P.lambda());
  return detail::sharp_prefactor(ms, ys, one_m2, detail::g2_with(ms, one_m2, P), 1.0, P);
}

struct KacRiceResult {
  double term_I = 0.0;
  double term_II = 0.0;
  std::optional<double> euler_char_exact;
  std::optional<double> sharp_value;
  double saddle_m = 0.0;
  double saddle_y = 0.0;
  double rate = 0.0;
  std::optional<double> constant_C;
};

/// All window quantities at once. The exact Euler characteristic is computed
/// when `with_exact` is set; the sharp value only for interior saddles; C only
/// when (m*, x*) lies in M x E and lambda >= lambda2.
inline KacRiceResult kac_rice(const CountWindow& w, int N, const ModelParams& P, bool with_exact = true,
                              double rel_tol = 1e-6) {
  w.validate(P);
  KacRiceResult r;
  const TermIntegrals t = term_integrals(w, N, P, rel_tol);
  r.term_I = t.term_I;
  r.term_II = t.term_II;
  if (with_exact) r.euler_char_exact = expected_euler_char(w, N, P, rel_tol);
  const Saddle sd = saddle(w, P);
  r.saddle_m = sd.m_o;
  r.saddle_y = sd.y_o;
  r.rate = sd.rate;
  try {
    r.sharp_value = sharp_asymptotic(w, N, P);
  } catch (const DomainError&) {
    r.sharp_value.reset();
  }
  const auto ms = m_star(P);
  if (ms && P.lambda() >= lambda2(P.p(), P.k()) && w.M.contains(*ms) && w.E.contains(x_star(P)))
    r.constant_C = constant_c(P);
  return r;
}

}  // namespace spiked
