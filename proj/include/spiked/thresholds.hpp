#pragma once

// Ground-state latitude m*, the thresholds lambda1 <= lambda2 <= lambda_tr,
// ground-state energy predictions and the low-latitude complexity check.

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "spiked/model.hpp"
#include "spiked/numerics.hpp"
#include "spiked/scalar_core.hpp"

namespace spiked {

/// lambda1(p,k): 0 for k = 1,2, else sqrt(p (k-1)^{k-1} / (k-2)^{k-2}).
inline double lambda1(int p, int k) {
  if (p < 3 || k < 1) throw DomainError("lambda1: requires p >= 3 and k >= 1");
  if (k <= 2) return 0.0;
  const double kd = static_cast<double>(k);
  return std::sqrt(static_cast<double>(p) * std::exp((kd - 1.0) * std::log(kd - 1.0) - (kd - 2.0) * std::log(kd - 2.0)));
}

/// |lambda m^k / sqrt p - m^2 / sqrt(1 - m^2)|, scaled by sqrt(1-m^2) so it
/// stays bounded near m = 1.
inline double m_star_residual(double m, const ModelParams& P) {
  const double r = std::sqrt(1.0 - m * m);
  return std::abs(P.lambda() * ipow(m, P.k()) * r / std::sqrt(P.pd()) - m * m);
}

/// Largest root in (0,1) of lambda m^k / sqrt p = m^2 / sqrt(1 - m^2).
/// Returns nullopt when no positive root exists: k = 1 with lambda = 0,
/// k = 2 with lambda < sqrt p, k > 2 with lambda < lambda1.
inline std::optional<double> m_star(const ModelParams& P) {
  const double p = P.pd();
  const double lam = P.lambda();
  const int k = P.k();
  if (k == 1) {
    if (lam <= 0.0) return std::nullopt;
    const double a = lam * lam / p;
    return std::sqrt(a / (1.0 + a));
  }
  if (k == 2) {
    if (lam < std::sqrt(p)) return std::nullopt;
    return std::sqrt(std::max(0.0, 1.0 - p / (lam * lam)));
  }
  const double l1 = lambda1(P.p(), k);
  if (lam < l1) return std::nullopt;
  const double kd = P.kd();
  const double lo0 = std::sqrt((kd - 2.0) / (kd - 1.0));
  if (lam == l1) return lo0;
  // F decreases on [lo0, 1): F(lo0) >= 0, F(1) = -1.
  auto F = [&](double m) { return lam * lam * ipow(m, 2 * k - 4) * (1.0 - m * m) / p - 1.0; };
  auto dF = [&](double m) {
    return lam * lam / p * ((2.0 * kd - 4.0) * ipow(m, 2 * k - 5) * (1.0 - m * m) - 2.0 * ipow(m, 2 * k - 3));
  };
  double lo = lo0;
  double hi = 1.0 - 1e-12;
  if (F(lo) < 0.0) return lo;  // rounding at the tangency
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) >= 0.0 ? lo : hi) = mid;
  }
  double m = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double d = dF(m);
    if (d == 0.0) break;
    const double next = m - F(m) / d;
    if (!(next >= lo0 && next < 1.0)) break;
    m = next;
  }
  return m;
}

inline double require_m_star(const ModelParams& P, const char* who) {
  const auto m = m_star(P);
  if (!m)
    throw DomainError(std::string(who) + ": m* does not exist for lambda = " + std::to_string(P.lambda()) +
                      " (below lambda1 or the k = 1, 2 existence bound)");
  return *m;
}

/// x*(lambda) = -lambda m*^k / k - sqrt(p (1 - m*^2)).
inline double x_star(const ModelParams& P) {
  const double ms = require_m_star(P, "x_star");
  return -P.lambda() * ipow(ms, P.k()) / P.kd() - std::sqrt(P.pd() * (1.0 - ms * ms));
}

/// lambda2(p,k): the smallest lambda >= lambda1 with m*(lambda) >= m_lambda.
/// Closed forms for k = 1, 2; bisection on the crossing for k > 2.
inline double lambda2(int p, int k) {
  if (p < 3 || k < 1) throw DomainError("lambda2: requires p >= 3 and k >= 1");
  const double pd = static_cast<double>(p);
  if (k == 1) {
    // m*^2 = a/(1+a) with a = lambda^2/p; m_lambda^2 = (p-2)^2/((p-1) a).
    const double q = (pd - 2.0) * (pd - 2.0);
    const double a = (q + std::sqrt(q * q + 4.0 * (pd - 1.0) * q)) / (2.0 * (pd - 1.0));
    return std::sqrt(pd * a);
  }
  if (k == 2) {
    // 1 - p/lambda^2 = c/lambda with c = (p-2) sqrt(p)/sqrt(p-1).
    const double c = (pd - 2.0) * std::sqrt(pd) / std::sqrt(pd - 1.0);
    return 0.5 * (c + std::sqrt(c * c + 4.0 * pd));
  }
  const double l1 = lambda1(p, k);
  auto gap = [&](double lam) {
    const ModelParams P(p, k, lam);
    return *m_star(P) - m_lambda(P);
  };
  if (p <= k || gap(l1) >= 0.0) return l1;
  double lo = l1;
  double hi = 2.0 * l1;
  while (gap(hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e12) throw DomainError("lambda2: crossing not bracketed");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gap(mid) >= 0.0 ? hi : lo) = mid;
  }
  return hi;
}

struct SupOptions {
  int grid = 2000;
  int refinements = 3;
};

struct LowLatitudeSup {
  double sup;
  double argmax;
  double f_zero;    // S(0, x*)
  double f_mlambda; // S(m_lambda, x*)
  double m_lambda;
};

namespace detail {

// Largest usable latitude below 1 for complexity evaluations.
inline double clip_latitude(double m) { return std::min(m, 1.0 - 1e-12); }

inline double low_latitude_sup_at(const ModelParams& P, double x, const SupOptions& opt, double* argmax = nullptr) {
  const double hi = clip_latitude(m_lambda(P));
  const auto best = numerics::grid_sup([&](double m) { return s(m, x, P); }, 0.0, hi, opt.grid, opt.refinements);
  if (argmax) *argmax = best.x;
  return best.value;
}

}  // namespace detail

/// sup over m in [0, m_lambda] of S(m, x*(lambda)).
inline LowLatitudeSup low_latitude_sup(const ModelParams& P, const SupOptions& opt = {}) {
  const double xs = x_star(P);
  LowLatitudeSup out{};
  out.m_lambda = m_lambda(P);
  out.sup = detail::low_latitude_sup_at(P, xs, opt, &out.argmax);
  out.f_zero = s(0.0, xs, P);
  out.f_mlambda = s(detail::clip_latitude(out.m_lambda), xs, P);
  return out;
}

struct ThresholdOptions {
  SupOptions sup{};
  double lambda_tol = 1e-4;
  double lambda_max = 1e4;
  // The sup is exactly 0 at lambda2 (attained at m_lambda = m*); values up to
  // this tolerance count as nonpositive.
  double sup_tol = 1e-9;
  // Lambda grid for the monotonicity report; empty selects 24 points on
  // [lambda2 + 1e-3, lambda2 + 1e-3 + max(5, lambda2)].
  std::vector<double> monotonicity_grid{};
};

struct ThresholdReport {
  int p = 0;
  int k = 0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda_tr = 0.0;
  // m*, x*, y* evaluated at lambda_tr.
  double m_star = 0.0;
  double x_star = 0.0;
  double y_star = 0.0;
  bool monotonicity_verified = false;
  std::vector<double> monotonicity_grid;
};

/// Checks that S(m, x*(lambda)) 1{m <= m_lambda} does not increase along the
/// lambda grid. The comparison is made at latitudes inside the later
/// low-latitude region, where both indicator factors equal one.
inline bool monotonicity_holds(int p, int k, const std::vector<double>& grid, int m_points = 2000,
                               double tol = 1e-12) {
  std::vector<double> lams = grid;
  std::sort(lams.begin(), lams.end());
  const double l1 = lambda1(p, k);
  std::vector<std::vector<double>> values;
  std::vector<double> cut;
  for (double lam : lams) {
    if (lam < l1) throw DomainError("monotonicity_holds: grid point below lambda1");
    const ModelParams P(p, k, lam);
    const auto ms = m_star(P);
    if (!ms) throw DomainError("monotonicity_holds: m* undefined on the grid");
    const double xs = x_star(P);
    std::vector<double> row(static_cast<std::size_t>(m_points));
    for (int i = 0; i < m_points; ++i) {
      const double m = detail::clip_latitude(static_cast<double>(i) / static_cast<double>(m_points - 1));
      row[i] = s(m, xs, P);
    }
    values.push_back(std::move(row));
    cut.push_back(m_lambda(P));
  }
  for (std::size_t j = 1; j < lams.size(); ++j) {
    for (int i = 0; i < m_points; ++i) {
      const double m = static_cast<double>(i) / static_cast<double>(m_points - 1);
      if (m > cut[j]) break;
      if (values[j][i] > values[j - 1][i] + tol) return false;
    }
  }
  return true;
}

namespace detail {

struct ThresholdKey {
  int p, k, grid, refinements;
  double lambda_tol, lambda_max, sup_tol;
  auto tie() const { return std::tie(p, k, grid, refinements, lambda_tol, lambda_max, sup_tol); }
  bool operator<(const ThresholdKey& o) const { return tie() < o.tie(); }
};

inline double search_lambda_tr(int p, int k, const ThresholdOptions& opt) {
  const double l2 = lambda2(p, k);
  auto sup_at = [&](double lam) {
    const ModelParams P(p, k, lam);
    return low_latitude_sup_at(P, x_star(P), opt.sup);
  };
  // Probe just to the right of lambda2: at lambda2 = lambda1 (k > 2, p <= k)
  // the level x* touches the bulk edge at m = 0 and the sup jumps.
  const double right = l2 + 0.5 * opt.lambda_tol;
  if (sup_at(right) <= opt.sup_tol) return l2;
  double lo = right;
  double hi = std::max(2.0 * l2, l2 + 1.0);
  while (sup_at(hi) > opt.sup_tol) {
    lo = hi;
    hi *= 2.0;
    if (hi > opt.lambda_max)
      throw DomainError("lambda_tr: low-latitude sup stays positive up to lambda_max = " + std::to_string(opt.lambda_max));
  }
  while (hi - lo > opt.lambda_tol) {
    const double mid = 0.5 * (lo + hi);
    (sup_at(mid) <= opt.sup_tol ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

inline double cached_lambda_tr(int p, int k, const ThresholdOptions& opt) {
  static std::shared_mutex mu;
  static std::map<ThresholdKey, double> cache;
  const ThresholdKey key{p, k, opt.sup.grid, opt.sup.refinements, opt.lambda_tol, opt.lambda_max, opt.sup_tol};
  {
    std::shared_lock lock(mu);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  const double value = search_lambda_tr(p, k, opt);
  std::unique_lock lock(mu);
  cache.emplace(key, value);
  return value;
}

}  // namespace detail

/// Full threshold report for (p,k). lambda_tr is the smallest lambda >=
/// lambda2 with sup_{[0, m_lambda]} S(m, x*(lambda)) <= 0 (bisection); the
/// monotonicity flag is reported only and never changes lambda_tr.
inline ThresholdReport lambda_tr(int p, int k, const ThresholdOptions& opt = {}) {
  if (p < 3 || k < 1) throw DomainError("lambda_tr: requires p >= 3 and k >= 1");
  ThresholdReport r;
  r.p = p;
  r.k = k;
  r.lambda1 = lambda1(p, k);
  r.lambda2 = lambda2(p, k);
  r.lambda_tr = detail::cached_lambda_tr(p, k, opt);
  const ModelParams P(p, k, r.lambda_tr);
  r.m_star = require_m_star(P, "lambda_tr");
  r.x_star = x_star(P);
  r.y_star = y_star(r.m_star, P);

  r.monotonicity_grid = opt.monotonicity_grid;
  if (r.monotonicity_grid.empty()) {
    const double span = std::max(5.0, r.lambda2);
    // Start just right of lambda2 to skip the edge-touching level at lambda1.
    const double start = r.lambda2 + 1e-3;
    for (int i = 0; i < 24; ++i) r.monotonicity_grid.push_back(start + span * i / 23.0);
  }
  r.monotonicity_verified = monotonicity_holds(p, k, r.monotonicity_grid, opt.sup.grid);
  return r;
}

struct GsePrediction {
  double m_star;
  double x_star;
  double y_star;          // closed form y*(m*)
  double y_star_alt;      // alternative closed form at m*
  double gse_alt_form;    // lambda m*^k (1/2 - 1/k) - sqrt(lambda^2 m*^{2k}/4 + p)
};

/// Ground-state energy density and overlap predicted for lambda above the thresholds.
inline GsePrediction gse_predict(const ModelParams& P) {
  GsePrediction g{};
  g.m_star = require_m_star(P, "gse_predict");
  const double mk = ipow(g.m_star, P.k());
  g.x_star = -P.lambda() * mk / P.kd() - std::sqrt(P.pd() * (1.0 - g.m_star * g.m_star));
  const double ms = detail::clip_latitude(g.m_star);
  g.y_star = y_star(ms, P);
  g.y_star_alt = y_star_at_m_star(ms, P);
  g.gse_alt_form = P.lambda() * mk * (0.5 - 1.0 / P.kd()) - std::sqrt(P.lambda() * P.lambda() * mk * mk / 4.0 + P.pd());
  return g;
}

/// Mixture of the fixed-latitude restriction: xi(x) = (m^2 + (1-m^2) x)^p - m^{2p}.
inline double xi_mixture(double x, double m, int p) {
  return ipow(m * m + (1.0 - m * m) * x, p) - ipow(m, 2 * p);
}

/// Central-difference xi'(1), which should equal p (1 - m^2).
inline double xi_prime_at_one(double m, int p, double h = 1e-6) {
  return (xi_mixture(1.0 + h, m, p) - xi_mixture(1.0 - h, m, p)) / (2.0 * h);
}

/// Upper bound on the ground-state energy density restricted to latitude m:
///   -lambda m^k / k - sqrt(xi'(1)), xi'(1) = p (1 - m^2).
inline double gse_fixed_latitude(double m, const ModelParams& P) {
  if (!(m >= 0.0 && m < 1.0)) throw DomainError("gse_fixed_latitude: requires 0 <= m < 1");
  return -P.lambda() * ipow(m, P.k()) / P.kd() - std::sqrt(P.pd() * (1.0 - m * m));
}

}  // namespace spiked
