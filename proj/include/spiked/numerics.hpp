#pragma once

// Small numerical building blocks shared by the solver modules: golden-section
// maximization, grid-then-refine suprema, and a log-scaled adaptive
// Gauss-Kronrod wrapper over Boost.Math.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "spiked/model.hpp"

namespace spiked::numerics {

struct Argmax {
  double x;
  double value;
};

/// Golden-section search for a maximum of f on [a, b].
template <class F>
Argmax golden_max(F&& f, double a, double b, double xtol = 1e-12, int max_iter = 200) {
  constexpr double kInvPhi = 0.6180339887498949;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > xtol * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? Argmax{c, fc} : Argmax{d, fd};
}

/// Supremum of f over [a, b]: uniform grid of `grid` points, then golden-section
/// refinement inside the neighbouring cells of the `refinements` best local
/// maxima of the grid. Endpoints are always candidates.
template <class F>
Argmax grid_sup(F&& f, double a, double b, int grid = 2000, int refinements = 3) {
  if (grid < 2) throw std::invalid_argument("grid_sup: grid must have at least two points");
  std::vector<double> xs(static_cast<std::size_t>(grid));
  std::vector<double> vs(xs.size());
  for (int i = 0; i < grid; ++i) {
    xs[i] = (i == grid - 1) ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(grid - 1);
    vs[i] = f(xs[i]);
  }
  std::vector<int> peaks;
  for (int i = 0; i < grid; ++i) {
    const bool left = (i == 0) || vs[i] >= vs[i - 1];
    const bool right = (i == grid - 1) || vs[i] >= vs[i + 1];
    if (left && right) peaks.push_back(i);
  }
  std::sort(peaks.begin(), peaks.end(), [&](int u, int v) { return vs[u] > vs[v]; });
  if (static_cast<int>(peaks.size()) > refinements) peaks.resize(static_cast<std::size_t>(refinements));

  Argmax best{xs[0], vs[0]};
  for (int i = 0; i < grid; ++i)
    if (vs[i] > best.value) best = {xs[i], vs[i]};
  for (int i : peaks) {
    const double lo = xs[std::max(0, i - 1)];
    const double hi = xs[std::min(grid - 1, i + 1)];
    if (hi <= lo) continue;
    const Argmax r = golden_max(f, lo, hi);
    if (r.value > best.value) best = r;
  }
  return best;
}

/// Adaptive 15-point Gauss-Kronrod on [a, b] after splitting at `breaks`
/// (points outside (a, b) are ignored). Returns the sum and accumulates the
/// error estimate into *abs_error.
template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> breaks, double rel_tol,
                       double* abs_error = nullptr, unsigned max_depth = 18) {
  if (!(b > a)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  double total = 0.0;
  double err_total = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (!(hi > lo)) continue;
    double err = 0.0;
    const double part = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        [&](double t) { return f(t); }, lo, hi, max_depth, rel_tol, &err);
    total += part;
    err_total += err;
  }
  if (abs_error) *abs_error += err_total;
  return total;
}

namespace detail {

template <class F>
double gk_abs(F& f, double lo, double hi, double abs_tol, double min_width, double* err, unsigned depth,
              double parent_err) {
  double e = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, lo, hi, 0, 0.0, &e);
  // Stop when the share is met, at the depth or width floor, or when halving
  // no longer shrinks the error estimate (rounding or noise floor).
  if (e <= abs_tol || depth == 0 || hi - lo <= min_width || e > 0.75 * parent_err) {
    *err += e;
    return v;
  }
  const double mid = 0.5 * (lo + hi);
  return gk_abs(f, lo, mid, 0.5 * abs_tol, min_width, err, depth - 1, e) +
         gk_abs(f, mid, hi, 0.5 * abs_tol, min_width, err, depth - 1, e);
}

}  // namespace detail

/// Adaptive 15-point Gauss-Kronrod to an absolute tolerance, shared among
/// the panels in proportion to their width. Panels that contribute little
/// stop refining as soon as their share is met, unlike a relative test.
template <class F>
double integrate_abs(F&& f, double a, double b, std::vector<double> breaks, double abs_tol,
                     double* abs_error = nullptr, unsigned max_depth = 24) {
  if (!(b > a)) return 0.0;
  breaks.push_back(a);
  breaks.push_back(b);
  std::sort(breaks.begin(), breaks.end());
  auto g = [&](double t) { return f(t); };
  double total = 0.0;
  double err = 0.0;
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double lo = std::max(a, breaks[i]);
    const double hi = std::min(b, breaks[i + 1]);
    if (!(hi > lo)) continue;
    total += detail::gk_abs(g, lo, hi, abs_tol * (hi - lo) / (b - a), 1e-13 * (b - a), &err, max_depth, kInf);
  }
  if (abs_error) *abs_error += err;
  return total;
}

/// Evenly spaced interior break points (n panels) plus any extra points.
inline std::vector<double> panel_breaks(double a, double b, int panels, std::initializer_list<double> extra = {}) {
  std::vector<double> out;
  for (int i = 1; i < panels; ++i) out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(panels));
  for (double e : extra)
    if (std::isfinite(e)) out.push_back(e);
  return out;
}

/// Pairwise (cascade) summation; the order of terms is fixed by the input.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

}  // namespace spiked::numerics
