#pragma once

// Monte Carlo ground truth for the GOE determinant identities: GOE sampling,
// empirical expected determinants of rank-one perturbed shifted GOE matrices,
// the one-dimensional characteristic integral, Plancherel-Rotach error
// curves and the conditional Hessian law.
//
// GOE normalization: E[W_ij^2] = 1/(2n) for i != j and E[W_ii^2] = 1/n, so
// the semicircle edge is at sqrt2.

#include <cmath>
#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "spiked/hermite.hpp"
#include "spiked/kac_rice.hpp"
#include "spiked/model.hpp"
#include "spiked/numerics.hpp"
#include "spiked/parallel.hpp"
#include "spiked/rng.hpp"

namespace spiked {

struct GoeSpec {
  int n = 1;
  std::uint64_t seed = 0;
  long long samples = 1;
};

/// Fills W (n x n) with one GOE draw; entries are read from `src` row by row
/// over the upper triangle, diagonal first in each row.
inline void fill_goe(NormalSource& src, Eigen::MatrixXd& W) {
  const Eigen::Index n = W.rows();
  const double nd = static_cast<double>(n);
  const double sd_diag = std::sqrt(1.0 / nd);
  const double sd_off = std::sqrt(0.5 / nd);
  for (Eigen::Index i = 0; i < n; ++i) {
    W(i, i) = sd_diag * src();
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = sd_off * src();
      W(i, j) = v;
      W(j, i) = v;
    }
  }
}

/// Reproducible stream of GOE matrices. Sample i comes from substream
/// (seed, i / kBlockSize), consumed in order, so the parallel drivers below
/// see exactly the same matrices.
class GoeStream {
 public:
  explicit GoeStream(const GoeSpec& spec) : spec_(spec), W_(spec.n, spec.n), src_(spec.seed, 0) {
    if (spec.n < 1) throw DomainError("GoeStream: n must be positive");
  }

  const Eigen::MatrixXd& next() {
    if (index_ > 0 && index_ % kBlockSize == 0) src_ = NormalSource(spec_.seed, static_cast<std::uint64_t>(index_ / kBlockSize));
    fill_goe(src_, W_);
    ++index_;
    return W_;
  }

  [[nodiscard]] long long index() const { return index_; }

 private:
  GoeSpec spec_;
  Eigen::MatrixXd W_;
  NormalSource src_;
  long long index_ = 0;
};

inline GoeStream sample_goe(const GoeSpec& spec) { return GoeStream(spec); }

/// det(T - theta e_0 e_0^T - y I) for symmetric tridiagonal T given by its
/// diagonal d and subdiagonal e, by the continuant recurrence with running
/// rescaling. `flip` negates T first.
inline SignedLog tridiagonal_det(const Eigen::VectorXd& d, const Eigen::VectorXd& e, double theta_v, double y,
                                 bool flip = false) {
  const Eigen::Index n = d.size();
  const double s = flip ? -1.0 : 1.0;
  double f_prev = 1.0;
  double f = s * d(0) - theta_v - y;
  double log_scale = 0.0;
  for (Eigen::Index i = 1; i < n; ++i) {
    const double next = (s * d(i) - y) * f - e(i - 1) * e(i - 1) * f_prev;
    f_prev = f;
    f = next;
    const double mag = std::max(std::abs(f), std::abs(f_prev));
    if (mag > 1e100 || (mag < 1e-100 && mag > 0.0)) {
      f /= mag;
      f_prev /= mag;
      log_scale += std::log(mag);
    }
  }
  if (f == 0.0) return {};
  return {f > 0 ? 1 : -1, std::log(std::abs(f)) + log_scale};
}

struct DetConfig {
  double theta;
  double y;
};

namespace detail {

// Tridiagonal form of W with e_0 left fixed by the similarity (the
// Householder steps act on coordinates 1..n-1), so det(W - theta e_0 e_0^T - yI)
// equals the same determinant of T.
inline void tridiagonalize(const Eigen::MatrixXd& W, Eigen::VectorXd& d, Eigen::VectorXd& e) {
  const Eigen::Index n = W.rows();
  if (n <= 2) {
    d = W.diagonal();
    e.resize(n > 1 ? 1 : 0);
    if (n == 2) e(0) = W(1, 0);
    return;
  }
  Eigen::Tridiagonalization<Eigen::MatrixXd> tri(W);
  d = tri.diagonal();
  e = tri.subDiagonal();
}

}  // namespace detail

/// Monte Carlo E[det(W_n - theta e e^T - y I_n)] for several (theta, y) at once.
/// All configurations share the same matrices. For odd n and theta = 0 the
/// observation is the antithetic pair average (det(W - yI) + det(-W - yI))/2,
/// one pair per draw.
inline std::vector<McEstimate> mc_expected_det_grid(const GoeSpec& spec, const std::vector<DetConfig>& configs,
                                                    int workers = 1, bool antithetic = true) {
  if (spec.n < 1) throw DomainError("mc_expected_det: n must be positive");
  if (spec.samples < 2) throw DomainError("mc_expected_det: need at least two samples");
  const int n = spec.n;
  const std::size_t nc = configs.size();
  const std::size_t blocks = block_count(spec.samples);
  auto run_block = [&](std::size_t b) {
    std::vector<Moments> acc(nc);
    NormalSource src(spec.seed, static_cast<std::uint64_t>(b));
    Eigen::MatrixXd W(n, n);
    Eigen::VectorXd d, e;
    const long long begin = static_cast<long long>(b) * kBlockSize;
    const long long end = std::min(spec.samples, begin + kBlockSize);
    for (long long i = begin; i < end; ++i) {
      fill_goe(src, W);
      detail::tridiagonalize(W, d, e);
      for (std::size_t c = 0; c < nc; ++c) {
        double v = tridiagonal_det(d, e, configs[c].theta, configs[c].y).value();
        if (antithetic && n % 2 == 1 && configs[c].theta == 0.0)
          v = 0.5 * (v + tridiagonal_det(d, e, 0.0, configs[c].y, true).value());
        acc[c].add(v);
      }
    }
    return acc;
  };
  const auto parts = parallel_blocks(blocks, workers, run_block);
  std::vector<McEstimate> out;
  out.reserve(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    std::vector<Moments> col;
    col.reserve(parts.size());
    for (const auto& p : parts) col.push_back(p[c]);
    out.push_back(merge_pairwise(col).estimate());
  }
  return out;
}

inline McEstimate mc_expected_det(int n, double theta_v, double y, GoeSpec spec, int workers = 1) {
  spec.n = n;
  return mc_expected_det_grid(spec, {{theta_v, y}}, workers).front();
}

struct ComplexValue {
  double re;
  double im;
};

/// Characteristic-integral representation of E[det(W_n - f e e^T + s I)]:
///   (-i/sqrt n)^n pi^{-1/2} e^{n s^2} int e^{-u^2} (u^n - i sqrt(n) f u^{n-1}) e^{2 sqrt(n) i u s} du.
/// Shifting the contour to u + i sqrt(n) s removes both the oscillation and
/// the e^{n s^2} factor; the shifted integrand is integrated on [-L, L].
inline ComplexValue char_integral_complex(int n, double f, double s) {
  if (n < 1 || n > 40) throw DomainError("char_integral_det: requires 1 <= n <= 40");
  constexpr double kEps = 1e-14;
  const double nd = static_cast<double>(n);
  const double c = std::sqrt(nd) * s;
  // The polynomial factor moves the peak out to about sqrt(n/2); the extra
  // sqrt(n) keeps the truncated tail below kEps of the peak.
  const double L = std::sqrt(2.0 * std::log(1.0 / kEps)) + 2.0 * std::sqrt(nd) * std::abs(s) + std::sqrt(nd);
  const std::complex<double> I(0.0, 1.0);
  auto integrand = [&](double u) {
    const std::complex<double> z(u, c);
    return std::exp(-u * u) * (std::pow(z, n) - I * std::sqrt(nd) * f * std::pow(z, n - 1));
  };
  const auto br = numerics::panel_breaks(-L, L, 16);
  const double re = numerics::integrate_split([&](double u) { return integrand(u).real(); }, -L, L, br, 1e-13);
  const double im = numerics::integrate_split([&](double u) { return integrand(u).imag(); }, -L, L, br, 1e-13);
  const std::complex<double> pref = std::pow(-I / std::sqrt(nd), n) / std::sqrt(kPi);
  const std::complex<double> v = pref * std::complex<double>(re, im);
  return {v.real(), v.imag()};
}

/// Real part of the characteristic integral; throws if the imaginary
/// residual exceeds 1e-8 relative to max(1, |real part|).
inline double char_integral_det(int n, double f, double s) {
  if (n < 2) throw DomainError("char_integral_det: requires 2 <= n <= 40");
  const ComplexValue v = char_integral_complex(n, f, s);
  if (std::abs(v.im) > 1e-8 * std::max(1.0, std::abs(v.re)))
    throw std::runtime_error("char_integral_det: imaginary residual " + std::to_string(v.im) + " too large");
  return v.re;
}

struct PrErrorPoint {
  int n;
  double relative_error;
};

namespace detail {

inline double log_ratio_error(SignedLog exact, SignedLog approx) {
  if (exact.sign != approx.sign) return std::abs(exact.value() - approx.value()) / std::abs(approx.value());
  return std::abs(std::expm1(exact.log_abs - approx.log_abs));
}

inline void require_pr_window(double x, const std::vector<int>& ns) {
  if (!(x < -kSqrt2 - 0.05)) throw DomainError("pr_error_curve: requires x < -sqrt(2) - 0.05");
  for (int n : ns)
    if (n < 10) throw DomainError("pr_error_curve: each n must be at least 10");
}

}  // namespace detail

/// |phi_n(sqrt(n) x) - PR_n(x)| / |PR_n(x)| for each n, computed in log space.
inline std::vector<PrErrorPoint> pr_error_curve(double x, const std::vector<int>& ns) {
  detail::require_pr_window(x, ns);
  std::vector<PrErrorPoint> out;
  for (int n : ns) {
    const auto u = static_cast<unsigned>(n);
    out.push_back({n, detail::log_ratio_error(hermite_phi_log(u, std::sqrt(static_cast<double>(n)) * x),
                                              pr_asymptotic_log(u, x))});
  }
  return out;
}

/// Same for the shifted form, phi_{n-1}(sqrt(n) y) against its asymptote.
inline std::vector<PrErrorPoint> pr_shifted_error_curve(double y, const std::vector<int>& ns) {
  detail::require_pr_window(y, ns);
  std::vector<PrErrorPoint> out;
  for (int n : ns) {
    const auto u = static_cast<unsigned>(n);
    out.push_back({n, detail::log_ratio_error(hermite_phi_log(u - 1, std::sqrt(static_cast<double>(n)) * y),
                                              pr_shifted_log(u, y))});
  }
  return out;
}

/// Mean of the conditional Hessian law (size N-1):
///   -lambda sqrt(N) (k-1) m^{k-2} (1-m^2) e e^T + sqrt(N) (-p x + (1 - p/k) lambda m^k) I,
/// with e the last basis vector.
inline Eigen::MatrixXd conditional_hessian_mean(double m, double x, int N, const ModelParams& P) {
  if (N < 2) throw DomainError("conditional_hessian: N must be at least 2");
  detail::require_open_latitude(m, "conditional_hessian");
  const double sN = std::sqrt(static_cast<double>(N));
  const double p = P.pd();
  const double shift = sN * (-p * x + (1.0 - p / P.kd()) * P.lambda() * ipow(m, P.k()));
  Eigen::MatrixXd M = shift * Eigen::MatrixXd::Identity(N - 1, N - 1);
  if (P.k() > 1) M(N - 2, N - 2) -= P.lambda() * sN * (P.kd() - 1.0) * ipow(m, P.k() - 2) * (1.0 - m * m);
  return M;
}

/// Stream of Hessians sqrt(2(N-1)p(p-1)) W_{N-1} + conditional_hessian_mean.
class ConditionalHessianStream {
 public:
  ConditionalHessianStream(double m, double x, int N, const ModelParams& P, std::uint64_t seed)
      : mean_(conditional_hessian_mean(m, x, N, P)),
        scale_(std::sqrt(2.0 * (N - 1.0) * P.pd() * (P.pd() - 1.0))),
        goe_(GoeSpec{N - 1, seed, 0}) {}

  Eigen::MatrixXd next() { return scale_ * goe_.next() + mean_; }

  [[nodiscard]] const Eigen::MatrixXd& mean() const { return mean_; }

 private:
  Eigen::MatrixXd mean_;
  double scale_;
  GoeStream goe_;
};

inline ConditionalHessianStream sample_conditional_hessian(double m, double x, int N, const ModelParams& P,
                                                           std::uint64_t seed) {
  return {m, x, N, P, seed};
}

}  // namespace spiked
