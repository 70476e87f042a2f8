#pragma once

// Direct simulation of the spiked Hamiltonian
//   H(sigma) = -N^{-(p-1)/2} sum J_{i1..ip} sigma_i1 ... sigma_ip - (lambda N / k) m^k,
// sigma on the sphere of radius sqrt N, m = <sigma, v0> / sqrt N, v0 = last axis.
// Instances, spherical derivatives, binary replay blobs, moment checks of the
// rescaled field, multi-start ground-state search, the N = 2 critical-point
// census and Hessian index profiles.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spiked/kac_rice.hpp"
#include "spiked/model.hpp"
#include "spiked/parallel.hpp"
#include "spiked/rng.hpp"

namespace spiked {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Default cap on the number of stored couplings N^p.
inline constexpr double kDefaultCouplingCap = 1e8;

class HamiltonianInstance {
 public:
  /// Builds an instance from couplings in row-major index order (i1 slowest).
  HamiltonianInstance(int N, ModelParams P, std::uint64_t seed, std::vector<double> couplings)
      : N_(N), P_(P), seed_(seed), J_(std::move(couplings)) {
    if (N < 2) throw DomainError("HamiltonianInstance: N must be at least 2");
    if (J_.size() != tensor_size(N, P.p())) throw DomainError("HamiltonianInstance: coupling count must be N^p");
    symmetrize();
  }

  [[nodiscard]] int N() const { return N_; }
  [[nodiscard]] const ModelParams& params() const { return P_; }
  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  /// Couplings exactly as drawn.
  [[nodiscard]] const std::vector<double>& couplings() const { return J_; }
  /// Symmetrized copy used for derivatives; the quadratic form is unchanged.
  [[nodiscard]] const std::vector<double>& symmetric() const { return S_; }

  static std::size_t tensor_size(int N, int p) {
    std::size_t n = 1;
    for (int i = 0; i < p; ++i) n *= static_cast<std::size_t>(N);
    return n;
  }

  /// Normalized overlap <sigma, v0> / sqrt N with v0 the last axis.
  [[nodiscard]] double overlap(const Vec& sigma) const { return sigma(N_ - 1) / std::sqrt(static_cast<double>(N_)); }

  struct Derivatives {
    double value = 0.0;
    Vec grad;  // Euclidean
    Mat hess;  // Euclidean
  };

  /// Euclidean value and derivatives of H at sigma (any point of R^N).
  /// level 0: value, 1: + gradient, 2: + Hessian.
  [[nodiscard]] Derivatives euclidean(const Vec& sigma, int level) const {
    const int p = P_.p();
    const int k = P_.k();
    const double Nd = static_cast<double>(N_);
    const double cN = std::pow(Nd, -0.5 * (p - 1));
    const double spike_c = P_.lambda() * std::pow(Nd, 1.0 - 0.5 * k);  // H_spike = -(spike_c / k) sigma_N^k

    // Contract the symmetric tensor down to a matrix M = S[sigma^{p-2}].
    const std::vector<double>* cur = &S_;
    std::size_t rows = S_.size() / static_cast<std::size_t>(N_);
    for (int order = p; order > 2; --order) {
      buf_.resize(rows);
      Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> T(
          cur->data(), static_cast<Eigen::Index>(rows), N_);
      Eigen::Map<Vec>(buf_.data(), static_cast<Eigen::Index>(rows)) = T * sigma;
      scratch_.swap(buf_);
      cur = &scratch_;
      rows /= static_cast<std::size_t>(N_);
    }
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> M(cur->data(), N_, N_);
    const Vec g = M * sigma;
    const double T_val = sigma.dot(g);
    const double sN = sigma(N_ - 1);

    Derivatives d;
    d.value = -cN * T_val - spike_c / P_.kd() * ipow(sN, k);
    if (level >= 1) {
      d.grad = (-cN * p) * g;
      d.grad(N_ - 1) -= spike_c * ipow(sN, k - 1);
    }
    if (level >= 2) {
      d.hess = (-cN * p * (p - 1)) * M;
      if (k >= 2) d.hess(N_ - 1, N_ - 1) -= spike_c * (k - 1) * ipow(sN, k - 2);
    }
    return d;
  }

 private:
  void symmetrize() {
    const int p = P_.p();
    S_.assign(J_.size(), 0.0);
    std::vector<int> idx(static_cast<std::size_t>(p));
    std::vector<int> perm(static_cast<std::size_t>(p));
    double fact = 1.0;
    for (int i = 2; i <= p; ++i) fact *= i;
    const double w = 1.0 / fact;
    for (std::size_t flat = 0; flat < J_.size(); ++flat) {
      std::size_t r = flat;
      for (int a = p - 1; a >= 0; --a) {
        idx[a] = static_cast<int>(r % static_cast<std::size_t>(N_));
        r /= static_cast<std::size_t>(N_);
      }
      std::iota(perm.begin(), perm.end(), 0);
      const double v = w * J_[flat];
      do {
        std::size_t target = 0;
        for (int a = 0; a < p; ++a) target = target * static_cast<std::size_t>(N_) + static_cast<std::size_t>(idx[perm[a]]);
        S_[target] += v;
      } while (std::next_permutation(perm.begin(), perm.end()));
    }
  }

  int N_;
  ModelParams P_;
  std::uint64_t seed_;
  std::vector<double> J_;
  std::vector<double> S_;
  // Contraction workspace; instances are therefore not shareable across
  // threads during evaluation.
  mutable std::vector<double> buf_;
  mutable std::vector<double> scratch_;
};

/// Draws i.i.d. standard normal couplings for all N^p index tuples.
inline HamiltonianInstance sample_instance(int N, const ModelParams& P, std::uint64_t seed,
                                           double cap = kDefaultCouplingCap) {
  if (N < 2) throw DomainError("sample_instance: N must be at least 2");
  const double count = std::pow(static_cast<double>(N), P.p());
  if (count > cap)
    throw DomainError("sample_instance: N^p = " + std::to_string(count) + " exceeds the coupling budget " +
                      std::to_string(cap) + "; use a smaller N or p");
  std::vector<double> J(HamiltonianInstance::tensor_size(N, P.p()));
  NormalSource src(seed, 0);
  for (double& v : J) v = src();
  return {N, P, seed, std::move(J)};
}

namespace detail {

inline void require_on_sphere(const HamiltonianInstance& inst, const Vec& sigma) {
  const double Nd = static_cast<double>(inst.N());
  if (sigma.size() != inst.N() || std::abs(sigma.squaredNorm() - Nd) > 1e-8 * Nd)
    throw DomainError("landscape: sigma must lie on the sphere |sigma|^2 = N");
}

inline Vec project_tangent(const Vec& sigma, const Vec& v) {
  return v - (v.dot(sigma) / sigma.squaredNorm()) * sigma;
}

}  // namespace detail

inline double eval_h(const HamiltonianInstance& inst, const Vec& sigma) {
  detail::require_on_sphere(inst, sigma);
  return inst.euclidean(sigma, 0).value;
}

/// Spherical gradient: tangent projection of the Euclidean gradient.
inline Vec grad_sphere(const HamiltonianInstance& inst, const Vec& sigma) {
  detail::require_on_sphere(inst, sigma);
  return detail::project_tangent(sigma, inst.euclidean(sigma, 1).grad);
}

/// Covariant Hessian on the sphere of radius sqrt N, as an N x N operator
/// that vanishes on sigma: P hess P - (<grad, sigma> / N) P.
inline Mat hess_sphere(const HamiltonianInstance& inst, const Vec& sigma) {
  detail::require_on_sphere(inst, sigma);
  const auto d = inst.euclidean(sigma, 2);
  const double Nd = static_cast<double>(inst.N());
  const Mat Pr = Mat::Identity(inst.N(), inst.N()) - sigma * sigma.transpose() / Nd;
  return Pr * d.hess * Pr - (d.grad.dot(sigma) / Nd) * Pr;
}

/// Orthonormal basis (columns) of the tangent space at sigma.
inline Mat tangent_basis(const Vec& sigma) {
  const Eigen::Index n = sigma.size();
  Eigen::HouseholderQR<Mat> qr(sigma);
  const Mat Q = qr.householderQ() * Mat::Identity(n, n);
  return Q.rightCols(n - 1);
}

/// Rescaled field on the unit sphere, f(s) = H(sqrt(N) s) / sqrt(N).
inline double rescaled_value(const HamiltonianInstance& inst, const Vec& unit_sigma) {
  const double sN = std::sqrt(static_cast<double>(inst.N()));
  return eval_h(inst, sN * unit_sigma) / sN;
}

// ---------------------------------------------------------------------------
// Binary replay blob: eight 8-byte little-endian header fields (magic,
// version, N, p, k, lambda bits, seed, reserved 0) then the couplings as
// little-endian doubles in row-major index order.

inline constexpr std::uint64_t kBlobMagic = 0x314B495053484D53ULL;  // "SMHSPIK1" read little-endian
inline constexpr std::uint64_t kBlobVersion = 1;

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) throw std::runtime_error("instance blob: truncated input");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline std::uint64_t double_bits(double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  return u;
}

inline double bits_double(std::uint64_t u) {
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}

}  // namespace detail

inline void write_instance(std::ostream& os, const HamiltonianInstance& inst) {
  using detail::put_u64;
  put_u64(os, kBlobMagic);
  put_u64(os, kBlobVersion);
  put_u64(os, static_cast<std::uint64_t>(inst.N()));
  put_u64(os, static_cast<std::uint64_t>(inst.params().p()));
  put_u64(os, static_cast<std::uint64_t>(inst.params().k()));
  put_u64(os, detail::double_bits(inst.params().lambda()));
  put_u64(os, inst.seed());
  put_u64(os, 0);
  for (double v : inst.couplings()) put_u64(os, detail::double_bits(v));
  if (!os) throw std::runtime_error("instance blob: write failed");
}

inline HamiltonianInstance read_instance(std::istream& is, double cap = kDefaultCouplingCap) {
  using detail::get_u64;
  if (get_u64(is) != kBlobMagic) throw std::runtime_error("instance blob: bad magic");
  if (const auto v = get_u64(is); v != kBlobVersion)
    throw std::runtime_error("instance blob: unsupported version " + std::to_string(v));
  const auto N = static_cast<int>(get_u64(is));
  const auto p = static_cast<int>(get_u64(is));
  const auto k = static_cast<int>(get_u64(is));
  const double lambda = detail::bits_double(get_u64(is));
  const std::uint64_t seed = get_u64(is);
  (void)get_u64(is);
  const ModelParams P(p, k, lambda);
  if (N < 2 || std::pow(static_cast<double>(N), p) > cap) throw std::runtime_error("instance blob: bad dimension");
  std::vector<double> J(HamiltonianInstance::tensor_size(N, p));
  for (double& v : J) v = detail::bits_double(get_u64(is));
  return {N, P, seed, std::move(J)};
}

// ---------------------------------------------------------------------------
// Moment checks of the rescaled field at a point of latitude m.

struct MomentCheck {
  std::string name;
  double estimate;
  double target;
  double std_error;
  bool pass;  // within 3 standard errors
};

struct CovarianceReport {
  int N = 0;
  long long samples = 0;
  double m = 0.0;
  std::vector<MomentCheck> checks;
  double worst_entry_z = 0.0;     // largest entrywise |z| over all listed moments
  std::string worst_entry;
  int entries_beyond_3 = 0;       // entrywise |z| > 3
  int entries_total = 0;
  [[nodiscard]] bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const MomentCheck& c) { return c.pass; });
  }
};

/// Samples the rescaled field f and its spherical derivatives at the unit
/// point sigma = m e_N + sqrt(1-m^2) e_{N-1} (overlap m with the spike) and
/// checks the unconditional moments: E f, Var f, E grad f, Cov(grad f),
/// Cov(hess f, f), Cov(f, grad f), Cov(hess f, grad f). The tangent frame is
/// e_1..e_{N-2} followed by t = sqrt(1-m^2) e_N - m e_{N-1}, the direction
/// toward the spike. Entries of one family are pooled into a per-sample
/// average, which keeps the 3-stderr checks few and exact.
inline CovarianceReport covariance_mc(int N, const ModelParams& P, double m, long long samples, std::uint64_t seed) {
  if (N < 3) throw DomainError("covariance_mc: N must be at least 3");
  if (samples < 2) throw DomainError("covariance_mc: need at least two samples");
  detail::require_open_latitude(m, "covariance_mc");
  const int d = N - 1;
  const double sN = std::sqrt(static_cast<double>(N));
  const double s = std::sqrt(1.0 - m * m);
  Vec unit = Vec::Zero(N);
  unit(N - 1) = m;
  unit(N - 2) = s;
  Mat frame = Mat::Zero(N, d);
  for (int i = 0; i < N - 2; ++i) frame(i, i) = 1.0;
  frame(N - 1, d - 1) = s;
  frame(N - 2, d - 1) = -m;
  const Vec big = sN * unit;

  // Per-sample observations: f, grad (d), hess upper triangle in frame.
  std::vector<double> fv(static_cast<std::size_t>(samples));
  Mat G(samples, d);
  std::vector<Mat> Hs(static_cast<std::size_t>(samples));
  for (long long i = 0; i < samples; ++i) {
    // One instance per sample; the substream index is the sample index.
    const auto inst = sample_instance(N, P, detail::mix64(seed ^ detail::mix64(static_cast<std::uint64_t>(i) + 1)));
    const auto dv = inst.euclidean(big, 2);
    fv[i] = dv.value / sN;
    // Euclidean derivatives of f(unit) = H(sqrt N unit)/sqrt N.
    const Vec gE = dv.grad;
    const Mat hE = sN * dv.hess;
    G.row(i) = (frame.transpose() * gE).transpose();
    Hs[i] = frame.transpose() * hE * frame - gE.dot(unit) * Mat::Identity(d, d);
  }

  const double n = static_cast<double>(samples);
  auto mean_of = [&](auto&& get) {
    double acc = 0.0;
    for (long long i = 0; i < samples; ++i) acc += get(i);
    return acc / n;
  };
  const double f_mean = mean_of([&](long long i) { return fv[i]; });
  const Vec g_mean = G.colwise().mean().transpose();
  Mat H_mean = Mat::Zero(d, d);
  for (const auto& h : Hs) H_mean += h;
  H_mean /= n;

  CovarianceReport rep;
  rep.N = N;
  rep.samples = samples;
  rep.m = m;
  auto pooled = [&](const std::string& name, double target, auto&& stat) {
    Moments mo;
    for (long long i = 0; i < samples; ++i) mo.add(stat(i));
    const McEstimate e = mo.estimate();
    rep.checks.push_back({name, e.mean, target, e.std_error, e.within(target, 3.0)});
  };
  auto entry = [&](const std::string& name, double target, auto&& stat) {
    Moments mo;
    for (long long i = 0; i < samples; ++i) mo.add(stat(i));
    const McEstimate e = mo.estimate();
    const double z = e.z_score(target);
    ++rep.entries_total;
    if (z > 3.0) ++rep.entries_beyond_3;
    if (z > rep.worst_entry_z) {
      rep.worst_entry_z = z;
      rep.worst_entry = name;
    }
  };

  const double p = P.pd();
  const double lam = P.lambda();
  const int k = P.k();
  const double Ef = -lam * sN * ipow(m, k) / P.kd();
  const double Eg_t = -sN * lam * ipow(m, k - 1) * s;

  pooled("E[f]", Ef, [&](long long i) { return fv[i]; });
  pooled("Var(f)", 1.0, [&](long long i) { return (fv[i] - f_mean) * (fv[i] - f_mean) * n / (n - 1.0); });
  pooled("E[grad f] along spike direction", Eg_t, [&](long long i) { return G(i, d - 1); });
  pooled("E[grad f] other directions", 0.0, [&](long long i) { return G.row(i).head(d - 1).mean(); });
  pooled("Cov(grad f, grad f) diagonal", p, [&](long long i) {
    return (G.row(i).transpose() - g_mean).squaredNorm() / d * n / (n - 1.0);
  });
  pooled("Cov(grad f, grad f) off-diagonal", 0.0, [&](long long i) {
    const Vec c = G.row(i).transpose() - g_mean;
    double acc = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) acc += c(a) * c(b);
    return acc / (0.5 * d * (d - 1)) * n / (n - 1.0);
  });
  pooled("Cov(hess f, f) diagonal", -p, [&](long long i) {
    return (Hs[i] - H_mean).diagonal().mean() * (fv[i] - f_mean) * n / (n - 1.0);
  });
  pooled("Cov(hess f, f) off-diagonal", 0.0, [&](long long i) {
    const Mat c = Hs[i] - H_mean;
    double acc = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = a + 1; b < d; ++b) acc += c(a, b);
    return acc / (0.5 * d * (d - 1)) * (fv[i] - f_mean) * n / (n - 1.0);
  });
  pooled("Cov(f, grad f)", 0.0, [&](long long i) {
    return (G.row(i).transpose() - g_mean).mean() * (fv[i] - f_mean) * n / (n - 1.0);
  });
  pooled("Cov(hess f, grad f)", 0.0, [&](long long i) {
    const Mat c = Hs[i] - H_mean;
    const Vec g = G.row(i).transpose() - g_mean;
    double acc = 0.0;
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) acc += c(a, b) * g.sum();
    return acc / (0.5 * d * (d + 1) * d) * n / (n - 1.0);
  });

  // Entrywise report (not asserted).
  for (int a = 0; a < d; ++a) {
    entry("E[grad f]_" + std::to_string(a), a == d - 1 ? Eg_t : 0.0, [&](long long i) { return G(i, a); });
    entry("Cov(f, grad f)_" + std::to_string(a), 0.0,
          [&](long long i) { return (G(i, a) - g_mean(a)) * (fv[i] - f_mean); });
    for (int b = a; b < d; ++b) {
      entry("Cov(grad f)_" + std::to_string(a) + std::to_string(b), a == b ? p : 0.0,
            [&](long long i) { return (G(i, a) - g_mean(a)) * (G(i, b) - g_mean(b)); });
      entry("Cov(hess f, f)_" + std::to_string(a) + std::to_string(b), a == b ? -p : 0.0,
            [&](long long i) { return (Hs[i](a, b) - H_mean(a, b)) * (fv[i] - f_mean); });
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Ground-state search.

struct GseOptions {
  int restarts = 200;
  std::optional<double> tol;  // tangent-gradient norm; default 1e-8 sqrt(N)
  int max_iter = 20000;
  double armijo_slope = 1e-4;
  double backtrack = 0.5;
};

struct DescentResult {
  Vec sigma;
  double energy = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Projected gradient descent with Armijo backtracking and retraction by
/// normalization to the sphere of radius sqrt N. The first trial step of
/// each iteration is the Barzilai-Borwein length from the previous move
/// (doubling the last accepted step when the curvature estimate is not
/// positive); backtracking keeps every accepted step monotone.
inline DescentResult descend(const HamiltonianInstance& inst, Vec sigma, const GseOptions& opt) {
  const double Nd = static_cast<double>(inst.N());
  const double sN = std::sqrt(Nd);
  const double tol = opt.tol.value_or(1e-8 * sN);
  auto retract = [&](const Vec& v) -> Vec { return v * (sN / v.norm()); };
  sigma = retract(sigma);
  auto d = inst.euclidean(sigma, 1);
  Vec g = detail::project_tangent(sigma, d.grad);
  double alpha = 1.0 / sN;
  DescentResult r;
  for (int it = 0; it < opt.max_iter; ++it) {
    const double gn2 = g.squaredNorm();
    if (std::sqrt(gn2) < tol) {
      r.converged = true;
      r.iterations = it;
      break;
    }
    // Energy differences below `slack` are rounding noise; near a minimum
    // the gradient can still be well above tol when the decrease is that small.
    const double slack = 1e-13 * (1.0 + std::abs(d.value));
    Vec trial;
    HamiltonianInstance::Derivatives dt;
    for (;;) {
      trial = retract(sigma - alpha * g);
      dt = inst.euclidean(trial, 1);
      if (dt.value <= d.value - opt.armijo_slope * alpha * gn2 + slack) break;
      alpha *= opt.backtrack;
      if (alpha < 1e-300) break;
    }
    if (!(dt.value <= d.value + slack)) {
      r.iterations = it;
      break;
    }
    Vec g_new = detail::project_tangent(trial, dt.grad);
    const Vec ds = trial - sigma;
    const double curv = ds.dot(g_new - g);
    alpha = curv > 0.0 ? std::min(ds.squaredNorm() / curv, 1e6 * sN) : 2.0 * alpha;
    sigma = std::move(trial);
    d = std::move(dt);
    g = std::move(g_new);
    r.iterations = it + 1;
  }
  if (!r.converged && g.norm() < tol) r.converged = true;
  r.sigma = sigma;
  r.energy = d.value;
  return r;
}

struct GseEstimate {
  double energy_per_site = 0.0;
  double overlap = 0.0;  // signed, normalized by N
  int restarts = 0;
  int converged = 0;
  int discarded = 0;
  int best_seed_restart = -1;
};

/// Uniform point on the sphere of radius sqrt N from substream (seed, stream).
inline Vec random_sphere_point(int N, std::uint64_t seed, std::uint64_t stream) {
  NormalSource src(seed, stream);
  Vec v(N);
  for (int i = 0; i < N; ++i) v(i) = src();
  return v * (std::sqrt(static_cast<double>(N)) / v.norm());
}

/// Multi-start ground-state search. Restart r starts from
/// random_sphere_point(N, instance seed, r + 1); restarts that hit the
/// iteration cap are discarded.
inline GseEstimate estimate_gse(const HamiltonianInstance& inst, const GseOptions& opt = {}) {
  if (opt.restarts < 1) throw DomainError("estimate_gse: restarts must be at least 1");
  GseEstimate est;
  est.restarts = opt.restarts;
  double best = kInf;
  Vec best_sigma;
  for (int r = 0; r < opt.restarts; ++r) {
    const Vec start = random_sphere_point(inst.N(), inst.seed(), static_cast<std::uint64_t>(r) + 1);
    const DescentResult d = descend(inst, start, opt);
    if (!d.converged) {
      ++est.discarded;
      continue;
    }
    ++est.converged;
    if (d.energy < best) {
      best = d.energy;
      best_sigma = d.sigma;
      est.best_seed_restart = r;
    }
  }
  if (est.converged == 0) throw std::runtime_error("estimate_gse: no restart converged");
  est.energy_per_site = best / static_cast<double>(inst.N());
  est.overlap = inst.overlap(best_sigma);
  return est;
}

// ---------------------------------------------------------------------------
// N = 2 census. On the circle sigma = sqrt2 (cos t, sin t) the energy is
//   H(t) = -sqrt2 sum_a A_a c^{p-a} s^a - (2 lambda / k) s^k,
// with A_a the sum of couplings having exactly a indices equal to the second
// coordinate; m = sin t and the energy density is H / 2.

struct CriticalPoint {
  double angle;
  double energy_density;
  int index;  // 0 minimum, 1 maximum, -1 degenerate
  double overlap;
};

struct CriticalCensus {
  std::vector<CriticalPoint> all;     // every critical point on the circle
  std::vector<CriticalPoint> window;  // those with overlap in M and energy density in E
  int degenerate = 0;
  [[nodiscard]] int signed_count() const {
    int c = 0;
    for (const auto& cp : window) c += cp.index == 0 ? 1 : (cp.index == 1 ? -1 : 0);
    return c;
  }
};

/// Precomputed monomials c^{p-b} s^b (b = 0..p) and the spike factors on a
/// uniform angle grid; shared by all instances with the same (p, k, grid).
class CircleGrid {
 public:
  CircleGrid(int p, int k, int points) : p_(p), k_(k), points_(points) {
    if (points < 16) throw DomainError("CircleGrid: need at least 16 points");
    mono_.resize(static_cast<std::size_t>(points) * static_cast<std::size_t>(p + 1));
    spike_.resize(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
      const double t = 2.0 * kPi * i / points;
      const double c = std::cos(t);
      const double s = std::sin(t);
      for (int b = 0; b <= p; ++b) mono_[static_cast<std::size_t>(i) * (p + 1) + b] = ipow(c, p - b) * ipow(s, b);
      spike_[i] = ipow(s, k - 1) * c;
    }
  }
  [[nodiscard]] int points() const { return points_; }
  [[nodiscard]] int p() const { return p_; }
  [[nodiscard]] int k() const { return k_; }
  [[nodiscard]] const double* mono(int i) const { return &mono_[static_cast<std::size_t>(i) * (p_ + 1)]; }
  [[nodiscard]] double spike(int i) const { return spike_[i]; }

 private:
  int p_, k_, points_;
  std::vector<double> mono_;
  std::vector<double> spike_;
};

namespace detail {

struct CirclePoly {
  std::vector<double> A;  // A_a, a = 0..p
  int p, k;
  double lambda;

  // dT/dt = sum_b B_b c^{p-b} s^b with B_b = (b+1) A_{b+1} - (p-b+1) A_{b-1}.
  [[nodiscard]] std::vector<double> derivative_coeffs() const {
    std::vector<double> B(static_cast<std::size_t>(p + 1), 0.0);
    for (int b = 0; b <= p; ++b) {
      if (b + 1 <= p) B[b] += (b + 1) * A[b + 1];
      if (b - 1 >= 0) B[b] -= (p - b + 1) * A[b - 1];
    }
    return B;
  }

  [[nodiscard]] double T(double t) const {
    const double c = std::cos(t), s = std::sin(t);
    double v = 0.0;
    for (int a = 0; a <= p; ++a) v += A[a] * ipow(c, p - a) * ipow(s, a);
    return v;
  }
  [[nodiscard]] double H(double t) const { return -kSqrt2 * T(t) - 2.0 * lambda / k * ipow(std::sin(t), k); }

  [[nodiscard]] double dH(double t) const {
    const double c = std::cos(t), s = std::sin(t);
    double dT = 0.0;
    for (int a = 0; a <= p; ++a) {
      double term = 0.0;
      if (a >= 1) term += a * ipow(c, p - a + 1) * ipow(s, a - 1);
      if (a <= p - 1) term -= (p - a) * ipow(c, p - a - 1) * ipow(s, a + 1);
      dT += A[a] * term;
    }
    return -kSqrt2 * dT - 2.0 * lambda * ipow(s, k - 1) * c;
  }

  [[nodiscard]] double d2H(double t) const {
    // d/dt of c^u s^v = -u c^{u-1} s^{v+1} + v c^{u+1} s^{v-1}, applied twice.
    const double c = std::cos(t), s = std::sin(t);
    auto mono = [&](int u, int v) { return (u < 0 || v < 0) ? 0.0 : ipow(c, u) * ipow(s, v); };
    auto d2 = [&](int u, int v) {
      // first derivative terms: -u c^{u-1} s^{v+1} + v c^{u+1} s^{v-1}
      double r = 0.0;
      if (u > 0) r += -u * (-(u - 1) * mono(u - 2, v + 2) + (v + 1) * mono(u, v));
      if (v > 0) r += v * (-(u + 1) * mono(u, v) + (v - 1) * mono(u + 2, v - 2));
      return r;
    };
    double v = 0.0;
    for (int a = 0; a <= p; ++a) v += A[a] * d2(p - a, a);
    return -kSqrt2 * v - 2.0 * lambda / k * d2(0, k);
  }
};

inline CirclePoly circle_poly(const HamiltonianInstance& inst) {
  if (inst.N() != 2) throw DomainError("census_n2: requires N = 2");
  const int p = inst.params().p();
  CirclePoly poly{std::vector<double>(static_cast<std::size_t>(p + 1), 0.0), p, inst.params().k(),
                  inst.params().lambda()};
  const auto& J = inst.couplings();
  for (std::size_t flat = 0; flat < J.size(); ++flat) poly.A[std::popcount(flat)] += J[flat];
  return poly;
}

}  // namespace detail

/// Critical points of H on the circle (N = 2): sign changes of dH/dt on the
/// grid, refined by safeguarded Newton to |step| < 1e-12, classified by the
/// sign of d2H/dt2 (|d2H| < 1e-8 is reported as degenerate).
inline CriticalCensus census_n2(const HamiltonianInstance& inst, Interval M, Interval E, const CircleGrid& grid) {
  const auto poly = detail::circle_poly(inst);
  if (grid.p() != poly.p || grid.k() != poly.k) throw DomainError("census_n2: grid built for another (p, k)");
  const auto B = poly.derivative_coeffs();
  const int K = grid.points();
  auto dH_grid = [&](int i) {
    const double* mono = grid.mono(i % K);
    double v = 0.0;
    for (int b = 0; b <= poly.p; ++b) v += B[b] * mono[b];
    return -kSqrt2 * v - 2.0 * poly.lambda * grid.spike(i % K);
  };
  CriticalCensus out;
  const double h = 2.0 * kPi / K;
  double prev = dH_grid(0);
  for (int i = 1; i <= K; ++i) {
    const double cur = dH_grid(i);
    if (prev == 0.0 || (prev < 0.0) != (cur < 0.0)) {
      if (prev == 0.0 && i > 1) {
        prev = cur;
        continue;  // counted at the previous node
      }
      double lo = (i - 1) * h;
      double hi = i * h;
      double flo = prev;
      double t = prev == 0.0 ? lo : 0.5 * (lo + hi);
      for (int it = 0; it < 100 && prev != 0.0; ++it) {
        const double f = poly.dH(t);
        if (f == 0.0) break;
        if ((f < 0.0) == (flo < 0.0)) {
          lo = t;
          flo = f;
        } else {
          hi = t;
        }
        const double d2 = poly.d2H(t);
        double next = d2 != 0.0 ? t - f / d2 : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - t);
        t = next;
        if (step < 1e-12) break;
      }
      const double d2 = poly.d2H(t);
      CriticalPoint cp{std::fmod(t, 2.0 * kPi), poly.H(t) / 2.0, std::abs(d2) < 1e-8 ? -1 : (d2 > 0.0 ? 0 : 1),
                       std::sin(t)};
      if (cp.index < 0) ++out.degenerate;
      out.all.push_back(cp);
      if (M.contains(cp.overlap) && E.contains(cp.energy_density)) out.window.push_back(cp);
    }
    prev = cur;
  }
  return out;
}

inline CriticalCensus census_n2(const HamiltonianInstance& inst, Interval M, Interval E, int grid_points = 100000) {
  return census_n2(inst, M, E, CircleGrid(inst.params().p(), inst.params().k(), grid_points));
}

/// Monte Carlo E[(Crt_0 - Crt_1)(M, E)] at N = 2 over `instances` draws;
/// instance i uses seed mix(seed, i).
inline McEstimate census_signed_mc(const ModelParams& P, Interval M, Interval E, long long instances,
                                   std::uint64_t seed, int grid_points = 100000, int workers = 1) {
  const CircleGrid grid(P.p(), P.k(), grid_points);
  const std::size_t blocks = block_count(instances);
  const auto parts = parallel_blocks(blocks, workers, [&](std::size_t b) {
    Moments mo;
    const long long begin = static_cast<long long>(b) * kBlockSize;
    const long long end = std::min(instances, begin + kBlockSize);
    for (long long i = begin; i < end; ++i) {
      const auto inst = sample_instance(2, P, detail::mix64(seed ^ detail::mix64(static_cast<std::uint64_t>(i) + 1)));
      mo.add(census_n2(inst, M, E, grid).signed_count());
    }
    return mo;
  });
  return merge_pairwise(parts).estimate();
}

// ---------------------------------------------------------------------------
// Hessian index profile at located critical points (small N).

struct IndexProfile {
  std::vector<long long> histogram;  // histogram[i] = points of index i
  long long points = 0;
  [[nodiscard]] double fraction(int index) const {
    return points == 0 ? 0.0 : static_cast<double>(histogram[static_cast<std::size_t>(index)]) / static_cast<double>(points);
  }
};

/// Number of negative eigenvalues of the tangent Hessian, with cutoff
/// 1e-8 * scale (scale = largest |eigenvalue|, at least 1).
inline int hessian_index(const HamiltonianInstance& inst, const Vec& sigma) {
  const Mat Q = tangent_basis(sigma);
  const Mat Ht = Q.transpose() * hess_sphere(inst, sigma) * Q;
  Eigen::SelfAdjointEigenSolver<Mat> es(Ht, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  int idx = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < -1e-8 * scale) ++idx;
  return idx;
}

/// Riemannian Newton iteration for a critical point of any index.
inline std::optional<Vec> newton_critical(const HamiltonianInstance& inst, Vec sigma, int max_iter = 100) {
  const double sN = std::sqrt(static_cast<double>(inst.N()));
  for (int it = 0; it < max_iter; ++it) {
    const Vec g = grad_sphere(inst, sigma);
    if (g.norm() < 1e-9 * sN) return sigma;
    const Mat Q = tangent_basis(sigma);
    const Mat Ht = Q.transpose() * hess_sphere(inst, sigma) * Q;
    const Vec step = Ht.ldlt().solve(-(Q.transpose() * g));
    if (!step.allFinite()) return std::nullopt;
    Vec next = sigma + Q * step;
    sigma = next * (sN / next.norm());
  }
  if (grad_sphere(inst, sigma).norm() < 1e-9 * sN) return sigma;
  return std::nullopt;
}

/// Locates critical points by gradient descent (minima) and Newton from
/// random starts (any index), keeps distinct points with energy density in
/// the window, and histograms their Hessian index.
inline IndexProfile index_profile(const std::vector<HamiltonianInstance>& batch, Interval energy_window,
                                  int starts_per_instance = 40) {
  IndexProfile prof;
  for (const auto& inst : batch) {
    if (inst.N() > 12) throw DomainError("index_profile: requires N <= 12");
    prof.histogram.resize(static_cast<std::size_t>(inst.N()), 0);
    const double sN = std::sqrt(static_cast<double>(inst.N()));
    std::vector<Vec> found;
    auto consider = [&](const Vec& s) {
      for (const auto& f : found)
        if ((f - s).norm() < 1e-6 * sN) return;
      found.push_back(s);
    };
    GseOptions opt;
    opt.tol = 1e-9 * sN;
    for (int r = 0; r < starts_per_instance; ++r) {
      const Vec start = random_sphere_point(inst.N(), inst.seed(), 1000000u + static_cast<std::uint64_t>(r));
      const auto d = descend(inst, start, opt);
      if (d.converged) consider(d.sigma);
      if (const auto c = newton_critical(inst, start)) consider(*c);
    }
    for (const auto& s : found) {
      const double x = eval_h(inst, s) / static_cast<double>(inst.N());
      if (!energy_window.contains(x)) continue;
      ++prof.histogram[static_cast<std::size_t>(hessian_index(inst, s))];
      ++prof.points;
    }
  }
  return prof;
}

}  // namespace spiked
