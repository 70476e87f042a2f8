// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "spiked/kac_rice.hpp"
#include "spiked/landscape.hpp"
#include "spiked/rmt_mc.hpp"
#include "spiked/thresholds.hpp"

using namespace spiked;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome c1_thresholds() {
  struct Row { const char* name; double got; double want; };
  const auto tr33 = lambda_tr(3, 3).lambda_tr;
  const auto tr43 = lambda_tr(4, 3).lambda_tr;
  const std::vector<Row> rows{{"lambda2(3,1)", lambda2(3, 1), 1.732}, {"lambda2(3,2)", lambda2(3, 2), 2.449},
                              {"lambda1(3,3)", lambda1(3, 3), 3.464}, {"lambda2(3,3)", lambda2(3, 3), 3.464},
                              {"lambda_tr(3,3)", tr33, 3.619},        {"lambda1(4,3)", lambda1(4, 3), 4.000},
                              {"lambda2(4,3)", lambda2(4, 3), 4.243}, {"lambda_tr(4,3)", tr43, 4.243}};
  bool ok = true;
  double worst = 0.0;
  std::string bad;
  for (const auto& r : rows) {
    const double d = std::abs(r.got - r.want);
    worst = std::max(worst, d);
    if (!(d <= 2e-3)) {
      ok = false;
      bad += fmt(" %s=%.5f", r.name, r.got);
    }
  }
  return {ok, fmt("max |deviation| %.2e over 8 values", worst) + bad};
}

Outcome c2_trivialization() {
  bool ok = true;
  std::string d;
  for (auto [p, k] : {std::pair{3, 1}, {3, 2}, {3, 3}, {4, 3}}) {
    const double e3 = std::abs(constant_c(ModelParams(p, k, 1e3)) - 1.0);
    const double e4 = std::abs(constant_c(ModelParams(p, k, 1e4)) - 1.0);
    // C is identically 1 up to rounding; a strict decrease between two
    // rounding-level residuals carries no information, so both at the
    // noise floor counts as converged.
    const bool strict = e4 < e3;
    const bool floor = e3 < 1e-12 && e4 < 1e-12;
    ok = ok && e3 < 0.05 && (strict || floor);
    d += fmt(" (%d,%d): |C(1e3)-1|=%.1e |C(1e4)-1|=%.1e%s", p, k, e3, e4,
             strict ? "" : (floor ? " [strict decrease not met; both at rounding floor]" : ""));
  }
  return {ok, d.substr(1)};
}

Outcome c3_determinants() {
  const std::vector<double> thetas{0.0, 0.5, 2.0}, ys{1.6, 2.2, 4.0};
  int fails = 0, total = 0;
  double worst_z = 0.0, worst_ci = 0.0;
  for (int n = 1; n <= 10; ++n) {
    std::vector<DetConfig> cfg;
    for (double t : thetas)
      for (double y : ys) cfg.push_back({t, y});
    const auto est = mc_expected_det_grid(GoeSpec{n, 20241000u + static_cast<std::uint64_t>(n), 1000000}, cfg);
    for (std::size_t i = 0; i < cfg.size(); ++i) {
      const double exact = expected_det_rank1(n, cfg[i].theta, cfg[i].y).value();
      ++total;
      if (!est[i].within(exact)) ++fails;
      // Antithetic pairs at odd n, theta = 0 have zero variance; their z is meaningless.
      if (est[i].std_error > 1e-10 * std::max(1.0, std::abs(exact))) worst_z = std::max(worst_z, est[i].z_score(exact));
      if (n >= 2) {  // the characteristic integral is defined for n >= 2
        const double ci = char_integral_det(n, cfg[i].theta, -cfg[i].y);
        worst_ci = std::max(worst_ci, std::abs(ci - exact) / std::max(1.0, std::abs(exact)));
      }
    }
  }
  return {fails == 0 && worst_ci <= 1e-8,
          fmt("%d/%d MC configs within 3 stderr (max z %.2f); char_integral (n=2..10) max rel diff %.1e", total - fails, total,
              worst_z, worst_ci)};
}

Outcome c4_pr() {
  const std::vector<int> ns{50, 100, 200, 400};
  const auto a = pr_error_curve(-2.0, ns);
  const auto b = pr_shifted_error_curve(-2.0, ns);
  bool ok = true;
  std::string d = "ratios";
  for (const auto* curve : {&a, &b}) {
    for (std::size_t i = 1; i < ns.size(); ++i) {
      const double r = (*curve)[i].relative_error / (*curve)[i - 1].relative_error;
      ok = ok && r >= 0.3 && r <= 0.8;
      d += fmt(" %.3f", r);
    }
    if (curve == &a) d += " | shifted";
  }
  return {ok, d};
}

Outcome c5_covariance() {
  // Spike strengths: one per (p, k), fixed before any run.
  struct Cfg { int p, k; double lambda; };
  const std::vector<Cfg> cfgs{{3, 1, 2.0}, {3, 2, 6.0}, {4, 3, 5.0}};
  bool ok = true;
  int checks = 0, passed = 0;
  std::string bad;
  for (const auto& c : cfgs)
    for (double m : {0.3, 0.7}) {
      const auto rep = covariance_mc(6, ModelParams(c.p, c.k, c.lambda), m, 100000, 555u);
      for (const auto& ch : rep.checks) {
        ++checks;
        if (ch.pass) {
          ++passed;
        } else {
          ok = false;
          bad += fmt(" [(%d,%d) m=%.1f %s z=%.2f]", c.p, c.k, m, ch.name.c_str(),
                     std::abs(ch.estimate - ch.target) / ch.std_error);
        }
      }
    }
  return {ok, fmt("%d/%d pooled moment checks within 3 stderr", passed, checks) + bad};
}

Outcome c6_census() {
  const ModelParams P(3, 2, 6.0);
  const CountWindow w{{0.3, 0.99}, {-5.0, -2.7}};
  const double exact = expected_euler_char(w, 2, P, 1e-10);
  const auto mc = census_signed_mc(P, w.M, w.E, 100000, 6060u);
  return {mc.within(exact),
          fmt("MC %.5f +- %.5f vs Kac-Rice %.6f (z %.2f)", mc.mean, mc.std_error, exact, mc.z_score(exact))};
}

Outcome c7_gse() {
  const ModelParams P(3, 2, 10.0);
  const auto pred = gse_predict(P);
  double e = 0.0, o = 0.0;
  int discarded = 0;
  const int instances = 20;
  for (int i = 0; i < instances; ++i) {
    const auto est = estimate_gse(sample_instance(64, P, 7000u + static_cast<std::uint64_t>(i)), GseOptions{});
    e += est.energy_per_site / instances;
    // For even k the law is invariant under sigma -> -sigma on the spike
    // axis, so the overlap is compared in absolute value.
    o += std::abs(est.overlap) / instances;
    discarded += est.discarded;
  }
  const bool ok = std::abs(e - pred.x_star) <= 0.05 * std::abs(pred.x_star) && std::abs(o - pred.m_star) <= 0.05;
  return {ok, fmt("energy %.4f vs %.4f, overlap %.4f vs %.5f, %d restarts discarded", e, pred.x_star, o, pred.m_star,
                  discarded)};
}

Outcome c8_identities() {
  std::mt19937_64 rng(8080);
  double worst_s = 0.0, worst_j = 0.0, worst_x = 0.0;
  for (auto [p, k] : {std::pair{3, 1}, {3, 2}, {3, 3}, {4, 3}}) {
    const double l2 = lambda2(p, k);
    std::uniform_real_distribution<double> U(l2, 10.0 * l2);
    for (int i = 0; i < 100; ++i) {
      const ModelParams P(p, k, U(rng));
      const auto g = gse_predict(P);
      const double ms = detail::clip_latitude(g.m_star);
      worst_s = std::max(worst_s, std::abs(s_tilde(ms, g.y_star, P)));
      worst_j = std::max(worst_j, std::abs(j_factor(ms, g.y_star, P) - 1.0));
      worst_x = std::max(worst_x, std::abs(g.x_star - g.gse_alt_form));
    }
  }
  return {worst_s <= 1e-10 && worst_j <= 1e-10 && worst_x <= 1e-10,
          fmt("max |S~(m*,y*)| %.1e, max |J-1| %.1e, max |x* - alt| %.1e over 400 lambdas", worst_s, worst_j, worst_x)};
}

Outcome c9_tower() {
  const ModelParams P(3, 2, 6.0);
  const double xs = x_star(P);
  const CountWindow w{{0.90, 0.99}, {xs - 0.6, xs + 0.55}};
  auto gap = [&](int N) {
    const auto t = term_integrals(w, N, P);
    return std::abs((t.term_I + t.term_II) / sharp_asymptotic(w, N, P) - 1.0);
  };
  const double g200 = gap(200), g400 = gap(400);
  const auto t100 = term_integrals(w, 100, P);
  const double exact = expected_euler_char(w, 100, P);
  const double rel = std::abs((t100.term_I + t100.term_II) / exact - 1.0);
  return {g400 < g200 && rel <= 0.10,
          fmt("gap N=200 %.3e, N=400 %.3e; exact vs terms at N=100 rel %.3e", g200, g400, rel)};
}

Outcome c10_low_latitude() {
  const double tr = lambda_tr(3, 3).lambda_tr;
  const double above = low_latitude_sup(ModelParams(3, 3, tr + 0.1)).sup;
  const double below = low_latitude_sup(ModelParams(3, 3, tr - 0.1)).sup;
  return {above < 0.0 && below > 0.0, fmt("lambda_tr %.5f: sup %.3e at +0.1, %.3e at -0.1", tr, above, below)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> all{
      {"1 threshold table", c1_thresholds},   {"2 trivialization limit", c2_trivialization},
      {"3 determinant suite", c3_determinants}, {"4 Plancherel-Rotach decay", c4_pr},
      {"5 covariance suite", c5_covariance},  {"6 N=2 census", c6_census},
      {"7 ground-state energy", c7_gse},      {"8 complexity identities", c8_identities},
      {"9 asymptotic tower", c9_tower},       {"10 low-latitude sign", c10_low_latitude}};
  int failed = 0;
  for (const auto& [name, run] : all) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(all.size()) - failed, all.size());
  return failed == 0 ? 0 : 1;
}
