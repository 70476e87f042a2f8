// spiked: command-line front end for the spiked tensor landscape library.
//
//   spiked surface    --p 3 --k 3 --lambdas 3.5,3.619,4
//   spiked thresholds --p 3 --k 3
//   spiked count      --p 3 --k 2 --lambda 6 --N 100 --m-lo 0.9 --m-hi 0.99 --e-lo -3.85 --e-hi -2.7
//   spiked gse        --p 3 --k 2 --lambda 10 --simulate --N 64
//   spiked validate   --suite pr,charint
//   spiked sweep-c    --p 3 --k 3 --c-ceiling 1000
//
// Options may come from a flat key = value file (--config); flags on the
// command line win. Exit codes: 0 ok, 1 validation failure, 2 usage/domain error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "spiked/hermite.hpp"
#include "spiked/kac_rice.hpp"
#include "spiked/landscape.hpp"
#include "spiked/numerics.hpp"
#include "spiked/parallel.hpp"
#include "spiked/rmt_mc.hpp"
#include "spiked/scalar_core.hpp"
#include "spiked/thresholds.hpp"

using nlohmann::json;
using namespace spiked;

namespace {

constexpr int kSchemaVersion = 1;

struct RunConfig {
  int p = 3;
  int k = 2;
  std::optional<double> lambda;
  std::vector<double> lambdas;
  std::string lambda_range;  // lo:hi:count, log-spaced
  std::optional<int> N;
  std::uint64_t seed = 1;
  std::optional<long long> samples;
  int restarts = 200;
  int instances = 20;
  std::optional<double> m_lo, m_hi, e_lo, e_hi;
  std::string format = "json";
  std::string output;
  std::optional<int> workers;
  double rel_tol = 1e-6;
  int m_points = 201;
  bool simulate = false;
  bool no_exact = false;
  std::vector<std::string> suites;
  double c_floor = 0.0;
  double c_ceiling = 1e3;
  int points = 25;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json config_json(const RunConfig& c, const std::string& command) {
  json j;
  j["command"] = command;
  j["p"] = c.p;
  j["k"] = c.k;
  if (c.lambda) j["lambda"] = *c.lambda;
  if (!c.lambdas.empty()) j["lambdas"] = c.lambdas;
  if (!c.lambda_range.empty()) j["lambda_range"] = c.lambda_range;
  if (c.N) j["N"] = *c.N;
  j["seed"] = c.seed;
  if (c.samples) j["samples"] = *c.samples;
  j["restarts"] = c.restarts;
  j["instances"] = c.instances;
  if (c.m_lo) j["window"] = {{"M", {*c.m_lo, *c.m_hi}}, {"E", {*c.e_lo, *c.e_hi}}};
  j["format"] = c.format;
  j["workers"] = resolve_workers(c.workers);
  j["rel_tol"] = c.rel_tol;
  j["m_points"] = c.m_points;
  j["simulate"] = c.simulate;
  if (!c.suites.empty()) j["suites"] = c.suites;
  if (command == "sweep-c") {
    j["c_floor"] = c.c_floor;
    j["c_ceiling"] = c.c_ceiling;
    j["points"] = c.points;
  }
  return j;
}

double require_lambda(const RunConfig& c) {
  if (!c.lambda) throw UsageError("--lambda is required for this command");
  if (!c.lambdas.empty() || !c.lambda_range.empty())
    throw UsageError("this command takes a single --lambda, not a sweep");
  return *c.lambda;
}

std::vector<double> lambda_list(const RunConfig& c) {
  const int given = (c.lambda ? 1 : 0) + (c.lambdas.empty() ? 0 : 1) + (c.lambda_range.empty() ? 0 : 1);
  if (given != 1) throw UsageError("give exactly one of --lambda, --lambdas, --lambda-range");
  if (c.lambda) return {*c.lambda};
  if (!c.lambdas.empty()) return c.lambdas;
  double lo = 0, hi = 0;
  int n = 0;
  char c1 = 0, c2 = 0;
  std::istringstream is(c.lambda_range);
  if (!(is >> lo >> c1 >> hi >> c2 >> n) || c1 != ':' || c2 != ':' || n < 2 || !(lo > 0) || !(hi > lo))
    throw UsageError("--lambda-range must be lo:hi:count with 0 < lo < hi and count >= 2");
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo * std::pow(hi / lo, i / (n - 1.0)));
  return out;
}

CountWindow require_window(const RunConfig& c) {
  if (!c.m_lo || !c.m_hi || !c.e_lo || !c.e_hi) throw UsageError("--m-lo, --m-hi, --e-lo, --e-hi are required");
  return {{*c.m_lo, *c.m_hi}, {*c.e_lo, *c.e_hi}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// --------------------------------------------------------------------------

json cmd_surface(const RunConfig& c) {
  if (c.m_points < 2) throw UsageError("--m-points must be at least 2");
  json rows = json::array();
  json curves = json::array();
  for (double lam : lambda_list(c)) {
    const ModelParams P(c.p, c.k, lam);
    const double xs = x_star(P);
    const double ml = m_lambda(P);
    double low_max = -kInf;
    for (int i = 0; i < c.m_points; ++i) {
      const double m = std::min(static_cast<double>(i) / (c.m_points - 1), 1.0 - 1e-12);
      const double S = s(m, xs, P);
      const bool low = m <= ml;
      if (low) low_max = std::max(low_max, S);
      rows.push_back({{"lambda", lam}, {"m", m}, {"S", S}, {"in_low_latitude", low ? 1 : 0}});
    }
    curves.push_back({{"lambda", lam}, {"x_star", xs}, {"m_lambda", ml}, {"grid_max_low_latitude", low_max},
                      {"low_latitude_sup", low_latitude_sup(P).sup}});
  }
  return {{"rows", rows}, {"curves", curves}};
}

json cmd_thresholds(const RunConfig& c) {
  const ModelParams check(c.p, c.k, 1.0);  // validates p, k
  (void)check;
  const ThresholdReport r = lambda_tr(c.p, c.k);
  return {{"p", r.p},
          {"k", r.k},
          {"lambda1", r.lambda1},
          {"lambda2", r.lambda2},
          {"lambda_tr", r.lambda_tr},
          {"m_star", r.m_star},
          {"x_star", r.x_star},
          {"y_star", r.y_star},
          {"monotonicity_verified", r.monotonicity_verified},
          {"monotonicity_grid", r.monotonicity_grid}};
}

json cmd_count(const RunConfig& c) {
  const ModelParams P(c.p, c.k, require_lambda(c));
  const CountWindow w = require_window(c);
  w.validate(P);
  json out;
  const Saddle sd = saddle(w, P);
  out["saddle_m"] = sd.m_o;
  out["saddle_y"] = sd.y_o;
  out["rate"] = sd.rate;
  const auto ms = m_star(P);
  std::optional<double> C;
  if (ms && P.lambda() >= lambda2(P.p(), P.k()) && w.M.contains(*ms) && w.E.contains(x_star(P))) C = constant_c(P);
  out["constant_C"] = opt_json(C);
  if (c.N) {
    if (*c.N < 2) throw UsageError("--N must be at least 2");
    const KacRiceResult r = kac_rice(w, *c.N, P, !c.no_exact, c.rel_tol);
    out["N"] = *c.N;
    out["term_I"] = r.term_I;
    out["term_II"] = r.term_II;
    out["euler_char"] = opt_json(r.euler_char_exact);
    out["sharp_value"] = opt_json(r.sharp_value);
  }
  return out;
}

json cmd_gse(const RunConfig& c) {
  const ModelParams P(c.p, c.k, require_lambda(c));
  const GsePrediction g = gse_predict(P);
  json out{{"prediction",
            {{"m_star", g.m_star},
             {"x_star", g.x_star},
             {"gse_alt_form", g.gse_alt_form},
             {"y_star", g.y_star},
             {"y_star_alt", g.y_star_alt}}}};
  if (c.simulate) {
    const int N = c.N.value_or(64);
    if (c.instances < 1 || c.restarts < 1) throw UsageError("--instances and --restarts must be positive");
    GseOptions opt;
    opt.restarts = c.restarts;
    const auto per = parallel_blocks(static_cast<std::size_t>(c.instances), resolve_workers(c.workers), [&](std::size_t i) {
      const auto inst = sample_instance(N, P, detail::mix64(c.seed ^ detail::mix64(i + 1)));
      return estimate_gse(inst, opt);
    });
    Moments e, ov, aov;
    int discarded = 0;
    for (const auto& r : per) {
      e.add(r.energy_per_site);
      ov.add(r.overlap);
      aov.add(std::abs(r.overlap));
      discarded += r.discarded;
    }
    const McEstimate E = e.estimate(), A = aov.estimate(), O = ov.estimate();
    out["simulated"] = {{"N", N},
                        {"instances", c.instances},
                        {"restarts", c.restarts},
                        {"energy_per_site", E.mean},
                        {"energy_std_error", E.std_error},
                        {"abs_overlap", A.mean},
                        {"abs_overlap_std_error", A.std_error},
                        {"overlap", O.mean},
                        {"discarded_restarts", discarded}};
    out["discrepancy"] = {{"energy_relative", (E.mean - g.x_star) / std::abs(g.x_star)},
                          {"abs_overlap", A.mean - g.m_star}};
  }
  return out;
}

// Validation suites --------------------------------------------------------

json suite_hermite(const RunConfig&) {
  // Orthonormality of phi_n and the n = 1, 2 closed forms of the rank-one determinant.
  double worst = 0.0;
  for (unsigned n = 0; n <= 20; ++n) {
    const double L = std::sqrt(2.0 * n + 1.0) + 12.0;
    const double v = numerics::integrate_split([&](double x) { return std::pow(hermite_phi(n, x), 2); }, -L, L,
                                               numerics::panel_breaks(-L, L, 32), 1e-12);
    worst = std::max(worst, std::abs(v - 1.0));
  }
  double det_err = 0.0;
  for (double th : {0.0, 0.5, 2.0})
    for (double y : {1.6, 2.2, 4.0}) {
      det_err = std::max(det_err, std::abs(expected_det_rank1(1, th, y).value() - (-th - y)));
      // n = 2: (th + y) y - E[W12^2] with E[W12^2] = 1/4.
      det_err = std::max(det_err, std::abs(expected_det_rank1(2, th, y).value() - (y * y + th * y - 0.25)));
    }
  const bool pass = worst < 1e-9 && det_err < 1e-12;
  return {{"pass", pass}, {"orthonormality_max_error", worst}, {"closed_form_max_error", det_err}};
}

json suite_rank1(const RunConfig& c) {
  const long long samples = c.samples.value_or(100000);
  std::vector<DetConfig> cfg;
  for (double th : {0.0, 0.5, 2.0})
    for (double y : {1.6, 2.2, 4.0}) cfg.push_back({th, y});
  json rows = json::array();
  bool pass = true;
  for (int n = 1; n <= 10; ++n) {
    const auto est = mc_expected_det_grid({n, c.seed, samples}, cfg, resolve_workers(c.workers));
    for (std::size_t i = 0; i < cfg.size(); ++i) {
      const double exact = expected_det_rank1(n, cfg[i].theta, cfg[i].y).value();
      const bool ok = est[i].within(exact, 3.0);
      pass = pass && ok;
      rows.push_back({{"n", n}, {"theta", cfg[i].theta}, {"y", cfg[i].y}, {"mc_mean", est[i].mean},
                      {"std_error", est[i].std_error}, {"exact", exact}, {"pass", ok}});
    }
  }
  return {{"pass", pass}, {"samples", samples}, {"rows", rows}};
}

json suite_charint(const RunConfig&) {
  double worst = 0.0;
  for (int n = 2; n <= 10; ++n)
    for (double th : {0.0, 0.5, 2.0})
      for (double y : {1.6, 2.2, 4.0}) {
        const double exact = expected_det_rank1(n, th, y).value();
        const double v = char_integral_det(n, th, -y);
        worst = std::max(worst, std::abs(v - exact) / std::max(1.0, std::abs(exact)));
      }
  return {{"pass", worst < 1e-8}, {"max_relative_error", worst}};
}

json suite_pr(const RunConfig&) {
  const std::vector<int> ns{50, 100, 200, 400};
  json out;
  bool pass = true;
  auto table = [&](const std::vector<PrErrorPoint>& pts) {
    json rows = json::array();
    for (std::size_t i = 0; i < pts.size(); ++i) {
      json r{{"n", pts[i].n}, {"relative_error", pts[i].relative_error}};
      if (i > 0) {
        const double ratio = pts[i].relative_error / pts[i - 1].relative_error;
        r["ratio"] = ratio;
        pass = pass && ratio >= 0.3 && ratio <= 0.8;
      }
      rows.push_back(r);
    }
    return rows;
  };
  out["phi"] = table(pr_error_curve(-2.0, ns));
  out["shifted"] = table(pr_shifted_error_curve(-2.0, ns));
  out["pass"] = pass;
  return out;
}

json suite_covariance(const RunConfig& c) {
  const long long samples = c.samples.value_or(100000);
  const CovarianceReport r = covariance_mc(6, ModelParams(3, 2, 6.0), 0.5, samples, c.seed);
  json checks = json::array();
  for (const auto& ch : r.checks)
    checks.push_back({{"moment", ch.name}, {"estimate", ch.estimate}, {"target", ch.target},
                      {"std_error", ch.std_error}, {"pass", ch.pass}});
  return {{"pass", r.all_pass()}, {"samples", samples}, {"checks", checks},
          {"worst_entry", r.worst_entry}, {"worst_entry_z", r.worst_entry_z}};
}

json suite_census(const RunConfig& c) {
  const long long instances = c.samples.value_or(20000);
  const ModelParams P(3, 2, 6.0);
  const CountWindow w{{0.3, 0.99}, {-5.0, -2.7}};
  const double exact = expected_euler_char(w, 2, P, 1e-10);
  const McEstimate est = census_signed_mc(P, w.M, w.E, instances, c.seed, 100000, resolve_workers(c.workers));
  return {{"pass", est.within(exact, 3.0)}, {"instances", instances}, {"mc_mean", est.mean},
          {"std_error", est.std_error}, {"exact", exact}};
}

json cmd_validate(const RunConfig& c) {
  static const std::vector<std::string> all{"hermite", "rank1", "charint", "pr", "covariance", "census"};
  std::vector<std::string> suites = c.suites.empty() ? all : c.suites;
  for (const auto& s : suites)
    if (std::find(all.begin(), all.end(), s) == all.end()) throw UsageError("unknown suite '" + s + "'");
  json out;
  bool pass = true;
  for (const auto& s : suites) {
    json r;
    if (s == "hermite") r = suite_hermite(c);
    else if (s == "rank1") r = suite_rank1(c);
    else if (s == "charint") r = suite_charint(c);
    else if (s == "pr") r = suite_pr(c);
    else if (s == "covariance") r = suite_covariance(c);
    else r = suite_census(c);
    pass = pass && r["pass"].get<bool>();
    out["suites"][s] = r;
  }
  out["pass"] = pass;
  return out;
}

json cmd_sweep_c(const RunConfig& c) {
  const ModelParams check(c.p, c.k, 1.0);
  (void)check;
  if (c.points < 2) throw UsageError("--points must be at least 2");
  const double l2 = lambda2(c.p, c.k);
  double lo = c.c_floor;
  json out;
  if (lo < l2) {
    if (c.c_floor > 0.0)
      std::cerr << "warning: --c-floor " << c.c_floor << " is below lambda2 = " << l2 << "; clipped\n";
    lo = l2;
    out["clipped_floor"] = true;
  }
  if (!(c.c_ceiling > lo)) throw UsageError("--c-ceiling must exceed max(lambda2, --c-floor)");
  json rows = json::array();
  for (int i = 0; i < c.points; ++i) {
    const double lam = lo * std::pow(c.c_ceiling / lo, i / (c.points - 1.0));
    rows.push_back({{"lambda", lam}, {"C", constant_c(ModelParams(c.p, c.k, lam))}});
  }
  out["lambda2"] = l2;
  out["rows"] = rows;
  return out;
}

// Output -------------------------------------------------------------------

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_cell(const json& v) {
  if (v.is_number_float()) return fmt17(v.get<double>());
  if (v.is_number()) return v.dump();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  return "\"" + v.dump() + "\"";
}

// Flattens nested objects into dotted keys; arrays of objects are skipped.
void flatten(const json& j, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) flatten(*it, key, out);
    else if (it->is_array() && !it->empty() && (*it)[0].is_object()) continue;
    else out.emplace_back(key, *it);
  }
}

std::string to_csv(const json& result) {
  std::ostringstream os;
  if (result.contains("rows") && result["rows"].is_array() && !result["rows"].empty()) {
    const json& rows = result["rows"];
    std::vector<std::string> cols;
    for (auto it = rows[0].begin(); it != rows[0].end(); ++it) cols.push_back(it.key());
    // Keep the documented column order where it exists.
    const std::vector<std::string> preferred{"lambda", "m", "S", "in_low_latitude", "n", "theta", "y"};
    std::vector<std::string> ordered;
    for (const auto& p : preferred)
      if (std::find(cols.begin(), cols.end(), p) != cols.end()) ordered.push_back(p);
    for (const auto& cname : cols)
      if (std::find(ordered.begin(), ordered.end(), cname) == ordered.end()) ordered.push_back(cname);
    for (std::size_t i = 0; i < ordered.size(); ++i) os << (i ? "," : "") << ordered[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < ordered.size(); ++i) os << (i ? "," : "") << csv_cell(r.value(ordered[i], json()));
      os << "\n";
    }
    return os.str();
  }
  std::vector<std::pair<std::string, json>> flat;
  flatten(result, "", flat);
  for (std::size_t i = 0; i < flat.size(); ++i) os << (i ? "," : "") << flat[i].first;
  os << "\n";
  for (std::size_t i = 0; i < flat.size(); ++i) os << (i ? "," : "") << csv_cell(flat[i].second);
  os << "\n";
  return os.str();
}

void emit(const RunConfig& c, const std::string& command, const json& result) {
  std::string text;
  if (c.format == "csv") {
    text = to_csv(result);
  } else {
    json doc{{"schema_version", kSchemaVersion}, {"config", config_json(c, command)}, {"result", result}};
    text = doc.dump(2) + "\n";
  }
  if (c.output.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(c.output);
    if (!f) throw std::runtime_error("cannot open " + c.output);
    f << text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiked tensor landscape: complexity, thresholds, Kac-Rice counts, ground states"};
  app.set_config("--config", "", "Flat key = value file; command-line flags override it");
  app.require_subcommand(1);
  RunConfig c;

  app.add_option("--p", c.p, "Tensor order p >= 3");
  app.add_option("--k", c.k, "Spike order k >= 1");
  app.add_option("--lambda", c.lambda, "Signal strength");
  app.add_option("--lambdas", c.lambdas, "Comma-separated lambda list (surface)")->delimiter(',');
  app.add_option("--lambda-range", c.lambda_range, "lo:hi:count, log-spaced (surface)");
  app.add_option("--N", c.N, "Dimension");
  app.add_option("--seed", c.seed, "Master seed");
  app.add_option("--samples", c.samples, "Monte Carlo sample count (validate)");
  app.add_option("--restarts", c.restarts, "Descent restarts per instance (gse)");
  app.add_option("--instances", c.instances, "Sampled instances (gse)");
  app.add_option("--m-lo", c.m_lo, "Latitude window lower end");
  app.add_option("--m-hi", c.m_hi, "Latitude window upper end");
  app.add_option("--e-lo", c.e_lo, "Energy window lower end");
  app.add_option("--e-hi", c.e_hi, "Energy window upper end");
  app.add_option("--format", c.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--output", c.output, "Write to this file instead of stdout");
  app.add_option("--workers", c.workers, "Worker threads (default: SPIKED_WORKERS, else hardware)");
  app.add_option("--rel-tol", c.rel_tol, "Quadrature relative tolerance");
  app.add_option("--m-points", c.m_points, "Latitude grid size (surface)");
  app.add_flag("--simulate", c.simulate, "Also run the ground-state search (gse)");
  app.add_flag("--no-exact", c.no_exact, "Skip the exact Euler characteristic (count)");
  app.add_option("--suite", c.suites, "Validation suites: hermite, rank1, charint, pr, covariance, census")
      ->delimiter(',');
  app.add_option("--c-floor", c.c_floor, "Lowest lambda for sweep-c (clipped to lambda2)");
  app.add_option("--c-ceiling", c.c_ceiling, "Highest lambda for sweep-c");
  app.add_option("--points", c.points, "Number of lambdas for sweep-c");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"surface", "S(m, x*(lambda)) over m in [0,1] with the low-latitude indicator"},
      {"thresholds", "lambda1, lambda2, lambda_tr for (p, k)"},
      {"count", "Kac-Rice count of critical points in a window"},
      {"gse", "Ground-state prediction, optionally against simulation"},
      {"validate", "Run validation suites"},
      {"sweep-c", "Limit constant C over a log-spaced lambda grid"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    json result;
    if (command == "surface") result = cmd_surface(c);
    else if (command == "thresholds") result = cmd_thresholds(c);
    else if (command == "count") result = cmd_count(c);
    else if (command == "gse") result = cmd_gse(c);
    else if (command == "validate") result = cmd_validate(c);
    else result = cmd_sweep_c(c);
    emit(c, command, result);
    if (command == "validate" && !result["pass"].get<bool>()) {
      std::cerr << "validation failed\n";
      return 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
