#pragma once

// Subcommand bodies. Each returns the canonical JSON report, the CSV tables
// and, for commands with contract checks, a verdict.

#include <sqft/cli/config.hpp>
#include <sqft/flat.hpp>
#include <sqft/flat_limit.hpp>
#include <sqft/greens.hpp>
#include <sqft/parallel.hpp>
#include <sqft/position.hpp>
#include <sqft/radial.hpp>
#include <sqft/thermal.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sqft::cli {

struct CsvTable {
  std::string name; ///< file stem
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct CommandResult {
  json report;
  std::vector<CsvTable> tables;
  std::optional<bool> pass; ///< unset when the command has no checks
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"modes",    "green",         "twopoint",    "kms-check",
                                                 "decay",    "integrability", "flat-compare"};
  return names;
}

namespace detail {

inline json cj(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

/// Shortest round-trip decimal form, so CSV output is reproducible.
inline std::string fmt(double x) {
  if (std::isnan(x))
    return "nan";
  if (std::isinf(x))
    return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string fmt(int x) { return std::to_string(x); }

inline json skeleton(const std::string& command, const RunConfig& rc) {
  return json{{"schema_version", kSchemaVersion}, {"command", command}, {"config", canonical_echo(rc.tree)}};
}

inline json verdict(const std::vector<std::pair<std::string, bool>>& checks) {
  json list = json::array();
  bool all = true;
  for (const auto& [name, ok] : checks) {
    list.push_back({{"name", name}, {"pass", ok}});
    all = all && ok;
  }
  return json{{"checks", list}, {"pass", all}};
}

inline json fit_json(const AsymptoticFit& f) {
  json j{{"coordinate", f.coordinate},
         {"window", {f.fit_window.lo, f.fit_window.hi}},
         {"residual", f.residual},
         {"samples", f.samples}};
  if (f.phase_slope)
    j["phase_slope"] = *f.phase_slope;
  if (f.log_coefficient)
    j["log_coefficient"] = *f.log_coefficient;
  if (f.decay_rate)
    j["decay_rate"] = *f.decay_rate;
  if (f.power_exponent)
    j["power_exponent"] = *f.power_exponent;
  return j;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    x[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  x.back() = b;
  return x;
}

/// Dense r* segment over the near-horizon window, then the bulk up to r_max.
inline RadialGrid modes_grid(const RunConfig& rc) {
  const auto& p = rc.params;
  const auto& mo = rc.modes;
  if (p.flat()) {
    const double lo = mo.rstar_min.value_or(0.05 / p.m);
    return RadialGrid::from_tortoise(linspace(lo, mo.r_max, mo.samples), p);
  }
  const double top = tortoise(mo.r_max, p);
  const double mid = mo.psi_window ? mo.psi_window->second : -20.0 * p.horizon();
  double lo = mo.rstar_min.value_or(-40.0 * p.horizon());
  if (mo.psi_window)
    lo = std::min(lo, mo.psi_window->first);
  if (!(top > lo))
    throw ConfigError("modes.rstar_min", "must lie below the tortoise coordinate of r_max");
  std::vector<double> xs;
  if (lo < mid && mid < top) {
    xs = linspace(lo, mid, mo.horizon_samples);
    const auto bulk = linspace(mid, top, mo.samples + 1);
    xs.insert(xs.end(), bulk.begin() + 1, bulk.end());
  } else {
    xs = linspace(lo, top, mo.samples);
  }
  return RadialGrid::from_tortoise(xs, p);
}

} // namespace detail

// ---------------------------------------------------------------- modes

inline CommandResult cmd_modes(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  const auto& mo = rc.modes;
  const RadialGrid grid = modes_grid(rc);
  const FitWindow phi_win = mo.phi_window ? FitWindow{mo.phi_window->first, mo.phi_window->second}
                                          : FitWindow{100.0 / p.m, std::min(300.0 / p.m, mo.r_max)};
  std::optional<FitWindow> psi_win;
  if (mo.psi_window)
    psi_win = FitWindow{mo.psi_window->first, mo.psi_window->second};
  else if (!p.flat())
    psi_win = FitWindow{-40.0 * p.horizon(), -20.0 * p.horizon()};

  struct Item {
    double omega;
    int l;
  };
  std::vector<Item> items;
  for (double w : mo.omega)
    for (int l : mo.l)
      items.push_back({w, l});

  struct Out {
    json row;
    std::vector<std::vector<std::string>> samples;
    bool ok = false;
    double spread = 0.0;
  };
  std::vector<Out> out(items.size());
  SolveOptions so;
  so.tol = mo.tol;

  parallel_for(items.size(), rc.workers, [&](std::size_t i) {
    const auto [w, l] = items[i];
    auto& o = out[i];
    o.row = {{"omega", w}, {"l", l}};
    try {
      check_threshold(w, p);
    } catch (const ThresholdError&) {
      o.row["status"] = "skipped-threshold";
      return;
    }
    const auto phi = solve_phi(w, l, p, grid, so);
    const auto psi = solve_psi(w, l, p, grid, so);
    const auto W = wronskian(phi, psi);
    o.ok = true;
    o.spread = W.relative_spread;
    o.row["status"] = "ok";
    o.row["phi_boundary"] = to_string(phi.boundary);
    o.row["wronskian"] = {{"value", cj(W.as_complex())},
                          {"log_abs", W.value.log_abs()},
                          {"relative_spread", W.relative_spread},
                          {"overlap", W.overlap}};
    const auto e = expected_asymptotics(w, p);
    o.row["expected"] = e.oscillatory ? json{{"q", e.q}, {"log_coefficient", e.log_coefficient}}
                                      : json{{"decay_rate", e.b}, {"power_exponent", e.c}};
    auto fit_or_error = [](const ModeSolution& s, FitWindow win) -> json {
      try {
        return fit_json(fit_asymptotics(s, win));
      } catch (const DomainError& ex) {
        return json{{"error", ex.what()}};
      } catch (const WindowTooSmall& ex) {
        return json{{"error", ex.what()}};
      }
    };
    o.row["phi_fit"] = fit_or_error(phi, phi_win);
    if (psi_win)
      o.row["psi_fit"] = fit_or_error(psi, *psi_win);
    if (mo.write_samples) {
      for (const auto* s : {&phi, &psi}) {
        double top = -std::numeric_limits<double>::infinity();
        for (const auto& u : s->u)
          top = std::max(top, u.log_abs());
        const LogScaled norm(cplx(1.0), -top);
        const char* name = s == &phi ? "phi" : "psi";
        for (std::size_t k = 0; k < grid.size(); ++k) {
          const cplx u = (s->u[k] * norm).value(), du = (s->du[k] * norm).value();
          o.samples.push_back({fmt(w), fmt(l), name, fmt(grid[k].r), fmt(grid[k].rstar), fmt(u.real()),
                               fmt(u.imag()), fmt(du.real()), fmt(du.imag())});
        }
      }
    }
  });

  CommandResult res;
  res.report = skeleton("modes", rc);
  json summary = json::array();
  CsvTable samples{"modes", {"omega", "l", "solution", "r", "rstar", "re_u", "im_u", "re_du", "im_du"}, {}};
  bool ok = true;
  std::size_t skipped = 0;
  double worst = 0.0;
  for (auto& o : out) {
    summary.push_back(std::move(o.row));
    if (o.ok) {
      ok = ok && o.spread <= 1e-6;
      worst = std::max(worst, o.spread);
    } else {
      ++skipped;
    }
    for (auto& s : o.samples)
      samples.rows.push_back(std::move(s));
  }
  res.report["results"] = {{"grid", {{"points", grid.size()},
                                     {"rstar_min", grid.front().rstar},
                                     {"rstar_max", grid.back().rstar},
                                     {"r_min", grid.front().r},
                                     {"r_max", grid.back().r}}},
                           {"summary", std::move(summary)},
                           {"skipped_threshold", skipped},
                           {"max_wronskian_spread", worst},
                           {"samples_normalization", "each solution scaled so that max |u| = 1 on the grid"}};
  res.report["verdict"] = verdict({{"wronskian_spread_le_1e-6", ok}});
  res.pass = ok;
  if (mo.write_samples)
    res.tables.push_back(std::move(samples));
  return res;
}

// ---------------------------------------------------------------- green

inline CommandResult cmd_green(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  const auto& gr = rc.green;
  struct Item {
    double omega;
    int l;
  };
  std::vector<Item> items;
  for (double w : gr.omega)
    for (int l : gr.l)
      items.push_back({w, l});
  std::optional<ChannelGreen> g;
  if (!p.flat())
    g.emplace(p, gr.pairs);
  std::vector<std::optional<std::vector<cplx>>> vals(items.size());
  parallel_for(items.size(), rc.workers, [&](std::size_t i) {
    const auto [w, l] = items[i];
    if (std::abs(w * w - p.m * p.m) < kThresholdGap)
      return;
    if (g) {
      vals[i] = g->evaluate(w, l);
    } else {
      std::vector<cplx> v;
      for (const auto& [a, b] : gr.pairs)
        v.push_back(flat_channel_green(w, l, p.m, a, b));
      vals[i] = std::move(v);
    }
  });

  CommandResult res;
  res.report = skeleton("green", rc);
  CsvTable t{"green", {"omega", "l", "r", "r_prime", "re_g", "im_g", "status"}, {}};
  json rows = json::array();
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto [w, l] = items[i];
    for (std::size_t k = 0; k < gr.pairs.size(); ++k) {
      const auto [a, b] = gr.pairs[k];
      json row{{"omega", w}, {"l", l}, {"r", a}, {"r_prime", b}};
      if (vals[i]) {
        const cplx z = (*vals[i])[k];
        row["value"] = cj(z);
        row["status"] = "ok";
        t.rows.push_back({fmt(w), fmt(l), fmt(a), fmt(b), fmt(z.real()), fmt(z.imag()), "ok"});
      } else {
        row["status"] = "skipped-threshold";
        t.rows.push_back({fmt(w), fmt(l), fmt(a), fmt(b), "", "", "skipped-threshold"});
      }
      rows.push_back(std::move(row));
    }
  }
  res.report["results"] = {{"rows", std::move(rows)},
                           {"method", p.flat() ? "flat closed form" : "channel Green's function, matched modes"},
                           {"relative_tolerance", p.flat() ? 0.0 : ChannelOptions{}.tol}};
  res.report["verdict"] = nullptr;
  res.tables.push_back(std::move(t));
  return res;
}

// ---------------------------------------------------------------- twopoint

inline CommandResult cmd_twopoint(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  auto src = make_source(p, rc.twopoint.probes, rc.channel_sum, rc.workers);
  const auto vals = two_point(*src, rc.state, rc.tau, rc.quadrature, rc.twopoint.method);

  CommandResult res;
  res.report = skeleton("twopoint", rc);
  CsvTable t{"twopoint",
             {"r", "r_prime", "gamma", "chord", "re_w", "im_w", "quad_error", "lsum_error", "method"},
             {}};
  json rows = json::array();
  for (std::size_t k = 0; k < vals.size(); ++k) {
    const auto& pr = rc.twopoint.probes[k];
    const auto& v = vals[k];
    json row{{"r", pr.r},
             {"r_prime", pr.r_prime},
             {"gamma", pr.gamma},
             {"chord", pr.chord()},
             {"value", cj(v.value)},
             {"quad_error", v.quad_error},
             {"lsum_error", v.lsum_error},
             {"total_error", v.total_error()},
             {"l_used", v.l_used},
             {"method", to_string(v.method)},
             {"omega_max", v.spec.omega_max},
             {"evaluations", v.evaluations}};
    if (p.flat()) {
      const FlatPoint fp{rc.tau, pr.chord(), p.m};
      const cplx o = rc.state.is_ground() ? flat_wightman_closed(fp) : flat_wightman_thermal_closed(fp, rc.state.beta);
      row["closed_form"] = cj(o);
      row["closed_form_deviation"] = std::abs(v.value - o) / std::abs(o);
    }
    rows.push_back(std::move(row));
    t.rows.push_back({fmt(pr.r), fmt(pr.r_prime), fmt(pr.gamma), fmt(pr.chord()), fmt(v.value.real()),
                      fmt(v.value.imag()), fmt(v.quad_error), fmt(v.lsum_error), to_string(v.method)});
  }
  res.report["results"] = {{"rows", std::move(rows)}, {"panel_scheme", rc.quadrature.panel_scheme()}};
  res.report["verdict"] = nullptr;
  res.tables.push_back(std::move(t));
  return res;
}

// ---------------------------------------------------------------- kms-check

inline CommandResult cmd_kms_check(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  const auto& km = rc.kms;
  QuadratureSpec spec = rc.quadrature;
  spec.rel_tol = km.rel_tol;
  // One source per ordered radius pair; rho(w) does not depend on beta, so
  // its cache carries over between cases.
  std::map<std::pair<double, double>, std::unique_ptr<SpectralSource>> sources;
  auto source = [&](double a, double b) -> SpectralSource& {
    auto& s = sources[{a, b}];
    if (!s)
      s = make_source(p, {{a, b, km.gamma}}, rc.channel_sum, rc.workers);
    return *s;
  };

  CommandResult res;
  res.report = skeleton("kms-check", rc);
  CsvTable t{"kms-check",
             {"beta", "epsilon", "t", "re_shifted", "im_shifted", "re_reflected", "im_reflected", "difference",
              "combined_error", "pass"},
             {}};
  json rows = json::array();
  std::vector<std::pair<std::string, bool>> checks;
  for (const auto& c : km.cases) {
    const State st = State::thermal(c.beta);
    TwoPointEvaluator ev = [&](cplx tau, double a, double b) {
      const auto v = two_point(source(a, b), st, tau, spec, TwoPointMethod::RealAxis).front();
      return EstimatedValue{v.value, v.total_error()};
    };
    const auto rep = kms_strip_check(ev, c.t, c.beta, c.epsilon, km.r, km.r_prime);
    rows.push_back({{"beta", c.beta},
                    {"epsilon", c.epsilon},
                    {"t", c.t},
                    {"shifted", {{"value", cj(rep.shifted.value)}, {"error", rep.shifted.error}}},
                    {"reflected", {{"value", cj(rep.reflected.value)}, {"error", rep.reflected.error}}},
                    {"difference", rep.difference},
                    {"combined_error", rep.combined_error},
                    {"pass", rep.pass}});
    t.rows.push_back({fmt(c.beta), fmt(c.epsilon), fmt(c.t), fmt(rep.shifted.value.real()),
                      fmt(rep.shifted.value.imag()), fmt(rep.reflected.value.real()),
                      fmt(rep.reflected.value.imag()), fmt(rep.difference), fmt(rep.combined_error),
                      rep.pass ? "true" : "false"});
    checks.emplace_back("kms beta=" + fmt(c.beta) + " epsilon=" + fmt(c.epsilon) + " t=" + fmt(c.t), rep.pass);
  }
  res.report["results"] = {{"evaluator", p.flat() ? "flat" : "schwarzschild"},
                           {"r", km.r},
                           {"r_prime", km.r_prime},
                           {"gamma", km.gamma},
                           {"rel_tol", km.rel_tol},
                           {"rows", std::move(rows)}};
  res.report["verdict"] = verdict(checks);
  res.pass = res.report["verdict"]["pass"].get<bool>();
  res.tables.push_back(std::move(t));
  return res;
}

// ---------------------------------------------------------------- decay

inline CommandResult cmd_decay(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  const auto& de = rc.decay;
  DecayFit fit;
  std::optional<double> expected;
  json mode;
  if (de.omega) {
    const double w = *de.omega;
    check_threshold(w, p);
    fit = frequency_decay_profile(p, w, de.l, de.r, de.r_prime);
    if (w * w < p.m * p.m)
      expected = std::sqrt(p.m * p.m - w * w);
    mode = {{"kind", "frequency"}, {"omega", w}, {"l", de.l}, {"model", "ln|G_l| = c - kappa r' - power ln r'"}};
  } else {
    std::vector<Probe> probes;
    for (double x : de.r_prime)
      probes.push_back({de.r, x, de.gamma});
    auto src = make_source(p, probes, rc.channel_sum, rc.workers);
    fit = decay_profile(*src, rc.state, rc.tau, rc.quadrature);
    expected = p.m;
    mode = {{"kind", "position"}, {"model", "ln|W| = c - kappa d - power ln|sigma|"}};
  }
  CommandResult res;
  res.report = skeleton("decay", rc);
  CsvTable t{"decay", {"separation", "log_abs"}, {}};
  for (std::size_t i = 0; i < fit.separation.size(); ++i)
    t.rows.push_back({fmt(fit.separation[i]), fmt(fit.log_abs[i])});
  json r{{"profile", mode},
         {"kappa", fit.kappa},
         {"power", fit.power},
         {"intercept", fit.intercept},
         {"rms_residual", fit.rms_residual},
         {"separation", fit.separation},
         {"log_abs", fit.log_abs}};
  if (expected) {
    const double rel = std::abs(fit.kappa - *expected) / *expected;
    r["expected_kappa"] = *expected;
    r["relative_deviation"] = rel;
    res.pass = rel <= de.tolerance;
    res.report["verdict"] = verdict({{"kappa_within_tolerance", *res.pass}});
  } else {
    res.report["verdict"] = nullptr;
  }
  res.report["results"] = std::move(r);
  res.tables.push_back(std::move(t));
  return res;
}

// ---------------------------------------------------------------- integrability

inline CommandResult cmd_integrability(const RunConfig& rc) {
  using namespace detail;
  const auto& p = rc.params;
  const auto& in = rc.integrability;
  const SourceFactory factory = [&](std::vector<Probe> probes) {
    return make_source(p, std::move(probes), rc.channel_sum, rc.workers);
  };
  const auto rep = integrability_check(factory, p.m, rc.state, rc.tau, in.r, in.cuts, rc.quadrature, in.options,
                                       in.method);
  CommandResult res;
  res.report = skeleton("integrability", rc);
  CsvTable t{"integrability", {"cut", "partial", "increment", "partial_error"}, {}};
  for (std::size_t i = 0; i < rep.cuts.size(); ++i)
    t.rows.push_back({fmt(rep.cuts[i]), fmt(rep.partial[i]), fmt(rep.increments[i]), fmt(rep.partial_error[i])});
  res.report["results"] = {{"r", rep.r},
                           {"r_min", rep.r_min},
                           {"cuts", rep.cuts},
                           {"partial", rep.partial},
                           {"increments", rep.increments},
                           {"partial_error", rep.partial_error},
                           {"ratio", rep.ratio},
                           {"tail", rep.tail},
                           {"monotone", rep.monotone},
                           {"converged", rep.converged},
                           {"nodes", rep.nodes}};
  res.pass = rep.converged;
  res.report["verdict"] = verdict({{"monotone", rep.monotone},
                                   {"ratio_below_1", rep.ratio < 1.0},
                                   {"tail_below_rel_tol", rep.tail < in.options.rel_tol * rep.partial.back()}});
  res.tables.push_back(std::move(t));
  return res;
}

// ---------------------------------------------------------------- flat-compare

inline CommandResult cmd_flat_compare(const RunConfig& rc) {
  using namespace detail;
  const auto& fc = rc.flat_compare;
  const double m = rc.params.m;
  const auto small = flat_limit_compare(fc.M_small, m, fc.channels, fc.positions, rc.quadrature, rc.workers);
  std::optional<FlatLimitReport> ref;
  if (fc.M_reference > 0.0)
    ref = flat_limit_compare(fc.M_reference, m, fc.channels, fc.positions, rc.quadrature, rc.workers);

  CommandResult res;
  res.report = skeleton("flat-compare", rc);
  CsvTable t{"flat-compare",
             {"kind", "omega", "l", "t", "epsilon", "r", "r_prime", "gamma", "re_value", "im_value", "re_oracle",
              "im_oracle", "deviation", "error", "deviation_reference"},
             {}};
  json rows = json::array();
  bool grows = true;
  for (std::size_t i = 0; i < small.rows.size(); ++i) {
    const auto& row = small.rows[i];
    const bool ch = row.kind == "channel";
    json j{{"kind", row.kind}, {"value", cj(row.value)}, {"oracle", cj(row.oracle)},
           {"deviation", row.deviation}, {"error", row.error}};
    std::vector<std::string> csv{row.kind};
    if (ch) {
      j["omega"] = row.channel.omega;
      j["l"] = row.channel.l;
      j["r"] = row.channel.r;
      j["r_prime"] = row.channel.r_prime;
      csv.insert(csv.end(), {fmt(row.channel.omega), fmt(row.channel.l), "", "", fmt(row.channel.r),
                             fmt(row.channel.r_prime), ""});
    } else {
      const auto& pp = row.position;
      j["t"] = pp.tau.real();
      j["epsilon"] = -pp.tau.imag();
      j["r"] = pp.r;
      j["r_prime"] = pp.r_prime;
      j["gamma"] = pp.gamma;
      csv.insert(csv.end(), {"", "", fmt(pp.tau.real()), fmt(-pp.tau.imag()), fmt(pp.r), fmt(pp.r_prime),
                             fmt(pp.gamma)});
    }
    csv.insert(csv.end(), {fmt(row.value.real()), fmt(row.value.imag()), fmt(row.oracle.real()),
                           fmt(row.oracle.imag()), fmt(row.deviation), fmt(row.error)});
    if (ref) {
      const double d = ref->rows[i].deviation;
      j["deviation_reference"] = d;
      j["grows_with_mass"] = d > row.deviation;
      grows = grows && d > row.deviation;
      csv.push_back(fmt(d));
    } else {
      csv.push_back("");
    }
    rows.push_back(std::move(j));
    t.rows.push_back(std::move(csv));
  }
  res.report["results"] = {{"M_small", fc.M_small},
                           {"M_reference", fc.M_reference},
                           {"tolerance", fc.tolerance},
                           {"max_deviation", small.max_deviation},
                           {"rows", std::move(rows)}};
  std::vector<std::pair<std::string, bool>> checks{{"max_deviation_within_tolerance",
                                                    small.max_deviation <= fc.tolerance}};
  if (ref)
    checks.emplace_back("deviation_grows_with_mass", grows);
  res.report["verdict"] = verdict(checks);
  res.pass = res.report["verdict"]["pass"].get<bool>();
  res.tables.push_back(std::move(t));
  return res;
}

inline CommandResult run_command(const std::string& name, const RunConfig& rc) {
  if (name == "modes")
    return cmd_modes(rc);
  if (name == "green")
    return cmd_green(rc);
  if (name == "twopoint")
    return cmd_twopoint(rc);
  if (name == "kms-check")
    return cmd_kms_check(rc);
  if (name == "decay")
    return cmd_decay(rc);
  if (name == "integrability")
    return cmd_integrability(rc);
  if (name == "flat-compare")
    return cmd_flat_compare(rc);
  throw ConfigError("command", "unknown command " + name);
}

} // namespace sqft::cli
