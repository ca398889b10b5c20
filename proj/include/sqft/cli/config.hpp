#pragma once

// Run configuration: a JSON tree merged over built-in defaults, with dotted
// --set overrides and field-path diagnostics.

#include <sqft/errors.hpp>
#include <sqft/flat_limit.hpp>
#include <sqft/geometry.hpp>
#include <sqft/position.hpp>
#include <sqft/quadrature.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace sqft::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Every key a config file may set. Keys absent here are rejected.
inline json default_config() {
  return json::parse(R"({
    "schema_version": 1,
    "params": {"M": 1.0, "m": 1.0},
    "state": {"kind": "ground", "beta": 2.0},
    "tau": {"t": 0.0, "epsilon": 0.3},
    "quadrature": {"omega_min": 0.0, "omega_max": 0.0, "rel_tol": 1e-6, "abs_tol": 1e-14,
                   "max_panels": 4000, "threshold_gap": 1e-6},
    "channel_sum": {"rel_tol": 1e-8, "consecutive": 3, "l_max": 4000},
    "modes": {"omega": [1.2], "l": [0], "tol": 1e-10, "rstar_min": null, "r_max": 300.0,
              "samples": 1000, "horizon_samples": 201, "phi_window": null, "psi_window": null,
              "write_samples": true},
    "green": {"omega": [0.6, 1.2], "l": [0, 1, 2], "pairs": [[10.0, 15.0], [20.0, 25.0]]},
    "twopoint": {"probes": [{"r": 20.0, "r_prime": 26.0, "gamma": 0.0}], "method": "auto"},
    "kms": {"cases": [[2.0, 0.2, 0.5], [4.0, 0.4, 0.3]], "r": 20.0, "r_prime": 20.0, "gamma": 0.0,
            "rel_tol": 1e-4},
    "decay": {"r": 60.0, "r_prime": [70, 75, 80, 85, 90, 95, 100, 105, 110, 115, 120], "gamma": 0.0,
              "omega": null, "l": 0, "tolerance": 0.05},
    "integrability": {"r": 60.0, "cuts": [80, 120, 160, 200], "r_min": 0.0, "panel_length": 10.0,
                      "rel_tol": 1e-3, "method": "auto"},
    "flat_compare": {"M_small": 1e-3, "M_reference": 1e-2, "tolerance": 0.01,
                     "channels": [{"omega": 1.2, "l": 0, "r": 60.0, "r_prime": 70.0},
                                  {"omega": 0.8, "l": 0, "r": 60.0, "r_prime": 70.0},
                                  {"omega": 1.2, "l": 1, "r": 50.0, "r_prime": 100.0}],
                     "positions": [{"t": 0.0, "epsilon": 0.3, "r": 60.0, "r_prime": 61.0, "gamma": 0.0},
                                   {"t": 0.0, "epsilon": 0.3, "r": 60.0, "r_prime": 64.0, "gamma": 0.0}]},
    "output": {"dir": "sqft-out", "format": "both"},
    "workers": 1
  })");
}

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void merge_into(json& base, const json& over, const std::string& path) {
  if (!over.is_object())
    throw ConfigError((path.empty() ? std::string("config") : path), "expected an object");
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string p = join_path(path, it.key());
    auto b = base.find(it.key());
    if (b == base.end())
      throw ConfigError(p, "unknown key");
    if (b->is_object())
      merge_into(*b, *it, p);
    else
      *b = *it;
  }
}

} // namespace detail

/// Merges `user` over `base`; keys absent from `base` are a ConfigError.
inline json merge_config(const json& user, json base = default_config()) {
  detail::merge_into(base, user, "");
  return base;
}

inline json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("--config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", path + ": " + e.what());
  }
}

/// Applies "a.b.c=value"; the value is read as JSON when it parses, else as
/// a string.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set " + assignment, "expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded())
    value = text;
  json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty())
      throw ConfigError("--set " + assignment, "empty path component");
    parts.push_back(part);
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it)
    patch = json{{*it, patch}};
  detail::merge_into(cfg, patch, "");
}

// ---------------------------------------------------------------- readers

namespace detail {

inline const json& at_path(const json& root, const std::string& path) {
  const json* node = &root;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');)
    node = &node->at(part);
  return *node;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number())
    throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw ConfigError(path, "must be finite");
  return v;
}

inline int integer(const json& j, const std::string& path) {
  if (!j.is_number_integer())
    throw ConfigError(path, "expected an integer");
  return j.get<int>();
}

inline std::vector<double> numbers(const json& j, const std::string& path) {
  if (!j.is_array())
    throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(number(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

/// A list, or {"start", "stop", "count"} for an evenly spaced range.
inline std::vector<double> number_range(const json& j, const std::string& path) {
  if (j.is_object()) {
    for (const char* k : {"start", "stop", "count"})
      if (!j.contains(k))
        throw ConfigError(path + "." + k, "required in a range");
    for (auto it = j.begin(); it != j.end(); ++it)
      if (it.key() != "start" && it.key() != "stop" && it.key() != "count")
        throw ConfigError(path + "." + it.key(), "unknown key");
    const double a = number(j["start"], path + ".start"), b = number(j["stop"], path + ".stop");
    const int n = integer(j["count"], path + ".count");
    if (n < 1)
      throw ConfigError(path + ".count", "must be >= 1");
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      out[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return out;
  }
  return numbers(j, path);
}

/// A list of l values, or {"l_max": L} for 0..L.
inline std::vector<int> l_list(const json& j, const std::string& path) {
  std::vector<int> out;
  if (j.is_object()) {
    if (j.size() != 1 || !j.contains("l_max"))
      throw ConfigError(path, "expected a list or {\"l_max\": L}");
    const int L = integer(j["l_max"], path + ".l_max");
    if (L < 0)
      throw ConfigError(path + ".l_max", "must be >= 0");
    for (int l = 0; l <= L; ++l)
      out.push_back(l);
    return out;
  }
  if (!j.is_array())
    throw ConfigError(path, "expected a list of integers");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const int l = integer(j[i], path + "[" + std::to_string(i) + "]");
    if (l < 0)
      throw ConfigError(path + "[" + std::to_string(i) + "]", "must be >= 0");
    out.push_back(l);
  }
  return out;
}

inline void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok)
    throw ConfigError(path, what);
}

inline std::optional<std::pair<double, double>> window(const json& j, const std::string& path) {
  if (j.is_null())
    return std::nullopt;
  const auto v = numbers(j, path);
  require(v.size() == 2 && v[1] > v[0], path, "expected [lo, hi] with lo < hi");
  return std::make_pair(v[0], v[1]);
}

inline TwoPointMethod method(const json& j, const std::string& path) {
  const std::string s = j.is_string() ? j.get<std::string>() : "";
  if (s == "auto")
    return TwoPointMethod::Auto;
  if (s == "real-axis")
    return TwoPointMethod::RealAxis;
  if (s == "imaginary-axis")
    return TwoPointMethod::Euclidean;
  throw ConfigError(path, "expected \"auto\", \"real-axis\" or \"imaginary-axis\"");
}

inline Probe probe(const json& j, const std::string& path, const SpacetimeParams& p) {
  require(j.is_object(), path, "expected {\"r\", \"r_prime\", \"gamma\"}");
  for (auto it = j.begin(); it != j.end(); ++it)
    require(it.key() == "r" || it.key() == "r_prime" || it.key() == "gamma", path + "." + it.key(),
            "unknown key");
  Probe pr;
  pr.r = number(j.value("r", json()), path + ".r");
  pr.r_prime = number(j.value("r_prime", json()), path + ".r_prime");
  pr.gamma = j.contains("gamma") ? number(j["gamma"], path + ".gamma") : 0.0;
  require(pr.r > p.horizon(), path + ".r", "must lie outside the horizon");
  require(pr.r_prime > p.horizon(), path + ".r_prime", "must lie outside the horizon");
  require(pr.gamma >= 0.0 && pr.gamma <= 3.141592653589793, path + ".gamma", "must lie in [0, pi]");
  return pr;
}

} // namespace detail

// ---------------------------------------------------------------- typed view

struct ModesConfig {
  std::vector<double> omega;
  std::vector<int> l;
  double tol = 1e-10;
  std::optional<double> rstar_min;
  double r_max = 300.0;
  int samples = 1000, horizon_samples = 201;
  std::optional<std::pair<double, double>> phi_window, psi_window;
  bool write_samples = true;
};

struct GreenConfig {
  std::vector<double> omega;
  std::vector<int> l;
  std::vector<std::pair<double, double>> pairs;
};

struct TwoPointConfig {
  std::vector<Probe> probes;
  TwoPointMethod method = TwoPointMethod::Auto;
};

struct KmsCase {
  double beta = 0.0, epsilon = 0.0, t = 0.0;
};

struct KmsConfig {
  std::vector<KmsCase> cases;
  double r = 20.0, r_prime = 20.0, gamma = 0.0;
  double rel_tol = 1e-4;
};

struct DecayConfig {
  double r = 60.0;
  std::vector<double> r_prime;
  double gamma = 0.0;
  std::optional<double> omega;
  int l = 0;
  double tolerance = 0.05;
};

struct IntegrabilityConfig {
  double r = 60.0;
  std::vector<double> cuts;
  IntegrabilityOptions options;
  TwoPointMethod method = TwoPointMethod::Auto;
};

struct FlatCompareConfig {
  double M_small = 1e-3, M_reference = 1e-2, tolerance = 0.01;
  std::vector<ChannelProbe> channels;
  std::vector<PositionProbe> positions;
};

struct RunConfig {
  SpacetimeParams params;
  State state;
  cplx tau{0.0, -0.3};
  QuadratureSpec quadrature;
  ChannelSumOptions channel_sum;
  ModesConfig modes;
  GreenConfig green;
  TwoPointConfig twopoint;
  KmsConfig kms;
  DecayConfig decay;
  IntegrabilityConfig integrability;
  FlatCompareConfig flat_compare;
  std::string out_dir = "sqft-out";
  std::string format = "both";
  int workers = 1;
  json tree; ///< merged tree the values were read from
};

/// Reads and validates a merged tree (see merge_config).
inline RunConfig parse_config(const json& cfg) {
  using namespace detail;
  RunConfig rc;
  rc.tree = cfg;
  auto at = [&](const std::string& path) -> const json& { return at_path(cfg, path); };
  auto num = [&](const std::string& path) { return number(at(path), path); };

  require(at("schema_version").is_number_integer() && at("schema_version").get<int>() == kSchemaVersion,
          "schema_version", "must be 1");

  rc.params.M = num("params.M");
  rc.params.m = num("params.m");
  require(rc.params.M >= 0.0, "params.M", "must be >= 0");
  require(rc.params.m > 0.0, "params.m", "must be > 0");

  const json& kind = at("state.kind");
  const double beta = num("state.beta");
  if (kind == "ground") {
    rc.state = State::ground();
  } else if (kind == "thermal") {
    require(beta > 0.0, "state.beta", "must be > 0");
    rc.state = State::thermal(beta);
  } else {
    throw ConfigError("state.kind", "expected \"ground\" or \"thermal\"");
  }

  const double eps = num("tau.epsilon");
  require(eps > 0.0, "tau.epsilon", "must be > 0");
  if (!rc.state.is_ground())
    require(eps < 0.5 * rc.state.beta, "tau.epsilon", "must be below state.beta / 2");
  rc.tau = cplx(num("tau.t"), -eps);

  auto& q = rc.quadrature;
  q.omega_min = num("quadrature.omega_min");
  q.omega_max = num("quadrature.omega_max");
  q.rel_tol = num("quadrature.rel_tol");
  q.abs_tol = num("quadrature.abs_tol");
  const int panels = integer(at("quadrature.max_panels"), "quadrature.max_panels");
  require(panels >= 2, "quadrature.max_panels", "must be >= 2");
  q.max_panels = static_cast<std::size_t>(panels);
  q.threshold_gap = num("quadrature.threshold_gap");
  require(q.rel_tol > 0.0, "quadrature.rel_tol", "must be > 0");
  require(q.abs_tol > 0.0, "quadrature.abs_tol", "must be > 0");
  require(q.omega_min >= 0.0, "quadrature.omega_min", "must be >= 0");
  require(q.omega_max == 0.0 || q.omega_max > rc.params.m, "quadrature.omega_max",
          "must be 0 (automatic) or exceed params.m");
  require(q.omega_max == 0.0 || q.omega_min < q.omega_max, "quadrature.omega_min", "must be below omega_max");
  require(q.threshold_gap > 0.0, "quadrature.threshold_gap", "must be > 0");

  rc.channel_sum.rel_tol = num("channel_sum.rel_tol");
  rc.channel_sum.consecutive = integer(at("channel_sum.consecutive"), "channel_sum.consecutive");
  rc.channel_sum.l_max = integer(at("channel_sum.l_max"), "channel_sum.l_max");
  require(rc.channel_sum.rel_tol > 0.0, "channel_sum.rel_tol", "must be > 0");
  require(rc.channel_sum.consecutive >= 1, "channel_sum.consecutive", "must be >= 1");
  require(rc.channel_sum.l_max >= 0, "channel_sum.l_max", "must be >= 0");

  auto& mo = rc.modes;
  mo.omega = number_range(at("modes.omega"), "modes.omega");
  require(!mo.omega.empty(), "modes.omega", "must not be empty");
  for (std::size_t i = 0; i < mo.omega.size(); ++i)
    require(mo.omega[i] != 0.0, "modes.omega[" + std::to_string(i) + "]", "omega = 0 is not supported");
  mo.l = l_list(at("modes.l"), "modes.l");
  require(!mo.l.empty(), "modes.l", "must not be empty");
  mo.tol = num("modes.tol");
  require(mo.tol > 0.0 && mo.tol < 1e-2, "modes.tol", "must lie in (0, 1e-2)");
  if (!at("modes.rstar_min").is_null())
    mo.rstar_min = num("modes.rstar_min");
  if (rc.params.flat() && mo.rstar_min)
    require(*mo.rstar_min > 0.0, "modes.rstar_min", "must be > 0 when params.M = 0");
  mo.r_max = num("modes.r_max");
  require(mo.r_max > rc.params.horizon() + 1.0 / rc.params.m, "modes.r_max", "must exceed 2M + 1/m");
  mo.samples = integer(at("modes.samples"), "modes.samples");
  mo.horizon_samples = integer(at("modes.horizon_samples"), "modes.horizon_samples");
  require(mo.samples >= 16, "modes.samples", "must be >= 16");
  require(mo.horizon_samples >= 16, "modes.horizon_samples", "must be >= 16");
  mo.phi_window = window(at("modes.phi_window"), "modes.phi_window");
  mo.psi_window = window(at("modes.psi_window"), "modes.psi_window");
  require(at("modes.write_samples").is_boolean(), "modes.write_samples", "expected true or false");
  mo.write_samples = at("modes.write_samples").get<bool>();

  auto& gr = rc.green;
  gr.omega = number_range(at("green.omega"), "green.omega");
  for (std::size_t i = 0; i < gr.omega.size(); ++i)
    require(gr.omega[i] != 0.0, "green.omega[" + std::to_string(i) + "]", "omega = 0 is not supported");
  gr.l = l_list(at("green.l"), "green.l");
  const json& pairs = at("green.pairs");
  require(pairs.is_array() && !pairs.empty(), "green.pairs", "expected a non-empty list of [r, r_prime]");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string p = "green.pairs[" + std::to_string(i) + "]";
    const auto v = numbers(pairs[i], p);
    require(v.size() == 2, p, "expected [r, r_prime]");
    require(v[0] > rc.params.horizon() && v[1] > rc.params.horizon(), p, "radii must lie outside the horizon");
    gr.pairs.emplace_back(v[0], v[1]);
  }

  const json& probes = at("twopoint.probes");
  require(probes.is_array() && !probes.empty(), "twopoint.probes", "expected a non-empty list");
  for (std::size_t i = 0; i < probes.size(); ++i)
    rc.twopoint.probes.push_back(probe(probes[i], "twopoint.probes[" + std::to_string(i) + "]", rc.params));
  rc.twopoint.method = method(at("twopoint.method"), "twopoint.method");

  auto& km = rc.kms;
  const json& cases = at("kms.cases");
  require(cases.is_array() && !cases.empty(), "kms.cases", "expected a non-empty list of [beta, epsilon, t]");
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const std::string p = "kms.cases[" + std::to_string(i) + "]";
    const auto v = numbers(cases[i], p);
    require(v.size() == 3, p, "expected [beta, epsilon, t]");
    require(v[0] > 0.0 && v[1] > 0.0 && v[1] < v[0], p, "need 0 < epsilon < beta");
    km.cases.push_back({v[0], v[1], v[2]});
  }
  km.r = num("kms.r");
  km.r_prime = num("kms.r_prime");
  km.gamma = num("kms.gamma");
  km.rel_tol = num("kms.rel_tol");
  require(km.r > rc.params.horizon(), "kms.r", "must lie outside the horizon");
  require(km.r_prime > rc.params.horizon(), "kms.r_prime", "must lie outside the horizon");
  require(km.gamma >= 0.0 && km.gamma <= 3.141592653589793, "kms.gamma", "must lie in [0, pi]");
  require(km.rel_tol > 0.0, "kms.rel_tol", "must be > 0");

  auto& de = rc.decay;
  de.r = num("decay.r");
  de.r_prime = number_range(at("decay.r_prime"), "decay.r_prime");
  de.gamma = num("decay.gamma");
  if (!at("decay.omega").is_null())
    de.omega = num("decay.omega");
  de.l = integer(at("decay.l"), "decay.l");
  de.tolerance = num("decay.tolerance");
  require(de.r > rc.params.horizon(), "decay.r", "must lie outside the horizon");
  require(de.r_prime.size() >= 8, "decay.r_prime", "need at least 8 radii");
  for (std::size_t i = 0; i < de.r_prime.size(); ++i) {
    const std::string p = "decay.r_prime[" + std::to_string(i) + "]";
    require(de.r_prime[i] > rc.params.horizon(), p, "must lie outside the horizon");
    require(i == 0 || de.r_prime[i] > de.r_prime[i - 1], p, "radii must increase");
  }
  require(de.gamma >= 0.0 && de.gamma <= 3.141592653589793, "decay.gamma", "must lie in [0, pi]");
  require(de.l >= 0, "decay.l", "must be >= 0");
  require(!de.omega || *de.omega != 0.0, "decay.omega", "omega = 0 is not supported");
  require(de.tolerance > 0.0, "decay.tolerance", "must be > 0");

  auto& in = rc.integrability;
  in.r = num("integrability.r");
  in.cuts = numbers(at("integrability.cuts"), "integrability.cuts");
  in.options.r_min = num("integrability.r_min");
  in.options.panel_length = num("integrability.panel_length");
  in.options.rel_tol = num("integrability.rel_tol");
  in.method = method(at("integrability.method"), "integrability.method");
  require(in.r > rc.params.horizon(), "integrability.r", "must lie outside the horizon");
  require(in.cuts.size() >= 4, "integrability.cuts", "need at least 4 cuts");
  for (std::size_t i = 1; i < in.cuts.size(); ++i)
    require(in.cuts[i] > in.cuts[i - 1], "integrability.cuts[" + std::to_string(i) + "]", "cuts must increase");
  require(in.options.r_min == 0.0 || in.options.r_min > rc.params.horizon(), "integrability.r_min",
          "must be 0 (automatic) or lie outside the horizon");
  require(in.options.panel_length > 0.0, "integrability.panel_length", "must be > 0");
  require(in.options.rel_tol > 0.0, "integrability.rel_tol", "must be > 0");

  auto& fc = rc.flat_compare;
  fc.M_small = num("flat_compare.M_small");
  fc.M_reference = num("flat_compare.M_reference");
  fc.tolerance = num("flat_compare.tolerance");
  require(fc.M_small >= 0.0 && fc.M_small * rc.params.m <= 1e-2, "flat_compare.M_small",
          "need 0 <= M_small m <= 1e-2");
  require(fc.M_reference == 0.0 || (fc.M_reference > fc.M_small && fc.M_reference * rc.params.m <= 1e-2),
          "flat_compare.M_reference", "must be 0 (off) or lie in (M_small, 1e-2/m]");
  require(fc.tolerance > 0.0, "flat_compare.tolerance", "must be > 0");
  const double far = 50.0 / rc.params.m;
  const json& chans = at("flat_compare.channels");
  require(chans.is_array(), "flat_compare.channels", "expected a list");
  for (std::size_t i = 0; i < chans.size(); ++i) {
    const std::string p = "flat_compare.channels[" + std::to_string(i) + "]";
    const json& c = chans[i];
    require(c.is_object(), p, "expected {\"omega\", \"l\", \"r\", \"r_prime\"}");
    for (auto it = c.begin(); it != c.end(); ++it)
      require(it.key() == "omega" || it.key() == "l" || it.key() == "r" || it.key() == "r_prime",
              p + "." + it.key(), "unknown key");
    ChannelProbe cp;
    cp.omega = number(c.value("omega", json()), p + ".omega");
    cp.l = integer(c.value("l", json()), p + ".l");
    cp.r = number(c.value("r", json()), p + ".r");
    cp.r_prime = number(c.value("r_prime", json()), p + ".r_prime");
    require(cp.omega != 0.0 && std::abs(cp.omega * cp.omega - rc.params.m * rc.params.m) > 1e-9, p + ".omega",
            "must avoid 0 and the mass threshold");
    require(cp.l >= 0, p + ".l", "must be >= 0");
    require(cp.r >= far, p + ".r", "must be >= 50/m");
    require(cp.r_prime >= far, p + ".r_prime", "must be >= 50/m");
    fc.channels.push_back(cp);
  }
  const json& pos = at("flat_compare.positions");
  require(pos.is_array(), "flat_compare.positions", "expected a list");
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const std::string p = "flat_compare.positions[" + std::to_string(i) + "]";
    const json& c = pos[i];
    require(c.is_object(), p, "expected {\"t\", \"epsilon\", \"r\", \"r_prime\", \"gamma\"}");
    for (auto it = c.begin(); it != c.end(); ++it)
      require(it.key() == "t" || it.key() == "epsilon" || it.key() == "r" || it.key() == "r_prime" ||
                  it.key() == "gamma",
              p + "." + it.key(), "unknown key");
    PositionProbe pp;
    const double e = number(c.value("epsilon", json()), p + ".epsilon");
    require(e > 0.0, p + ".epsilon", "must be > 0");
    pp.tau = cplx(c.contains("t") ? number(c["t"], p + ".t") : 0.0, -e);
    pp.r = number(c.value("r", json()), p + ".r");
    pp.r_prime = number(c.value("r_prime", json()), p + ".r_prime");
    pp.gamma = c.contains("gamma") ? number(c["gamma"], p + ".gamma") : 0.0;
    require(pp.r >= far, p + ".r", "must be >= 50/m");
    require(pp.r_prime >= far, p + ".r_prime", "must be >= 50/m");
    require(pp.gamma >= 0.0 && pp.gamma <= 3.141592653589793, p + ".gamma", "must lie in [0, pi]");
    fc.positions.push_back(pp);
  }
  require(!fc.channels.empty() || !fc.positions.empty(), "flat_compare", "needs at least one probe");

  require(at("output.dir").is_string() && !at("output.dir").get<std::string>().empty(), "output.dir",
          "expected a non-empty string");
  rc.out_dir = at("output.dir").get<std::string>();
  const json& fmt = at("output.format");
  require(fmt == "csv" || fmt == "json" || fmt == "both", "output.format", "expected csv, json or both");
  rc.format = fmt.get<std::string>();
  rc.workers = integer(at("workers"), "workers");
  require(rc.workers >= 1, "workers", "must be >= 1");
  return rc;
}

/// The part of the tree echoed into reports: everything except where the
/// output goes and how many threads produced it, neither of which changes
/// the results.
inline json canonical_echo(const json& tree) {
  json out = tree;
  out.erase("output");
  out.erase("workers");
  return out;
}

/// Output directory default: $SQFT_OUT_DIR when set.
inline std::string default_out_dir() {
  const char* env = std::getenv("SQFT_OUT_DIR");
  return env && *env ? std::string(env) : std::string("sqft-out");
}

} // namespace sqft::cli
