#pragma once

// Small-M cross-check of the Schwarzschild machinery against the flat oracles.

#include <sqft/errors.hpp>
#include <sqft/flat.hpp>
#include <sqft/greens.hpp>
#include <sqft/position.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace sqft {

struct ChannelProbe {
  double omega = 1.2;
  int l = 0;
  double r = 60.0, r_prime = 70.0;
};

struct PositionProbe {
  cplx tau{0.0, -0.3};
  double r = 60.0, r_prime = 61.0, gamma = 0.0;
};

struct FlatLimitRow {
  std::string kind; ///< "channel" or "position"
  ChannelProbe channel;
  PositionProbe position;
  cplx value;
  cplx oracle;
  double deviation = 0.0; ///< |value - oracle| / |oracle|
  double error = 0.0;     ///< numerical error estimate of `value`, relative
};

struct FlatLimitReport {
  double M = 0.0, m = 1.0;
  std::vector<FlatLimitRow> rows;
  double max_deviation = 0.0;
};

/// Channel Green's functions and ground two-point values at M_small against
/// flat_channel_green and the K_1 closed form. M_small = 0 runs the flat
/// machinery on the position probes.
inline FlatLimitReport flat_limit_compare(double M_small, double m, const std::vector<ChannelProbe>& channels,
                                          const std::vector<PositionProbe>& positions,
                                          const QuadratureSpec& spec, int workers = 1) {
  if (!(M_small >= 0.0) || !(m > 0.0) || M_small * m > 1e-2)
    throw DomainError("flat_limit_compare: need 0 <= M m <= 1e-2 and m > 0");
  auto far = [m](double r) { return r * m >= 50.0; };
  for (const auto& c : channels)
    if (!far(c.r) || !far(c.r_prime))
      throw DomainError("flat_limit_compare: channel probe radii must be >= 50/m");
  for (const auto& p : positions)
    if (!far(p.r) || !far(p.r_prime))
      throw DomainError("flat_limit_compare: position probe radii must be >= 50/m");

  FlatLimitReport rep;
  rep.M = M_small;
  rep.m = m;
  const SpacetimeParams params{M_small, m};

  for (const auto& c : channels) {
    FlatLimitRow row;
    row.kind = "channel";
    row.channel = c;
    row.oracle = flat_channel_green(c.omega, c.l, m, c.r, c.r_prime);
    if (M_small == 0.0) {
      row.value = row.oracle;
    } else {
      ChannelGreen g(params, {{c.r, c.r_prime}});
      row.value = g.evaluate(c.omega, c.l).front();
      row.error = ChannelOptions{}.tol;
    }
    rep.rows.push_back(row);
  }

  if (!positions.empty()) {
    std::vector<Probe> probes;
    for (const auto& p : positions)
      probes.push_back({p.r, p.r_prime, p.gamma});
    // Probes sharing a tau go through one quadrature.
    std::vector<cplx> taus;
    for (const auto& p : positions)
      if (std::find(taus.begin(), taus.end(), p.tau) == taus.end())
        taus.push_back(p.tau);
    std::vector<FlatLimitRow> rows(positions.size());
    for (const cplx& tau : taus) {
      std::vector<std::size_t> idx;
      std::vector<Probe> group;
      for (std::size_t i = 0; i < positions.size(); ++i)
        if (positions[i].tau == tau) {
          idx.push_back(i);
          group.push_back(probes[i]);
        }
      auto src = make_source(params, group, {}, workers);
      const auto vals = two_point(*src, State::ground(), tau, spec);
      for (std::size_t j = 0; j < idx.size(); ++j) {
        auto& row = rows[idx[j]];
        row.kind = "position";
        row.position = positions[idx[j]];
        row.value = vals[j].value;
        row.oracle = flat_wightman_closed({tau, group[j].chord(), m});
        row.error = vals[j].total_error() / std::abs(row.oracle);
      }
    }
    for (auto& r : rows)
      rep.rows.push_back(std::move(r));
  }

  for (auto& row : rep.rows) {
    row.deviation = std::abs(row.value - row.oracle) / std::abs(row.oracle);
    rep.max_deviation = std::max(rep.max_deviation, row.deviation);
  }
  return rep;
}

} // namespace sqft
