#pragma once

// Frequency-domain Green's function per angular channel,
//
//   G_l(r, r'; w) = phi(r_>) psi(r_<) / W = u_phi(r_>) u_psi(r_<) / (r_> r_< W),
//
// with W = u_phi u_psi' - u_phi' u_psi the r* Wronskian of the reduced
// solutions. With this normalization G_l is the resolvent of
// -d^2/dr*^2 + V_l at w^2 + i0 divided by r r', and d/dr* G jumps by -1/r'^2
// across r = r'.

#include <sqft/errors.hpp>
#include <sqft/geometry.hpp>
#include <sqft/logscaled.hpp>
#include <sqft/ode.hpp>
#include <sqft/radial.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace sqft {

/// dV_l/dr.
inline double effective_potential_slope(double r, int l, const SpacetimeParams& p) {
  const double L = static_cast<double>(l) * (l + 1);
  const double f = 1.0 - 2.0 * p.M / r;
  const double B = L / (r * r) + 2.0 * p.M / (r * r * r) + p.m * p.m;
  const double dB = -2.0 * L / (r * r * r) - 6.0 * p.M / (r * r * r * r);
  return 2.0 * p.M / (r * r) * B + f * dB;
}

struct ModeValue {
  LogScaled u, du;
};

/// u and du/dr* at an arbitrary radius inside the grid by quintic Hermite
/// interpolation in r*, using u'' = Q u and u''' = Q' u + Q u' at the nodes
/// (local order 6).
inline ModeValue interpolate_mode(const ModeSolution& mode, const RadialPoint& pt) {
  const auto& g = mode.grid;
  const std::size_t exact = g.find_tortoise(pt.rstar);
  if (exact != RadialGrid::npos)
    return {mode.u[exact], mode.du[exact]};
  const double eps = 1e-12 * std::max(1.0, std::abs(pt.rstar));
  if (g.size() < 2 || pt.rstar < g.front().rstar - eps || pt.rstar > g.back().rstar + eps)
    throw InterpolationError("interpolate_mode: radius outside the solution grid");
  const auto pts = g.points();
  auto it = std::upper_bound(pts.begin(), pts.end(), pt.rstar,
                             [](double v, const RadialPoint& a) { return v < a.rstar; });
  std::size_t i = static_cast<std::size_t>(it - pts.begin());
  i = std::clamp<std::size_t>(i, 1, g.size() - 1) - 1;
  const auto& a = g[i];
  const auto& b = g[i + 1];
  const double h = b.rstar - a.rstar;
  const double t = (pt.rstar - a.rstar) / h;

  const double ref = std::max({mode.u[i].scale, mode.du[i].scale, mode.u[i + 1].scale, mode.du[i + 1].scale});
  auto val = [ref](const LogScaled& v) { return v.mantissa * std::exp(v.scale - ref); };
  const double w2 = mode.omega * mode.omega;
  auto derivs = [&](std::size_t k, const RadialPoint& q) {
    const cplx u = val(mode.u[k]), du = val(mode.du[k]);
    const double Q = effective_potential_at(q.r, q.offset, mode.l, mode.params) - w2;
    const double f = q.offset / q.r;
    const double dQ = f * effective_potential_slope(q.r, mode.l, mode.params);
    return std::array<cplx, 4>{u, du, Q * u, dQ * u + Q * du};
  };
  const auto A = derivs(i, a);
  const auto B = derivs(i + 1, b);

  const double t2 = t * t, t3 = t2 * t, t4 = t3 * t, t5 = t4 * t;
  const double H0 = 1 - 10 * t3 + 15 * t4 - 6 * t5, H1 = t - 6 * t3 + 8 * t4 - 3 * t5,
               H2 = 0.5 * (t2 - 3 * t3 + 3 * t4 - t5), H3 = 10 * t3 - 15 * t4 + 6 * t5,
               H4 = -4 * t3 + 7 * t4 - 3 * t5, H5 = 0.5 * (t3 - 2 * t4 + t5);
  auto hermite = [&](int k) {
    return H0 * A[k] + H1 * h * A[k + 1] + H2 * h * h * A[k + 2] + H3 * B[k] + H4 * h * B[k + 1] +
           H5 * h * h * B[k + 2];
  };
  return {LogScaled(hermite(0), ref).normalized(), LogScaled(hermite(1), ref).normalized()};
}

struct GreenEntry {
  double r = 0.0, r_prime = 0.0;
  cplx value;
};

struct FrequencyGreen {
  double omega = 0.0;
  int l = 0;
  SpacetimeParams params;
  LogScaled wronskian;
  double wronskian_spread = 0.0;
  std::vector<GreenEntry> values;
  RadialGrid grid; ///< grid of the phi solution
  std::shared_ptr<const ModeSolution> phi, psi;

  /// Stored value for (r, r') in either order.
  cplx at(double r, double rp) const {
    const double tol = 1e-12;
    for (const auto& e : values)
      if ((std::abs(e.r - r) <= tol * r && std::abs(e.r_prime - rp) <= tol * rp) ||
          (std::abs(e.r - rp) <= tol * rp && std::abs(e.r_prime - r) <= tol * r))
        return e.value;
    throw DomainError("FrequencyGreen: pair not stored");
  }
};

namespace detail {

inline LogScaled green_from_modes(const ModeSolution& phi, const ModeSolution& psi, const LogScaled& W,
                                  double r, double rp) {
  const double r_gt = std::max(r, rp), r_lt = std::min(r, rp);
  const auto& p = phi.params;
  const auto a = interpolate_mode(phi, radial_point_from_radius(r_gt, p));
  const auto b = interpolate_mode(psi, radial_point_from_radius(r_lt, p));
  return (a.u * b.u / W) * cplx(1.0 / (r_gt * r_lt));
}

} // namespace detail

inline FrequencyGreen green_frequency(const ModeSolution& phi, const ModeSolution& psi,
                                      const std::vector<std::pair<double, double>>& pairs) {
  if (phi.boundary == Boundary::HorizonRegular || psi.boundary != Boundary::HorizonRegular)
    throw DomainError("green_frequency: expected (phi, psi) in that order");
  const auto W = wronskian(phi, psi);
  FrequencyGreen g;
  g.omega = phi.omega;
  g.l = phi.l;
  g.params = phi.params;
  g.wronskian = W.value;
  g.wronskian_spread = W.relative_spread;
  g.grid = phi.grid;
  g.phi = std::make_shared<const ModeSolution>(phi);
  g.psi = std::make_shared<const ModeSolution>(psi);
  for (const auto& [r, rp] : pairs)
    g.values.push_back({r, rp, detail::green_from_modes(phi, psi, W.value, r, rp).value()});
  return g;
}

struct GreenResidualReport {
  double delta = 0.0;
  double max_residual = 0.0;
  std::vector<double> radii;
  std::vector<double> residuals;
};

/// Checks the jump of d/dr* G(r, r') across r = r' against -1/r'^2 for
/// every stored r', using one-sided derivatives at r* = r*' +/- delta.
inline GreenResidualReport green_residual_check(const FrequencyGreen& g, double delta) {
  GreenResidualReport rep;
  rep.delta = delta;
  if (!g.phi || !g.psi)
    return rep;
  const auto& p = g.params;
  std::vector<double> radii;
  for (const auto& e : g.values)
    radii.push_back(e.r_prime);
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
  auto d_full = [&](const ModeSolution& m, const RadialPoint& pt) {
    const auto v = interpolate_mode(m, pt);
    const double f = pt.offset / pt.r;
    return v.du * cplx(1.0 / pt.r) + v.u * cplx(-f / (pt.r * pt.r));
  };
  for (double rp : radii) {
    const auto c = radial_point_from_radius(rp, p);
    const auto above = radial_point_from_tortoise(c.rstar + delta, p);
    const auto below = radial_point_from_tortoise(c.rstar - delta, p);
    const auto psi_c = interpolate_mode(*g.psi, c).u * cplx(1.0 / rp);
    const auto phi_c = interpolate_mode(*g.phi, c).u * cplx(1.0 / rp);
    const LogScaled jump_hi = d_full(*g.phi, above) * psi_c / g.wronskian;
    const LogScaled jump_lo = d_full(*g.psi, below) * phi_c / g.wronskian;
    const cplx jump = jump_hi.value() - jump_lo.value();
    const double expected = -1.0 / (rp * rp);
    rep.radii.push_back(rp);
    rep.residuals.push_back(std::abs(jump - expected) / std::abs(expected));
    rep.max_residual = std::max(rep.max_residual, rep.residuals.back());
  }
  return rep;
}

struct ChannelOptions {
  double tol = 1e-10;
  int frobenius_order = 48;
};

/// Batch evaluation of G_l(r, r'; w) at a fixed set of radius pairs, for use
/// inside angular sums and frequency quadrature.
///
/// psi is integrated outward only up to a matching radius r_m: the largest
/// r_< or, above threshold, the outer turning point (barrier peak if there
/// is none) when that is smaller. Beyond r_m the outgoing phi and its
/// conjugate are smooth travelling waves, and psi = A phi + B phi* with
/// A/B = W[psi, phi*]/W[phi, psi], which keeps the step count independent
/// of the number of oscillations between r_m and the probe radii.
class ChannelGreen {
public:
  ChannelGreen(const SpacetimeParams& p, std::vector<std::pair<double, double>> pairs,
               ChannelOptions opts = {})
      : p_(p), pairs_(std::move(pairs)), opts_(opts) {
    p_.validate();
    if (pairs_.empty())
      throw DomainError("ChannelGreen: no radius pairs");
    for (const auto& [a, b] : pairs_) {
      detail::require_exterior(a, p_, "ChannelGreen");
      detail::require_exterior(b, p_, "ChannelGreen");
      lt_.push_back(std::min(a, b));
      gt_.push_back(std::max(a, b));
    }
    max_lt_ = *std::max_element(lt_.begin(), lt_.end());
    max_gt_ = *std::max_element(gt_.begin(), gt_.end());
    min_lt_ = *std::min_element(lt_.begin(), lt_.end());
  }

  const std::vector<std::pair<double, double>>& pairs() const { return pairs_; }

  std::vector<cplx> evaluate(double omega, int l) const {
    if (omega == 0.0)
      throw DomainError("ChannelGreen: omega = 0 is not supported");
    detail::check_l(l);
    const Boundary bnd = infinity_boundary(omega, p_);
    return evaluate_core(omega * omega, cplx(omega), omega < 0.0, bnd, l);
  }

  /// G_l at imaginary frequency omega = i y (y > 0): the Euclidean kernel,
  /// real and positive for r != r'. Decays at both ends.
  std::vector<double> evaluate_imaginary(double y, int l) const {
    if (!(y > 0.0))
      throw DomainError("ChannelGreen: imaginary frequency needs y > 0");
    detail::check_l(l);
    const auto v = evaluate_core(-y * y, cplx(0.0, y), false, Boundary::InfinityDecaying, l);
    std::vector<double> out(v.size());
    for (std::size_t k = 0; k < v.size(); ++k)
      out[k] = v[k].real();
    return out;
  }

private:
  std::vector<cplx> evaluate_core(double w2, cplx omega, bool conjugate, Boundary bnd, int l) const {
    const double r_m = bnd == Boundary::InfinityOutgoing ? match_radius(w2, l) : max_lt_;
    const SquaredFrequency sq{w2};

    // psi from the inner boundary to r_m.
    std::vector<double> psi_r;
    for (double r : lt_)
      if (r <= r_m)
        psi_r.push_back(r);
    psi_r.push_back(r_m);
    const auto psi_grid = make_grid(psi_r);
    std::vector<LogScaled> psi_u, psi_du;
    detail::propagate(psi_seed(w2, omega, l, psi_grid.front()), psi_grid, sq, l, p_, opts_.tol, false,
                      psi_u, psi_du);

    // phi from its seed inward to min(r_m, smallest r_>).
    std::vector<double> phi_r(gt_.begin(), gt_.end());
    for (double r : lt_)
      if (r > r_m)
        phi_r.push_back(r);
    phi_r.push_back(r_m);
    const auto phi_grid = make_grid(phi_r);
    std::vector<LogScaled> phi_u, phi_du;
    const auto seed = phi_seed(w2, conjugate, bnd, l, phi_grid.back().r);
    detail::propagate(seed, phi_grid, sq, l, p_, opts_.tol, true, phi_u, phi_du);

    const double rstar_m = radial_point_from_radius(r_m, p_).rstar;
    const std::size_t im_psi = psi_grid.find_tortoise(rstar_m);
    const std::size_t im_phi = phi_grid.find_tortoise(rstar_m);
    double rel = 0.0;
    const LogScaled W = detail::wronskian_at(phi_u[im_phi], phi_du[im_phi], psi_u[im_psi], psi_du[im_psi], &rel);
    if (rel < 1e-13)
      throw DegenerateModesError("ChannelGreen: vanishing Wronskian");

    LogScaled ratio, D;
    bool decomposed = false;
    if (bnd == Boundary::InfinityOutgoing) {
      const LogScaled pc = conj(phi_u[im_phi]), dpc = conj(phi_du[im_phi]);
      D = detail::wronskian_at(phi_u[im_phi], phi_du[im_phi], pc, dpc);
      ratio = detail::wronskian_at(psi_u[im_psi], psi_du[im_psi], pc, dpc) / W;
      decomposed = true;
    }

    std::vector<cplx> out(pairs_.size());
    for (std::size_t k = 0; k < pairs_.size(); ++k) {
      const double a = lt_[k], b = gt_[k];
      const LogScaled ub = phi_u[phi_grid.find_radius(b)];
      LogScaled val;
      if (a <= r_m) {
        val = ub * psi_u[psi_grid.find_radius(a)] / W;
      } else {
        if (!decomposed)
          throw DomainError("ChannelGreen: internal matching error");
        const LogScaled ua = phi_u[phi_grid.find_radius(a)];
        val = ub * (ua * ratio + conj(ua)) / D;
      }
      out[k] = (val * cplx(1.0 / (a * b))).value();
    }
    return out;
  }

public:
  /// Outer matching radius above threshold (see class comment).
  double match_radius(double w2, int l) const {
    auto excess = [&](double r) { return effective_potential(r, l, p_) - w2; };
    if (excess(max_lt_) >= 0.0)
      return max_lt_;
    const double r_floor = p_.M > 0.0 ? p_.horizon() * (1.0 + 1e-6) : 1e-6 * max_lt_;
    double r = max_lt_, best_r = max_lt_, best_v = excess(max_lt_);
    while (r > r_floor) {
      const double next = std::max(r / 1.01, r_floor);
      const double v = excess(next);
      if (v >= 0.0) {
        double lo = next, hi = r; // excess(lo) >= 0 > excess(hi)
        for (int i = 0; i < 60; ++i) {
          const double mid = 0.5 * (lo + hi);
          (excess(mid) >= 0.0 ? lo : hi) = mid;
        }
        return hi;
      }
      if (v > best_v) {
        best_v = v;
        best_r = next;
      }
      if (next == r_floor)
        break;
      r = next;
    }
    return best_r;
  }

private:
  RadialGrid make_grid(std::vector<double> r) const {
    std::sort(r.begin(), r.end());
    std::vector<double> u;
    for (double v : r)
      if (u.empty() || v > u.back() * (1.0 + 1e-13))
        u.push_back(v);
    return RadialGrid::from_radii(u, p_);
  }

  ModeSeed psi_seed(double w2, cplx omega, int l, const RadialPoint& first) const {
    const double tol = 0.1 * opts_.tol;
    if (p_.M == 0.0) {
      const double r0 = std::min(0.5 * first.r, 1e-2 / std::max(std::sqrt(std::abs(w2)), p_.m));
      return detail::origin_seed(w2, l, p_, r0, 40, tol);
    }
    if (auto s = barrier_seed(w2, l, first))
      return *s;
    const double rs = p_.horizon();
    const int lo = opts_.frobenius_order, hi = lo + 8;
    const auto coeffs = detail::frobenius_coefficients(omega, l, p_, hi);
    for (double frac : {0.3, 0.1, 3e-2, 1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8, 1e-10, 1e-12}) {
      const double x = frac * rs;
      if (x >= 0.5 * first.offset)
        continue;
      const auto pt = radial_point_from_log_offset(std::log(x), p_);
      const auto a = detail::frobenius_sum(coeffs, lo, omega, l, p_, pt);
      const auto b = detail::frobenius_sum(coeffs, hi, omega, l, p_, pt);
      const double diff = std::abs((a.u / b.u).value() - 1.0) + std::abs((a.du / b.du).value() - 1.0);
      if (diff < tol && b.residual < tol)
        return {pt, b.u, b.du, Boundary::HorizonRegular, SeedKind::Frobenius, hi, b.residual};
    }
    throw SeedAccuracyError("ChannelGreen: no accurate horizon seed found");
  }

  /// When psi must tunnel through a forbidden zone inside the first grid
  /// point, the outward-growing solution inside the zone fixes
  /// psi up to a decaying admixture of relative size e^{-2 int kappa dr*}.
  /// Seed there with WKB data once that integral reaches kBarrierDepth; the
  /// part dropped (horizon transmission) is smaller still.
  std::optional<ModeSeed> barrier_seed(double w2, int l, const RadialPoint& first) const {
    constexpr double kBarrierDepth = 22.0;
    if (p_.M == 0.0)
      return std::nullopt;
    const double rs = p_.horizon();
    auto excess = [&](double x) { return effective_potential_at(rs + x, x, l, p_) - w2; };
    double x = first.offset;
    double q = excess(x);
    while (!(q > 0.0)) { // allowed stretch between the zone and the first point
      x /= 1.01;
      q = excess(x);
      if (x < 1e-12 * rs)
        return std::nullopt;
    }
    double depth = 0.0;
    while (depth < kBarrierDepth) {
      const double xn = x / 1.01;
      const double qn = excess(xn);
      if (!(qn > 0.0) || xn < 1e-12 * rs)
        return std::nullopt;
      // dr* = r dx / x
      depth += 0.5 * (std::sqrt(q) * (rs + x) / x + std::sqrt(qn) * (rs + xn) / xn) * (x - xn);
      x = xn;
      q = qn;
    }
    const auto pt = radial_point_from_log_offset(std::log(x), p_);
    const double dq = (x / pt.r) * effective_potential_slope(pt.r, l, p_); // dV/dr*
    const double k = std::sqrt(q);
    ModeSeed s{pt, LogScaled(cplx(1.0)), LogScaled(cplx(k - 0.25 * dq / q)), Boundary::HorizonRegular,
               SeedKind::Wkb, 1, std::exp(-2.0 * depth)};
    return s;
  }

  /// Sign of w^2 - V is that at infinity everywhere beyond r.
  bool asymptotic_beyond(double r, double w2, int l) const {
    const bool osc = w2 > p_.m * p_.m;
    for (double x = r; x < 1e4 * r; x *= 1.02)
      if ((w2 - effective_potential(x, l, p_) > 0.0) != osc)
        return false;
    return true;
  }

  ModeSeed phi_seed(double w2, bool conjugate, Boundary bnd, int l, double r_min) const {
    const double tol = 0.1 * opts_.tol;
    const double r_series = std::max(default_r_seed(p_), r_min);
    for (double r = r_min; r < r_series; r *= 1.25) {
      if (!asymptotic_beyond(r, w2, l))
        continue;
      if (auto s = detail::wkb_seed(w2, conjugate, bnd, l, p_, r, tol, 24))
        return *s;
    }
    double r = std::max(r_series, 50.0 * std::max(p_.horizon(), 1.0 / p_.m));
    for (int attempt = 0;; ++attempt) {
      try {
        return detail::large_r_seed(w2, conjugate, bnd, l, p_, r, 12, tol);
      } catch (const SeedAccuracyError&) {
        if (attempt > 60)
          throw;
        r *= 1.5;
      }
    }
  }

  SpacetimeParams p_;
  std::vector<std::pair<double, double>> pairs_;
  ChannelOptions opts_;
  std::vector<double> lt_, gt_;
  double max_lt_ = 0.0, max_gt_ = 0.0, min_lt_ = 0.0;
};

} // namespace sqft
