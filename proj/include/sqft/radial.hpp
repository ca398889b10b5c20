#pragma once

// Radial mode solutions of the reduced Klein-Gordon equation.
//
//   psi: regular at the future horizon, u ~ e^{-i omega r*}
//   phi: normalized at infinity; outgoing e^{i(q r + a ln r)}/(q i^{l+1}) with
//        q = sqrt(omega^2 - m^2), a = (M/q)(2 omega^2 - m^2) above threshold,
//        decaying e^{-b r} r^{-c} / i^{l+2} with b = sqrt(m^2 - omega^2),
//        c = (M/b)(2 b^2 - m^2) below it.
//
// Both are seeded from series and propagated with ModePropagator in the
// direction in which the wanted solution is the growing one.

#include <sqft/errors.hpp>
#include <sqft/fit.hpp>
#include <sqft/geometry.hpp>
#include <sqft/logscaled.hpp>
#include <sqft/ode.hpp>
#include <sqft/series.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace sqft {

enum class Boundary { HorizonRegular, InfinityOutgoing, InfinityDecaying };

inline const char* to_string(Boundary b) {
  switch (b) {
  case Boundary::HorizonRegular: return "HorizonRegular";
  case Boundary::InfinityOutgoing: return "InfinityOutgoing";
  case Boundary::InfinityDecaying: return "InfinityDecaying";
  }
  return "?";
}

enum class SeedKind { LargeR, Frobenius, Wkb, User };

/// Initial data (u, du/dr*) at one radial point.
struct ModeSeed {
  RadialPoint at;
  LogScaled u;
  LogScaled du;
  Boundary boundary = Boundary::HorizonRegular;
  SeedKind kind = SeedKind::User;
  int order = 0;
  double residual = 0.0; ///< relative truncation/ODE residual estimate at the seed
};

constexpr double kThresholdGap = 1e-9;

inline void check_threshold(double omega, const SpacetimeParams& p) {
  if (std::abs(omega * omega - p.m * p.m) < kThresholdGap)
    throw ThresholdError("frequency at the mass threshold omega^2 = m^2");
}

inline Boundary infinity_boundary(double omega, const SpacetimeParams& p) {
  check_threshold(omega, p);
  return omega * omega > p.m * p.m ? Boundary::InfinityOutgoing : Boundary::InfinityDecaying;
}

/// Constants of the large-r behaviour of phi.
struct ExpectedAsymptotics {
  bool oscillatory = true;
  double q = 0.0;               ///< wavenumber (oscillatory)
  double log_coefficient = 0.0; ///< a = (M/q)(2w^2 - m^2)
  double b = 0.0;               ///< decay rate (evanescent)
  double c = 0.0;               ///< power exponent: |u| ~ e^{-br} r^{-c}
};

inline ExpectedAsymptotics expected_asymptotics(double omega, const SpacetimeParams& p) {
  check_threshold(omega, p);
  ExpectedAsymptotics e;
  const double w2 = omega * omega, m2 = p.m * p.m;
  if (w2 > m2) {
    e.q = std::sqrt(w2 - m2);
    e.log_coefficient = p.M / e.q * (2.0 * w2 - m2);
  } else {
    e.oscillatory = false;
    e.b = std::sqrt(m2 - w2);
    e.c = p.M / e.b * (2.0 * e.b * e.b - m2);
  }
  return e;
}

namespace detail {

inline void check_l(int l) {
  if (l < 0)
    throw DomainError("angular momentum l must be >= 0");
}

/// Coefficients p_k of d ln u / dr = sum_k p_k r^{-k} for omega > 0.
///
/// From the Riccati form d(f p)/dr = (V - w^2)/f - f p^2 with
/// (V - w^2)/f = sum_k Q_k r^{-k}:
///   P2_n = Q_n + 2M P2_{n-1} + (n-1) g_{n-1},   g_k = p_k - 2M p_{k-1},
/// where P2 is the Cauchy square of p.
inline std::vector<cplx> large_r_coefficients(double w2, int l, const SpacetimeParams& p,
                                              int order) {
  const double m2 = p.m * p.m, M = p.M, L = static_cast<double>(l) * (l + 1);
  const double rs = 2.0 * M;
  std::vector<double> Q(static_cast<std::size_t>(order) + 1);
  double rs_k = 1.0;
  for (int k = 0; k <= order; ++k) {
    Q[static_cast<std::size_t>(k)] = -w2 * rs_k;
    rs_k *= rs;
  }
  Q[0] += m2;
  if (order >= 2)
    Q[2] += L;
  if (order >= 3)
    Q[3] += rs;

  std::vector<cplx> pk(static_cast<std::size_t>(order) + 1), P2(pk.size());
  pk[0] = w2 > m2 ? cplx(0.0, std::sqrt(w2 - m2)) : cplx(-std::sqrt(m2 - w2), 0.0);
  P2[0] = pk[0] * pk[0];
  auto g = [&](int k) { return pk[k] - (k >= 1 ? rs * pk[k - 1] : cplx(0.0)); };
  for (int n = 1; n <= order; ++n) {
    const cplx target = Q[static_cast<std::size_t>(n)] + rs * P2[n - 1] + static_cast<double>(n - 1) * g(n - 1);
    cplx cross = 0.0;
    for (int i = 1; i < n; ++i)
      cross += pk[i] * pk[n - i];
    pk[n] = (target - cross) / (2.0 * pk[0]);
    P2[n] = target;
  }
  return pk;
}

} // namespace detail

namespace detail {
inline ModeSeed large_r_seed(double w2, bool conjugate, Boundary bnd, int l, const SpacetimeParams& p,
                             double r_seed, int order, double tol);
} // namespace detail

/// phi seed from the large-r expansion, truncated after r^{-order} in d ln u/dr.
inline ModeSeed seed_phi_infinity(double omega, int l, const SpacetimeParams& p, double r_seed,
                                  int order, double tol = 1e-8) {
  p.validate();
  detail::check_l(l);
  const Boundary bnd = infinity_boundary(omega, p);
  if (omega == 0.0)
    throw DomainError("seed_phi_infinity: omega = 0 is not supported");
  if (order < 1)
    throw DomainError("seed_phi_infinity: order must be >= 1");
  const double r_min = 50.0 * std::max(p.horizon(), 1.0 / p.m);
  if (!(r_seed >= r_min * (1.0 - 1e-12)))
    throw DomainError("seed_phi_infinity: r_seed must be >= 50 max(2M, 1/m)");

  return detail::large_r_seed(omega * omega, omega < 0.0, bnd, l, p, r_seed, order, tol);
}

namespace detail {

inline ModeSeed large_r_seed(double w2, bool conjugate, Boundary bnd, int l, const SpacetimeParams& p,
                             double r_seed, int order, double tol) {
  const auto pk = detail::large_r_coefficients(w2, l, p, order);
  const double r = r_seed, rs = p.horizon(), f = 1.0 - rs / r;

  // ln u up to a constant, and p, dp/dr from the truncated series.
  cplx log_u = pk[0] * r + (order >= 1 ? pk[1] * std::log(r) : 0.0);
  cplx pr = 0.0, dpr = 0.0;
  for (int k = order; k >= 0; --k) {
    const double rk = std::pow(r, -k);
    pr += pk[k] * rk;
    dpr += -static_cast<double>(k) * pk[k] * rk / r;
    if (k >= 2)
      log_u += pk[k] * std::pow(r, 1 - k) / static_cast<double>(1 - k);
  }
  const double L = static_cast<double>(l) * (l + 1);
  const double Qexact = (L / (r * r) + 2.0 * p.M / (r * r * r) + p.m * p.m) - w2 / f;
  const cplx res = (rs / (r * r)) * pr + f * dpr + f * pr * pr - Qexact;
  const double residual = std::abs(res) / (std::abs(pk[0] * pk[0]) + std::abs(Qexact));

  // Normalization 1/(q i^{l+1}) above threshold, 1/i^{l+2} below.
  const double half_pi = 0.5 * std::numbers::pi;
  if (bnd == Boundary::InfinityOutgoing)
    log_u += cplx(-std::log(std::abs(pk[0])), -half_pi * (l + 1));
  else
    log_u += cplx(0.0, -half_pi * (l + 2));

  ModeSeed seed;
  seed.at = radial_point_from_radius(r, p);
  seed.u = LogScaled::from_log(log_u);
  seed.du = seed.u * (f * pr);
  if (conjugate) {
    seed.u = conj(seed.u);
    seed.du = conj(seed.du);
  }
  seed.boundary = bnd;
  seed.kind = SeedKind::LargeR;
  seed.order = order;
  seed.residual = residual;
  if (!(residual <= tol))
    throw SeedAccuracyError("seed_phi_infinity: series residual " + std::to_string(residual) +
                            " exceeds tolerance at r_seed");
  return seed;
}

} // namespace detail

namespace detail {

/// Frobenius coefficients b_n of h = sum_n b_n xi^n, u = e^{-i omega r*} h,
/// in the scaled offset xi = (r - 2M)/2M. Scaling keeps the recursion free
/// of powers of 1/2M, which overflow for small M.
/// omega may be complex (omega = i y gives the Euclidean continuation).
inline std::vector<cplx> frobenius_coefficients(cplx omega, int l, const SpacetimeParams& p,
                                                int order) {
  const std::size_t N = static_cast<std::size_t>(order) + 2;
  const double rs = p.horizon(), L = static_cast<double>(l) * (l + 1);
  // In xi the equation is that of rs = 1 with omega -> omega rs, m -> m rs.
  std::vector<double> inv(N);
  for (std::size_t k = 0; k < N; ++k)
    inv[k] = k % 2 ? -1.0 : 1.0;
  std::vector<double> f(N, 0.0);
  for (std::size_t k = 1; k < N; ++k)
    f[k] = inv[k - 1];
  const auto inv2 = series::mul(inv, inv, N);
  const auto inv3 = series::mul(inv2, inv, N);
  std::vector<double> fx(N), U(N);
  for (std::size_t k = 0; k < N; ++k) {
    fx[k] = inv2[k];
    U[k] = L * inv2[k] + inv3[k];
  }
  U[0] += p.m * p.m * rs * rs;

  std::vector<cplx> a(static_cast<std::size_t>(order) + 1, cplx(0.0));
  a[0] = 1.0;
  const cplx iw2 = cplx(0.0, 2.0) * omega * rs;
  for (int n = 0; n < order; ++n) {
    cplx acc = 0.0;
    for (int k = 2; k <= n + 1; ++k)
      acc += f[k] * static_cast<double>((n - k + 2) * (n - k + 1)) * a[n - k + 2];
    for (int k = 1; k <= n; ++k)
      acc += fx[k] * static_cast<double>(n - k + 1) * a[n - k + 1];
    for (int k = 0; k <= n; ++k)
      acc -= U[k] * a[n - k];
    const double np1 = n + 1.0;
    a[n + 1] = -acc / (np1 * (np1 - iw2));
  }
  return a;
}

struct FrobeniusValue {
  LogScaled u, du;
  double residual;
};

/// Partial sum through a[order] of precomputed coefficients.
inline FrobeniusValue frobenius_sum(const std::vector<cplx>& a, int order, cplx omega, int l,
                                    const SpacetimeParams& p, const RadialPoint& pt) {
  const double x = pt.offset, r = pt.r, rs = p.horizon(), xi = x / rs;
  cplx h = 0.0, hx = 0.0, hxx = 0.0;
  for (int n = order; n >= 0; --n) {
    h = h * xi + a[n];
    if (n >= 1)
      hx = hx * xi + static_cast<double>(n) * a[n];
    if (n >= 2)
      hxx = hxx * xi + static_cast<double>(n * (n - 1)) * a[n];
  }
  hx /= rs;
  hxx /= rs * rs;
  const double f = x / r, fx = rs / (r * r);
  const double L = static_cast<double>(l) * (l + 1);
  const double U = L / (r * r) + rs / (r * r * r) + p.m * p.m;
  const cplx iw2 = cplx(0.0, 2.0) * omega;
  const cplx res = f * hxx + (fx - iw2) * hx - U * h;
  const double scale = std::abs(f * hxx) + std::abs(fx * hx) + std::abs(iw2 * hx) + std::abs(U * h);
  FrobeniusValue out;
  const cplx minus_iw = cplx(0.0, -1.0) * omega;
  const LogScaled phase = LogScaled::from_log(minus_iw * pt.rstar);
  out.u = phase * h;
  out.du = phase * (minus_iw * h + f * hx);
  out.residual = std::abs(res) / scale;
  return out;
}

inline FrobeniusValue frobenius_evaluate(cplx omega, int l, const SpacetimeParams& p,
                                         const RadialPoint& pt, int order) {
  return frobenius_sum(frobenius_coefficients(omega, l, p, order), order, omega, l, p, pt);
}

} // namespace detail

/// psi seed from the Frobenius expansion about the horizon.
inline ModeSeed seed_psi_horizon(double omega, int l, const SpacetimeParams& p, double rstar_seed,
                                 int order, double tol = 1e-8) {
  p.validate();
  detail::check_l(l);
  if (p.M == 0.0)
    throw DomainError("seed_psi_horizon: no horizon for M = 0");
  if (order < 1)
    throw DomainError("seed_psi_horizon: order must be >= 1");
  if (!(rstar_seed <= -15.0 * p.horizon()))
    throw DomainError("seed_psi_horizon: rstar_seed must be <= -15 (2M)");
  const RadialPoint pt = radial_point_from_tortoise(rstar_seed, p);
  const auto v = detail::frobenius_evaluate(omega, l, p, pt, order);
  ModeSeed seed{pt, v.u, v.du, Boundary::HorizonRegular, SeedKind::Frobenius, order, v.residual};
  if (!(v.residual <= tol))
    throw SeedAccuracyError("seed_psi_horizon: series residual exceeds tolerance");
  return seed;
}

/// Regular solution at the origin for M = 0, u = r^{l+1} sum_k c_k r^{2k},
/// c_k = c_{k-1} (m^2 - w^2) / (2k (2k + 2l + 1)). Used in place of the
/// horizon seed in the flat limit; the series is entire.
namespace detail {
inline ModeSeed origin_seed(double w2, int l, const SpacetimeParams& p, double r0, int order,
                            double tol);
} // namespace detail

inline ModeSeed seed_psi_origin(double omega, int l, const SpacetimeParams& p, double r0,
                                int order, double tol = 1e-8) {
  return detail::origin_seed(omega * omega, l, p, r0, order, tol);
}

namespace detail {

inline ModeSeed origin_seed(double w2, int l, const SpacetimeParams& p, double r0, int order,
                            double tol) {
  p.validate();
  detail::check_l(l);
  if (p.M != 0.0)
    throw DomainError("seed_psi_origin: only defined for M = 0");
  if (!(r0 > 0.0) || order < 1)
    throw DomainError("seed_psi_origin: need r0 > 0 and order >= 1");
  const double k2 = p.m * p.m - w2;
  double c = 1.0, sum = 1.0, dsum = 0.0, last = 1.0;
  const double r2 = r0 * r0;
  for (int k = 1; k <= order; ++k) {
    c *= k2 / (2.0 * k * (2.0 * k + 2.0 * l + 1.0));
    const double term = c * std::pow(r2, k);
    sum += term;
    dsum += 2.0 * k * term / r0;
    last = std::abs(term);
  }
  ModeSeed seed;
  seed.at = radial_point_from_radius(r0, p);
  const double log_mag = (l + 1.0) * std::log(r0);
  if (sum == 0.0)
    throw SeedAccuracyError("seed_psi_origin: series vanishes at r0");
  seed.u = LogScaled(cplx(sum), log_mag).normalized();
  seed.du = seed.u * cplx((l + 1.0) / r0 + dsum / sum);
  seed.boundary = Boundary::HorizonRegular;
  seed.kind = SeedKind::Frobenius;
  seed.order = order;
  seed.residual = last / std::abs(sum);
  if (!(seed.residual <= tol))
    throw SeedAccuracyError("seed_psi_origin: series not converged at r0");
  return seed;
}

} // namespace detail

/// Local WKB seed for phi at radius r0, for use beyond the outermost turning
/// point. Returns nullopt when the asymptotic WKB sum does not reach `tol`.
///
/// The Taylor expansion of k^2 = omega^2 - V about r*(r0) is built from the
/// series solution of dr/dr* = 1 - 2M/r; the Riccati equation
/// y' + y^2 + k^2 = 0 is then solved order by order, y = sum_n y_n.
namespace detail {

inline std::optional<ModeSeed> wkb_seed_fixed(double w2, bool conjugate, Boundary bnd, int l,
                                              const SpacetimeParams& p, double r0, double tol,
                                              int max_order) {
  const std::size_t N = static_cast<std::size_t>(2 * max_order + 2);
  const double rs = p.horizon(), L = static_cast<double>(l) * (l + 1);

  std::vector<double> rr(N, 0.0), inv(N, 0.0);
  rr[0] = r0;
  inv[0] = 1.0 / r0;
  for (std::size_t k = 0; k + 1 < N; ++k) {
    rr[k + 1] = ((k == 0 ? 1.0 : 0.0) - rs * inv[k]) / static_cast<double>(k + 1);
    double acc = 0.0;
    for (std::size_t j = 1; j <= k + 1; ++j)
      acc += rr[j] * inv[k + 1 - j];
    inv[k + 1] = -acc / rr[0];
  }
  const auto inv2 = series::mul(inv, inv, N);
  const auto inv3 = series::mul(inv2, inv, N);
  std::vector<double> fser(N), bracket(N);
  for (std::size_t k = 0; k < N; ++k) {
    fser[k] = (k == 0 ? 1.0 : 0.0) - rs * inv[k];
    bracket[k] = L * inv2[k] + rs * inv3[k];
  }
  bracket[0] += p.m * p.m;
  auto K2 = series::mul(fser, bracket, N); // V
  for (auto& v : K2)
    v = -v;
  K2[0] += w2; // omega^2 - V
  const bool oscillatory = K2[0] > 0.0;
  if (oscillatory != (bnd == Boundary::InfinityOutgoing))
    return std::nullopt; // r0 not in the asymptotic regime of this branch

  std::vector<cplx> k2c(K2.begin(), K2.end());
  std::vector<cplx> y0;
  if (oscillatory) {
    y0 = series::sqrt(k2c, cplx(std::sqrt(K2[0]), 0.0), N);
    for (auto& v : y0)
      v *= cplx(0.0, 1.0);
  } else {
    std::vector<cplx> neg(N);
    for (std::size_t k = 0; k < N; ++k)
      neg[k] = -k2c[k];
    y0 = series::sqrt(neg, cplx(std::sqrt(-K2[0]), 0.0), N);
    for (auto& v : y0)
      v = -v;
  }

  std::vector<std::vector<cplx>> y{y0};
  cplx total = y0[0];
  double last = std::abs(y0[0]), best_err = std::numeric_limits<double>::infinity();
  cplx best = total;
  const auto inv_2y0 = series::reciprocal(y0, N);
  for (int n = 1; n <= max_order; ++n) {
    const std::size_t deg = N - static_cast<std::size_t>(2 * n);
    std::vector<cplx> acc = series::derivative(y[n - 1]);
    acc.resize(deg, cplx(0.0));
    for (int k = 1; k < n; ++k) {
      const auto prod = series::mul(y[k], y[n - k], deg);
      for (std::size_t j = 0; j < deg; ++j)
        acc[j] += prod[j];
    }
    auto yn = series::mul(acc, inv_2y0, deg);
    for (auto& v : yn)
      v *= -0.5;
    const double mag = std::abs(yn[0]);
    if (mag > last && n > 2)
      break; // asymptotic sum has started to diverge
    total += yn[0];
    y.push_back(std::move(yn));
    last = mag;
    const double err = mag / std::abs(total);
    if (err < best_err) {
      best_err = err;
      best = total;
    }
    if (err < 1e-17)
      break;
  }
  if (!(best_err <= tol))
    return std::nullopt;

  ModeSeed seed;
  seed.at = radial_point_from_radius(r0, p);
  seed.u = LogScaled(cplx(1.0), 0.0);
  seed.du = LogScaled(conjugate ? std::conj(best) : best, 0.0).normalized();
  seed.boundary = bnd;
  seed.kind = SeedKind::Wkb;
  seed.order = static_cast<int>(y.size()) - 1;
  seed.residual = best_err;
  return seed;
}

/// WKB seed for squared frequency w2 (negative for imaginary frequency).
/// `conjugate` selects the conjugate outgoing branch (omega < 0). Far from
/// the barrier a handful of orders suffice, and the series work grows with
/// the square of the truncation, so a short expansion is tried first.
inline std::optional<ModeSeed> wkb_seed(double w2, bool conjugate, Boundary bnd, int l,
                                        const SpacetimeParams& p, double r0, double tol,
                                        int max_order) {
  if (max_order > 8)
    if (auto s = wkb_seed_fixed(w2, conjugate, bnd, l, p, r0, tol, 8))
      return s;
  return wkb_seed_fixed(w2, conjugate, bnd, l, p, r0, tol, max_order);
}

} // namespace detail

inline std::optional<ModeSeed> seed_phi_wkb(double omega, int l, const SpacetimeParams& p,
                                            double r0, double tol, int max_order = 24) {
  const Boundary bnd = infinity_boundary(omega, p);
  return detail::wkb_seed(omega * omega, omega < 0.0, bnd, l, p, r0, tol, max_order);
}

struct ModeSolution {
  double omega = 0.0;
  int l = 0;
  SpacetimeParams params;
  Boundary boundary = Boundary::HorizonRegular;
  RadialGrid grid;
  std::vector<LogScaled> u;  ///< u(r*) at each grid point
  std::vector<LogScaled> du; ///< du/dr* at each grid point
  double seed_location = 0.0; ///< r* of the seed
  int seed_order = 0;
  SeedKind seed_kind = SeedKind::User;
  double tol = 0.0;
  std::size_t steps = 0;

  cplx u_value(std::size_t i) const { return u[i].value(); }
  cplx du_value(std::size_t i) const { return du[i].value(); }

  ModeSolution scaled(cplx c) const {
    ModeSolution out = *this;
    for (auto& v : out.u)
      v = v * c;
    for (auto& v : out.du)
      v = v * c;
    return out;
  }
};

struct IntegrateOptions {
  bool residual_check = false; ///< run the finite-difference residual check
  double residual_factor = 10.0;
};

double mode_residual(const ModeSolution& mode);

namespace detail {

/// Fills u, du on `grid` from `seed`; returns the accepted step count.
inline std::size_t propagate(const ModeSeed& seed, const RadialGrid& grid, SquaredFrequency w2, int l,
                             const SpacetimeParams& p, double tol, bool inward,
                             std::vector<LogScaled>& u, std::vector<LogScaled>& du) {
  const double slack = 1e-12 * std::max(1.0, std::abs(seed.at.rstar));
  const std::size_t n = grid.size();
  u.resize(n);
  du.resize(n);
  ModePropagator prop(w2, l, p, tol);
  prop.reset(seed.at.log_offset, seed.u, seed.du);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t i = inward ? n - 1 - j : j;
    const auto& pt = grid[i];
    if (std::abs(pt.rstar - seed.at.rstar) > slack)
      prop.advance_to(pt.log_offset);
    else
      prop.reset(pt.log_offset, seed.u, seed.du);
    u[i] = prop.u();
    du[i] = prop.du();
  }
  return prop.steps();
}

} // namespace detail

/// Propagates `seed` across `target_grid`. The seed must sit at or beyond
/// the end of the grid from which integration starts: the far end for phi
/// (inward integration), the near end for psi (outward integration).
inline ModeSolution integrate_mode(const ModeSeed& seed, const RadialGrid& target_grid,
                                   const SpacetimeParams& p, double omega, int l, double tol,
                                   const IntegrateOptions& opts = {}) {
  p.validate();
  detail::check_l(l);
  if (omega == 0.0)
    throw DomainError("integrate_mode: omega = 0 is not supported");
  if (!(tol >= 1e-12 && tol <= 1e-4))
    throw DomainError("integrate_mode: tol must lie in [1e-12, 1e-4]");
  if (target_grid.empty())
    throw DomainError("integrate_mode: empty grid");
  if (seed.boundary != Boundary::HorizonRegular)
    check_threshold(omega, p);

  const double slack = 1e-12 * std::max(1.0, std::abs(seed.at.rstar));
  const bool inward = seed.at.rstar >= target_grid.back().rstar - slack;
  const bool outward = seed.at.rstar <= target_grid.front().rstar + slack;
  if (!inward && !outward)
    throw DomainError("integrate_mode: seed must lie at an end of the target grid");

  ModeSolution sol;
  sol.omega = omega;
  sol.l = l;
  sol.params = p;
  sol.boundary = seed.boundary;
  sol.grid = target_grid;
  sol.seed_location = seed.at.rstar;
  sol.seed_order = seed.order;
  sol.seed_kind = seed.kind;
  sol.tol = tol;
  const std::size_t n = target_grid.size();
  sol.u.resize(n);
  sol.du.resize(n);

  sol.steps = detail::propagate(seed, target_grid, SquaredFrequency{omega * omega}, l, p, tol, inward,
                                sol.u, sol.du);

  if (opts.residual_check) {
    const double res = mode_residual(sol);
    if (res > opts.residual_factor * tol)
      throw ResidualError("integrate_mode: a-posteriori residual " + std::to_string(res) +
                          " exceeds tolerance");
  }
  return sol;
}

namespace detail {

/// Weights of the Lagrange interpolant's first derivative at node x[i].
inline std::vector<double> fd_weights_first(std::size_t i, const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> w(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == i) {
      for (std::size_t k = 0; k < n; ++k)
        if (k != i)
          w[i] += 1.0 / (x[i] - x[k]);
      continue;
    }
    double num = 1.0, den = 1.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j)
        den *= x[j] - x[k];
      if (k != j && k != i)
        num *= x[i] - x[k];
    }
    w[j] = num / den;
  }
  return w;
}

} // namespace detail

/// Largest normalized ODE residual |d(du)/dr* - (V - w^2) u| over interior
/// samples, with d/dr* from 7-point Lagrange differences on the stored du.
/// Normalized by |V - w^2||u| + k|du|, k = max(sqrt|V - w^2|, 1/r). Only
/// meaningful when the grid resolves the local wavelength.
inline double mode_residual(const ModeSolution& mode) {
  const auto& g = mode.grid;
  const std::size_t n = g.size();
  if (n < 7)
    return 0.0;
  double worst = 0.0;
  for (std::size_t i = 3; i + 3 < n; ++i) {
    std::vector<double> xs(7);
    for (std::size_t j = 0; j < 7; ++j)
      xs[j] = g[i - 3 + j].rstar;
    const auto w = detail::fd_weights_first(3, xs);
    const double s0 = mode.du[i].scale;
    cplx d = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
      const auto& v = mode.du[i - 3 + j];
      d += w[j] * v.mantissa * std::exp(v.scale - s0);
    }
    const auto& pt = g[i];
    const double Q = effective_potential_at(pt.r, pt.offset, mode.l, mode.params) - mode.omega * mode.omega;
    const double k = std::max(std::sqrt(std::abs(Q)), 1.0 / pt.r);
    const cplx u = mode.u[i].mantissa * std::exp(mode.u[i].scale - s0);
    const cplx du = mode.du[i].mantissa;
    const double denom = std::abs(Q) * std::abs(u) + k * std::abs(du);
    worst = std::max(worst, std::abs(d - Q * u) / denom);
  }
  return worst;
}

struct SolveOptions {
  double tol = 1e-10;
  double r_seed = 0.0;     ///< 0: max(100 (2M), 100/m), raised until the seed is accurate
  int phi_order = 8;
  double rstar_seed = 0.0; ///< 0: -30 (2M)
  int psi_order = 12;
  IntegrateOptions integrate{};
};

inline double default_r_seed(const SpacetimeParams& p) {
  return std::max(100.0 * p.horizon(), 100.0 / p.m);
}

/// phi on `grid` with an automatically placed large-r seed.
inline ModeSolution solve_phi(double omega, int l, const SpacetimeParams& p, const RadialGrid& grid,
                              const SolveOptions& opts = {}) {
  double r = std::max(opts.r_seed > 0.0 ? opts.r_seed : default_r_seed(p), grid.back().r);
  const double seed_tol = std::min(1e-8, opts.tol);
  for (int attempt = 0;; ++attempt) {
    try {
      const auto seed = seed_phi_infinity(omega, l, p, r, opts.phi_order, seed_tol);
      return integrate_mode(seed, grid, p, omega, l, opts.tol, opts.integrate);
    } catch (const SeedAccuracyError&) {
      if (attempt >= 40)
        throw;
      r *= 1.5;
    }
  }
}

/// psi on `grid` with a horizon seed at min(rstar_seed, start of grid), or
/// the regular origin solution when M = 0.
inline ModeSolution solve_psi(double omega, int l, const SpacetimeParams& p, const RadialGrid& grid,
                              const SolveOptions& opts = {}) {
  if (p.M == 0.0) {
    const double r0 = std::min(grid.front().r, 1e-2 / std::max(std::abs(omega), p.m));
    const auto seed = seed_psi_origin(omega, l, p, r0, 30, std::min(1e-8, opts.tol));
    return integrate_mode(seed, grid, p, omega, l, opts.tol, opts.integrate);
  }
  double rstar = std::min(opts.rstar_seed < 0.0 ? opts.rstar_seed : -30.0 * p.horizon(),
                          grid.front().rstar);
  const double seed_tol = std::min(1e-8, opts.tol);
  for (int attempt = 0;; ++attempt) {
    try {
      const auto seed = seed_psi_horizon(omega, l, p, rstar, opts.psi_order, seed_tol);
      return integrate_mode(seed, grid, p, omega, l, opts.tol, opts.integrate);
    } catch (const SeedAccuracyError&) {
      if (attempt >= 40)
        throw;
      rstar -= 5.0 * p.horizon();
    }
  }
}

struct WronskianResult {
  LogScaled value;
  double relative_spread = 0.0;
  std::size_t overlap = 0;
  cplx as_complex() const { return value.value(); }
};

namespace detail {

inline LogScaled wronskian_at(const LogScaled& u1, const LogScaled& du1, const LogScaled& u2,
                              const LogScaled& du2, double* relative = nullptr) {
  const double s = u1.scale + du2.scale;
  const double t = du1.scale + u2.scale;
  const double ref = std::max(s, t);
  const cplx a = u1.mantissa * du2.mantissa * std::exp(s - ref);
  const cplx b = du1.mantissa * u2.mantissa * std::exp(t - ref);
  if (relative)
    *relative = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
  return LogScaled(a - b, ref).normalized();
}

} // namespace detail

/// W = u_phi u_psi' - u_phi' u_psi in r*, averaged over the grid points the
/// two solutions share.
inline WronskianResult wronskian(const ModeSolution& phi, const ModeSolution& psi) {
  if (phi.omega != psi.omega || phi.l != psi.l || phi.params.M != psi.params.M ||
      phi.params.m != psi.params.m)
    throw DomainError("wronskian: solutions differ in (omega, l, params)");
  std::vector<LogScaled> w;
  bool all_degenerate = true;
  for (std::size_t i = 0; i < phi.grid.size(); ++i) {
    const std::size_t j = psi.grid.find_tortoise(phi.grid[i].rstar);
    if (j == RadialGrid::npos)
      continue;
    double rel = 0.0;
    auto wi = detail::wronskian_at(phi.u[i], phi.du[i], psi.u[j], psi.du[j], &rel);
    if (rel >= 1e-10)
      all_degenerate = false;
    w.push_back(wi);
  }
  if (w.empty())
    throw DomainError("wronskian: grids do not overlap");
  if (all_degenerate)
    throw DegenerateModesError("wronskian: solutions are linearly dependent");

  const LogScaled ref = w.front();
  cplx mean = 0.0;
  std::vector<cplx> ratio(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    ratio[i] = (w[i] / ref).value();
    mean += ratio[i];
  }
  mean /= static_cast<double>(w.size());
  double var = 0.0;
  for (const auto& r : ratio)
    var += std::norm(r - mean);
  WronskianResult out;
  out.value = ref * mean;
  out.relative_spread = std::sqrt(var / static_cast<double>(w.size())) / std::abs(mean);
  out.overlap = w.size();
  return out;
}

struct FitWindow {
  double lo = 0.0, hi = 0.0;
};

struct AsymptoticFit {
  std::string coordinate;               ///< "r" or "rstar"
  std::optional<double> phase_slope;    ///< d arg u / d coordinate
  std::optional<double> log_coefficient; ///< coefficient of ln r in arg u
  std::optional<double> decay_rate;     ///< -d ln|u| / dr
  std::optional<double> power_exponent; ///< c in |u| ~ e^{-br} r^{-c}
  FitWindow fit_window;
  double residual = 0.0;
  std::size_t samples = 0;
};

/// Fits the stored solution against its asymptotic model on `window`.
///
///   outgoing phi:  arg u   ~ q r + a ln r + c0 + c1/r + c2/r^2   (window in r)
///   decaying phi:  ln|u|   ~ -b r - c ln r + c0 + c1/r + c2/r^2  (window in r)
///   psi:           arg u   ~ k r* + c0                            (window in r*)
inline AsymptoticFit fit_asymptotics(const ModeSolution& mode, FitWindow window) {
  const auto& g = mode.grid;
  const auto& p = mode.params;
  const bool is_psi = mode.boundary == Boundary::HorizonRegular;
  AsymptoticFit out;
  out.coordinate = is_psi ? "rstar" : "r";
  out.fit_window = window;
  if (!(window.hi > window.lo))
    throw DomainError("fit_asymptotics: empty window");
  const double glo = is_psi ? g.front().rstar : g.front().r;
  const double ghi = is_psi ? g.back().rstar : g.back().r;
  const double eps = 1e-12 * std::max({1.0, std::abs(window.lo), std::abs(window.hi)});
  if (window.lo < glo - eps || window.hi > ghi + eps)
    throw DomainError("fit_asymptotics: window outside the solution grid");
  if (is_psi) {
    if (p.M > 0.0 && window.hi > -15.0 * p.horizon() + eps)
      throw DomainError("fit_asymptotics: psi window must satisfy r* <= -15 (2M)");
  } else if (window.lo < 50.0 * std::max(p.horizon(), 1.0 / p.m) - eps) {
    throw DomainError("fit_asymptotics: phi window must satisfy r >= 50 max(2M, 1/m)");
  }

  std::vector<double> x, phase, logmag;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double c = is_psi ? g[i].rstar : g[i].r;
    if (c < window.lo - eps || c > window.hi + eps)
      continue;
    x.push_back(c);
    phase.push_back(std::arg(mode.u[i].mantissa));
    logmag.push_back(mode.u[i].log_abs());
  }
  out.samples = x.size();
  if (x.size() < 16)
    throw WindowTooSmall("fit_asymptotics: fewer than 16 samples in the window");

  using Basis = std::function<double(double)>;
  const std::vector<Basis> large_r = {[](double r) { return r; }, [](double r) { return std::log(r); },
                                      [](double) { return 1.0; }, [](double r) { return 1.0 / r; },
                                      [](double r) { return 1.0 / (r * r); }};
  if (is_psi) {
    const std::vector<Basis> lin = {[](double t) { return t; }, [](double) { return 1.0; }};
    const auto unwrapped = fit::unwrap_phase(phase);
    const auto f = fit::least_squares(x, unwrapped, lin);
    out.phase_slope = f.coefficients[0];
    out.residual = f.rms_residual;
  } else if (mode.boundary == Boundary::InfinityOutgoing) {
    const auto unwrapped = fit::unwrap_phase(phase);
    const auto f = fit::least_squares(x, unwrapped, large_r);
    out.phase_slope = f.coefficients[0];
    out.log_coefficient = f.coefficients[1];
    out.residual = f.rms_residual;
  } else {
    const auto f = fit::least_squares(x, logmag, large_r);
    out.decay_rate = -f.coefficients[0];
    out.power_exponent = -f.coefficients[1];
    out.residual = f.rms_residual;
  }
  return out;
}

} // namespace sqft
