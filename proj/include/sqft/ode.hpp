#pragma once

// Propagation of u'' = (V_l - omega^2) u, primes meaning d/dr*.
//
// The solution is carried in logarithmic form so that hundreds of e-folds of
// growth through a barrier never overflow and smooth exponential regions can
// be crossed in a few large steps:
//
//   form A:  S = ln u,  y = u'/u     dS/ds = r y,     dy/ds = r (Q - y^2)
//   form B:  T = ln u', z = u/u'     dT/ds = r Q z,   dz/ds = r (1 - Q z^2)
//
// with Q = V - omega^2 and s = ln(r - 2M) as the independent variable
// (dr*/ds = r). Form A is singular at zeros of u, form B at zeros of u'; the
// propagator switches with hysteresis based on k = max(sqrt|Q|, 1/r).
//
// Each step integrates the increment of S (or T) from zero, so the stepper
// never sees large numbers. Steps are taken with the embedded Fehlberg 7(8)
// pair from Boost.Odeint under a local controller that lands exactly on the
// requested output abscissae.
//
// Explicit steps are stability limited to h ~ 1/(r k): perturbations off a
// WKB branch grow or rotate at rate 2 r k. Where the solution already sits
// on a branch (a travelling wave, or the growing side of a barrier) the
// propagator instead takes Riccati defect-correction steps: starting from
// y = +-sqrt(Q) on a Chebyshev grid, iterate y <- y - R/(2y) with
// R = y'/r + y^2 - Q until R vanishes, then integrate r y with Clenshaw-Curtis
// weights. Those steps are limited by the variation of Q, not by k.

#include <sqft/errors.hpp>
#include <sqft/geometry.hpp>
#include <sqft/logscaled.hpp>

#include <boost/numeric/odeint/stepper/runge_kutta_fehlberg78.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>
#include <complex>
#include <limits>

namespace sqft {

namespace detail {

/// Chebyshev-Lobatto nodes x_j = cos(pi j/(n-1)), differentiation matrix and
/// Clenshaw-Curtis weights on [-1, 1].
struct ChebyshevRule {
  static constexpr int n = 16;
  std::array<double, n> x{}, w{};
  std::array<double, n * n> D{};
  std::array<double, 2 * n> tail{}; ///< weights giving the last two Chebyshev coefficients

  ChebyshevRule() {
    constexpr int N = n - 1;
    const double pi = std::numbers::pi;
    for (int j = 0; j < n; ++j)
      x[j] = std::cos(pi * j / N);
    auto c = [](int j) { return (j == 0 || j == N) ? 2.0 : 1.0; };
    for (int i = 0; i < n; ++i) {
      double diag = 0.0;
      for (int j = 0; j < n; ++j) {
        if (i == j)
          continue;
        const double v = c(i) / c(j) * ((i + j) % 2 ? -1.0 : 1.0) / (x[i] - x[j]);
        D[i * n + j] = v;
        diag -= v;
      }
      D[i * n + i] = diag;
    }
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k <= N; k += 2) {
        const double b = (k == 0 || k == N) ? 1.0 : 2.0;
        acc += b / (1.0 - k * k) * std::cos(pi * j * k / N);
      }
      w[j] = acc / N * ((j == 0 || j == N) ? 1.0 : 2.0);
    }
    for (int t = 0; t < 2; ++t)
      for (int j = 0; j < n; ++j)
        tail[t * n + j] = ((j == 0 || j == N) ? 0.5 : 1.0) * std::cos(pi * j * (N - 1 + t) / N) * 2.0 / N;
  }
};

inline const ChebyshevRule& chebyshev_rule() {
  static const ChebyshevRule rule;
  return rule;
}

} // namespace detail

/// omega^2 passed directly; negative values describe imaginary frequency.
struct SquaredFrequency {
  double value;
};

class ModePropagator {
public:
  using State = std::array<cplx, 2>;

  ModePropagator(double omega, int l, const SpacetimeParams& p, double tol)
      : ModePropagator(SquaredFrequency{omega * omega}, l, p, tol) {}

  ModePropagator(SquaredFrequency w2, int l, const SpacetimeParams& p, double tol)
      : omega2_(w2.value), L_(static_cast<double>(l) * (l + 1)), M_(p.M), m2_(p.m * p.m),
        rs_(p.horizon()), tol_(tol) {
    if (!(tol >= 1e-14 && tol <= 1e-2))
      throw DomainError("ModePropagator: tolerance out of range");
  }

  /// Starts from u and du/dr* at log offset s.
  void reset(double s, const LogScaled& u, const LogScaled& du) {
    s_ = s;
    double r, k;
    potential(s, r, k);
    const bool u_zero = u.mantissa == 0.0;
    if (du.mantissa == 0.0 && u_zero)
      throw DomainError("ModePropagator: trivial initial data");
    const double ratio_log = u_zero ? std::numeric_limits<double>::infinity()
                                    : du.log_abs() - u.log_abs();
    if (!u_zero && ratio_log <= std::log(kSwitch * k)) {
      reciprocal_ = false;
      L_state_ = cplx(u.log_abs(), std::arg(u.mantissa));
      v_ = (du / u).value();
    } else {
      reciprocal_ = true;
      L_state_ = cplx(du.log_abs(), std::arg(du.mantissa));
      v_ = u_zero ? cplx(0.0) : (u / du).value();
    }
    h_ = 0.0;
    h_ric_ = 0.0;
    cooldown_ = 0;
  }

  double position() const { return s_; }
  std::size_t steps() const { return steps_; }

  LogScaled u() const {
    const LogScaled base = LogScaled::from_log(L_state_);
    return reciprocal_ ? (base * v_) : base;
  }
  LogScaled du() const {
    const LogScaled base = LogScaled::from_log(L_state_);
    return reciprocal_ ? base : (base * v_);
  }

  /// Integrates to s_target (either direction).
  void advance_to(double s_target) {
    namespace odeint = boost::numeric::odeint;
    if (s_target == s_)
      return;
    const double dir = s_target > s_ ? 1.0 : -1.0;
    if (h_ == 0.0 || h_ * dir < 0.0) {
      double r, k;
      potential(s_, r, k);
      h_ = dir * 0.2 / (r * k);
    }
    odeint::runge_kutta_fehlberg78<State, double, State, double> stepper;
    State in, out, err;
    std::size_t local = 0;
    while (s_ != s_target) {
      if (cooldown_ == 0) {
        if (riccati_step(s_target, dir))
          continue;
        cooldown_ = kCooldown;
      }
      double h = h_;
      bool last = false;
      if ((s_ + h - s_target) * dir >= 0.0 || std::abs(s_target - s_ - h) < 1e-9 * std::abs(h)) {
        h = s_target - s_;
        last = true;
      }
      if (std::abs(h) < 1e-15 * std::max(1.0, std::abs(s_)) && !last)
        throw StepSizeUnderflow("ModePropagator: step size underflow at s = " + std::to_string(s_));
      if (++local > kMaxSteps)
        throw StepSizeUnderflow("ModePropagator: step budget exhausted");

      double r0, k0;
      potential(s_, r0, k0);
      in = {cplx(0.0), v_};
      const bool rec = reciprocal_;
      auto rhs = [this, rec](const State& x, State& dxdt, double s) {
        double r, k;
        const double Q = potential(s, r, k);
        if (!rec) {
          dxdt[0] = r * x[1];
          dxdt[1] = r * (Q - x[1] * x[1]);
        } else {
          dxdt[0] = r * Q * x[1];
          dxdt[1] = r * (1.0 - Q * x[1] * x[1]);
        }
      };
      stepper.do_step(rhs, in, s_, out, h, err);

      const double vscale = rec ? 1.0 / k0 : k0;
      double e0 = std::abs(err[0]) / tol_;
      double e1 = std::abs(err[1]) / (tol_ * std::max(std::abs(out[1]), vscale));
      double e = std::max(e0, e1);
      if (!std::isfinite(e) || !std::isfinite(std::abs(out[0])) || !std::isfinite(std::abs(out[1])))
        e = 1e10;
      const double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -1.0 / 8.0), 0.2, 5.0);
      if (e > 1.0) {
        h_ = h * std::max(factor, 0.1);
        continue;
      }
      ++steps_;
      if (cooldown_ > 0)
        --cooldown_;
      L_state_ += out[0];
      v_ = out[1];
      s_ = last ? s_target : s_ + h;
      // A clamped last step may be rounding-sized; it only shrinks h_ when
      // its own error asks for that.
      if (!last)
        h_ = h * factor;
      else if (factor < 1.0 && std::abs(h * factor) < std::abs(h_))
        h_ = h * factor;
      maybe_switch();
    }
  }

  std::size_t riccati_steps() const { return riccati_steps_; }

private:
  static constexpr double kSwitch = 3.0;
  static constexpr std::size_t kMaxSteps = 20'000'000;
  static constexpr int kCooldown = 8;
  static constexpr double kMinPhase = 8.0; // |dS/ds| below this: explicit steps are cheap
  static constexpr double kMaxAdiabatic = 0.02;

  /// One Riccati defect-correction step toward s_target; false if the
  /// solution is not on a WKB branch here or the step cannot be resolved.
  bool riccati_step(double s_target, double dir) {
    const auto& rule = detail::chebyshev_rule();
    constexpr int n = detail::ChebyshevRule::n;
    double r0, k0;
    const double Q0 = potential(s_, r0, k0);
    if (r0 * k0 < kMinPhase)
      return false;
    if (adiabatic_ratio(r0, Q0) > kMaxAdiabatic)
      return false;
    if (reciprocal_ && v_ == 0.0)
      return false;
    const cplx y_now = reciprocal_ ? 1.0 / v_ : v_;
    const cplx sq0 = Q0 > 0.0 ? cplx(std::sqrt(Q0), 0.0) : cplx(0.0, std::sqrt(-Q0));
    const double sign = std::abs(y_now - sq0) <= std::abs(y_now + sq0) ? 1.0 : -1.0;
    if (std::abs(y_now - sign * sq0) > 0.5 * k0)
      return false;
    if (Q0 > 0.0 && sign * dir < 0.0)
      return false; // decaying direction: errors would grow

    if (h_ric_ == 0.0 || h_ric_ * dir < 0.0)
      h_ric_ = dir * std::min(0.25, std::abs(s_target - s_));
    for (int attempt = 0; attempt < 4; ++attempt) {
      double hs = h_ric_;
      bool last = false;
      if ((s_ + hs - s_target) * dir >= 0.0) {
        hs = s_target - s_;
        last = true;
      }
      std::array<double, n> r{}, Q{};
      std::array<cplx, n> y{};
      bool turning = false;
      for (int j = 0; j < n; ++j) {
        double kj;
        Q[j] = potential(s_ + 0.5 * hs * (1.0 - rule.x[j]), r[j], kj);
        if ((Q[j] > 0.0) != (Q0 > 0.0))
          turning = true;
        y[j] = sign * (Q[j] > 0.0 ? cplx(std::sqrt(Q[j]), 0.0) : cplx(0.0, std::sqrt(-Q[j])));
      }
      if (turning) {
        h_ric_ = 0.5 * hs;
        continue;
      }
      const double dscale = -2.0 / hs;
      double ymax = 0.0;
      for (const auto& v : y)
        ymax = std::max(ymax, std::abs(v));
      bool converged = false;
      double prev = std::numeric_limits<double>::infinity();
      // Real and imaginary parts kept apart so the differentiation matvec vectorizes.
      std::array<double, n> yr{}, yi{};
      for (int j = 0; j < n; ++j) {
        yr[j] = y[j].real();
        yi[j] = y[j].imag();
      }
      for (int it = 0; it < 20; ++it) {
        std::array<double, n> dr{}, di{};
        double dmax2 = 0.0;
        for (int i = 0; i < n; ++i) {
          const double* Di = &rule.D[static_cast<std::size_t>(i * n)];
          double ar = 0.0, ai = 0.0;
          for (int j = 0; j < n; ++j) {
            ar += Di[j] * yr[j];
            ai += Di[j] * yi[j];
          }
          const double c = dscale / r[i];
          const double Rr = c * ar + yr[i] * yr[i] - yi[i] * yi[i] - Q[i];
          const double Ri = c * ai + 2.0 * yr[i] * yi[i];
          const double den = 2.0 * (yr[i] * yr[i] + yi[i] * yi[i]);
          dr[i] = (Rr * yr[i] + Ri * yi[i]) / den;
          di[i] = (Ri * yr[i] - Rr * yi[i]) / den;
          dmax2 = std::max(dmax2, dr[i] * dr[i] + di[i] * di[i]);
        }
        for (int i = 0; i < n; ++i) {
          yr[i] -= dr[i];
          yi[i] -= di[i];
        }
        const double dmax = std::sqrt(dmax2);
        // The branch is defined only up to e^{-2 r k h}; the iteration
        // stalls at that level, so stagnation below the target also counts.
        if (dmax <= 0.05 * tol_ * ymax || (it > 1 && dmax > 0.5 * prev && prev <= 0.05 * tol_ * ymax)) {
          converged = true;
          break;
        }
        if (it > 1 && dmax > 0.5 * prev)
          break;
        prev = dmax;
      }
      for (int j = 0; j < n; ++j)
        y[j] = cplx(yr[j], yi[j]);
      // Resolution: trailing Chebyshev coefficients of y must be negligible.
      bool resolved = false;
      double tail = 0.0;
      const double target = 0.1 * tol_ * ymax;
      // Chebyshev coefficients of an analytic y fall off like h^N, which
      // sizes the next step.
      auto rescale = [&](double lo, double hi) {
        const double f = tail > 0.0 ? 0.9 * std::pow(target / tail, 1.0 / (n - 1)) : hi;
        return hs * std::clamp(f, lo, hi);
      };
      if (converged) {
        for (int t = 0; t < 2; ++t) {
          cplx c = 0.0;
          for (int j = 0; j < n; ++j)
            c += rule.tail[t * n + j] * y[j];
          tail += std::abs(c);
        }
        resolved = tail <= target;
      }
      if (!resolved) {
        if (!converged && std::abs(hs) * r0 * k0 < 30.0) {
          if (last)
            return false; // too short to pin down the branch
          h_ric_ = 2.0 * hs;
        } else {
          h_ric_ = converged ? rescale(0.2, 0.7) : 0.5 * hs;
        }
        continue;
      }
      // The propagated state must already lie on this branch.
      if (std::abs(y[0] - y_now) > tol_ * std::max(std::abs(y_now), k0))
        return false;
      if (reciprocal_) {
        L_state_ += std::log(v_);
        reciprocal_ = false;
      }
      cplx dS = 0.0;
      for (int j = 0; j < n; ++j)
        dS += rule.w[j] * r[j] * y[j];
      L_state_ += 0.5 * hs * dS;
      v_ = y[n - 1];
      s_ = last ? s_target : s_ + hs;
      ++steps_;
      ++riccati_steps_;
      if (!last)
        h_ric_ = rescale(1.0, 2.0);
      return true;
    }
    return false;
  }

  /// |dQ/dr*| / |Q|^{3/2}: the iteration cannot settle where this is O(1).
  double adiabatic_ratio(double r, double Q) const {
    const double inv = 1.0 / r, f = 1.0 - rs_ * inv;
    const double B = inv * inv * (L_ + 2.0 * M_ * inv) + m2_;
    const double dB = -inv * inv * inv * (2.0 * L_ + 6.0 * M_ * inv);
    const double dQ = f * (2.0 * M_ * inv * inv * B + f * dB);
    const double aq = std::abs(Q);
    return std::abs(dQ) / (aq * std::sqrt(aq));
  }

  double potential(double s, double& r, double& k) const {
    const double x = std::exp(s);
    r = rs_ + x;
    const double inv = 1.0 / r;
    const double V = x * inv * (inv * inv * (L_ + 2.0 * M_ * inv) + m2_);
    const double Q = V - omega2_;
    k = std::max(std::sqrt(std::abs(Q)), inv);
    return Q;
  }

  void maybe_switch() {
    double r, k;
    potential(s_, r, k);
    if (!reciprocal_ && std::abs(v_) > kSwitch * k) {
      L_state_ += std::log(v_);
      v_ = 1.0 / v_;
      reciprocal_ = true;
    } else if (reciprocal_ && std::abs(v_) * k > kSwitch) {
      L_state_ += std::log(v_);
      v_ = 1.0 / v_;
      reciprocal_ = false;
    }
  }

  double omega2_, L_, M_, m2_, rs_, tol_;
  double s_ = 0.0, h_ = 0.0;
  bool reciprocal_ = false;
  cplx L_state_{0.0}, v_{0.0};
  std::size_t steps_ = 0, riccati_steps_ = 0;
  double h_ric_ = 0.0;
  int cooldown_ = 0;
};

} // namespace sqft
