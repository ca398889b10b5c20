#pragma once

// Minkowski baseline for a free scalar of mass m.
//
// The reduced integral keeps the prefactor of the 3-momentum representation
// with 1/(2 pi) in front (angular integrals done analytically):
//
//   I(t, R) = (1/R) int_m^inf dw sin(qR) e^{-i w t},   q = sqrt(w^2 - m^2)
//
// while the closed form uses the standard normalization
//
//   W(t, R) = m K_1(m sigma) / (4 pi^2 sigma),   sigma = sqrt(R^2 - t^2).
//
// The two differ by the constant kFlatCalibration = 4 pi^2.

#include <sqft/bessel.hpp>
#include <sqft/errors.hpp>
#include <sqft/quadrature.hpp>

#include <boost/math/special_functions/sinc.hpp>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace sqft {

inline constexpr double kFlatCalibration = 4.0 * std::numbers::pi * std::numbers::pi;

struct FlatPoint {
  cplx t;        ///< time difference, Im t < 0
  double R = 0.0;
  double m = 1.0;

  void validate() const {
    if (!(t.imag() < 0.0))
      throw DomainError("FlatPoint: need Im t < 0");
    if (!(R >= 0.0) || !std::isfinite(R))
      throw DomainError("FlatPoint: need R >= 0");
    if (!(m > 0.0) || !std::isfinite(m))
      throw DomainError("FlatPoint: need m > 0");
  }
};

/// sigma = sqrt(R^2 - t^2) on the principal branch, which is the continuation
/// from the Euclidean point t = -i|t|, R = 0 throughout Im t < 0.
inline cplx flat_sigma(cplx t, double R) {
  if (!(t.imag() < 0.0))
    throw BranchError("flat_sigma: branch is only classified for Im t < 0");
  const cplx s2 = R * R - t * t;
  const cplx s = std::sqrt(s2);
  if (!(s.real() > 0.0))
    throw BranchError("flat_sigma: sigma off the principal sheet");
  return s;
}

inline cplx flat_wightman_closed(const FlatPoint& pt) {
  pt.validate();
  const cplx sigma = flat_sigma(pt.t, pt.R);
  return pt.m * bessel_k1(pt.m * sigma) / (4.0 * std::numbers::pi * std::numbers::pi * sigma);
}

/// Thermal flat Wightman function from the image sum
///   W_beta(tau) = sum_{k>=0} W(tau - i k beta) + sum_{k>=1} W(-tau - i k beta).
/// Requires -beta < Im tau < 0.
inline cplx flat_wightman_thermal_closed(const FlatPoint& pt, double beta) {
  pt.validate();
  if (!(beta > 0.0) || !(pt.t.imag() > -beta))
    throw DomainError("flat_wightman_thermal_closed: need beta > 0 and -beta < Im t < 0");
  cplx sum = flat_wightman_closed(pt);
  for (int k = 1; k < 1000000; ++k) {
    const cplx shift(0.0, -k * beta);
    const cplx a = flat_wightman_closed({pt.t + shift, pt.R, pt.m});
    const cplx b = flat_wightman_closed({-pt.t + shift, pt.R, pt.m});
    sum += a + b;
    if (std::abs(a) + std::abs(b) < 1e-17 * std::abs(sum))
      return sum;
  }
  throw ConvergenceError("flat_wightman_thermal_closed: image sum did not converge");
}

/// Standard-normalized spectral density of the flat field between points a
/// distance R apart: rho(w) = sin(qR) / (4 pi^2 R) above threshold, 0 below.
inline double flat_spectral_density(double omega, double R, double m) {
  const double w = std::abs(omega);
  if (w <= m)
    return 0.0;
  const double q = std::sqrt((w - m) * (w + m));
  const double rho = q * boost::math::sinc_pi(q * R) / (4.0 * std::numbers::pi * std::numbers::pi);
  return omega < 0.0 ? -rho : rho;
}

struct FlatIntegral {
  cplx value;
  double error = 0.0;
  std::size_t evaluations = 0;
};

inline FlatIntegral flat_wightman_integral(const FlatPoint& pt, const QuadratureSpec& spec) {
  pt.validate();
  spec.validate(pt.m);
  const double m = pt.m, eps = -pt.t.imag();
  const double wmax = spec.resolved_omega_max(m, eps);
  // w = m + v^2; q = v sqrt(2m + v^2) has no cancellation near threshold.
  auto batch = [&](const std::vector<double>& vs) {
    std::vector<std::vector<cplx>> out(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const double v = vs[i], w = m + v * v, q = v * std::sqrt(2.0 * m + v * v);
      const double s = q * boost::math::sinc_pi(q * pt.R);
      out[i] = {2.0 * v * s * std::exp(cplx(0.0, -1.0) * w * pt.t)};
    }
    return out;
  };
  const auto res = integrate_adaptive(batch, {{0.0, std::sqrt(wmax - m)}}, 1, spec.abs_tol, spec.rel_tol,
                                      spec.max_panels);
  // |sin(qR)/R| <= w and |e^{-iwt}| = e^{-eps w} beyond wmax.
  const double tail = std::exp(-eps * wmax) * (wmax / eps + 1.0 / (eps * eps));
  if (!res.converged)
    throw QuadratureError("flat_wightman_integral: tolerance not reached within the panel budget");
  return {res.value[0], res.error[0] + tail, res.evaluations};
}

namespace detail {

// Riccati-Bessel type functions i^_l(x) = sqrt(pi x/2) I_{l+1/2}(x) and
// k^_l(x) = sqrt(2x/pi) K_{l+1/2}(x), returned as log-magnitudes so that the
// product i^(x_<) k^(x_>) survives large arguments.
inline double log_khat(int l, double x) {
  if (x < 600.0)
    return std::log(std::sqrt(2.0 * x / std::numbers::pi) * std::cyl_bessel_k(l + 0.5, x));
  // e^{-x} sum_k (l+k)! / (k! (l-k)!) (2x)^{-k}
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= l; ++k) {
    term *= static_cast<double>(l + k) * (l - k + 1) / (k * 2.0 * x);
    sum += term;
  }
  return -x + std::log(sum);
}

inline double log_ihat(int l, double x) {
  if (x < 600.0)
    return std::log(std::sqrt(0.5 * std::numbers::pi * x) * std::cyl_bessel_i(l + 0.5, x));
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= l; ++k) {
    term *= -static_cast<double>(l + k) * (l - k + 1) / (k * 2.0 * x);
    sum += term;
  }
  return x - std::log(2.0) + std::log(sum);
}

inline double flat_channel_decaying(double b, int l, double r, double rp) {
  const double lo = std::min(r, rp), hi = std::max(r, rp);
  return std::exp(log_khat(l, b * hi) + log_ihat(l, b * lo)) / (b * r * rp);
}

} // namespace detail

/// G_l(r, r'; w) in flat space:
///   i q h_l(q r_>) j_l(q r_<)                  for w^2 > m^2,
///   k^_l(b r_>) i^_l(b r_<) / (b r r')         for w^2 < m^2, b = sqrt(m^2 - w^2).
/// Negative omega gives the complex conjugate.
inline cplx flat_channel_green(double omega, int l, double m, double r, double rp) {
  if (l < 0)
    throw DomainError("flat_channel_green: l must be >= 0");
  if (!(r > 0.0) || !(rp > 0.0) || !(m > 0.0))
    throw DomainError("flat_channel_green: need r, r', m > 0");
  const double w2 = omega * omega, m2 = m * m;
  if (std::abs(w2 - m2) <= 1e-9 * m2)
    throw ThresholdError("flat_channel_green: omega^2 too close to m^2");
  const double lo = std::min(r, rp), hi = std::max(r, rp);
  if (w2 < m2)
    return detail::flat_channel_decaying(std::sqrt(m2 - w2), l, r, rp);
  const double q = std::sqrt(w2 - m2);
  const unsigned ul = static_cast<unsigned>(l);
  const cplx h(std::sph_bessel(ul, q * hi), std::sph_neumann(ul, q * hi));
  const cplx g = cplx(0.0, q) * h * std::sph_bessel(ul, q * lo);
  return omega < 0.0 ? std::conj(g) : g;
}

/// G_l at imaginary frequency w = i y: real, k^(kappa r_>) i^(kappa r_<) / (kappa r r'),
/// kappa = sqrt(y^2 + m^2).
inline double flat_channel_green_imaginary(double y, int l, double m, double r, double rp) {
  if (l < 0 || !(r > 0.0) || !(rp > 0.0) || !(m > 0.0))
    throw DomainError("flat_channel_green_imaginary: invalid arguments");
  return detail::flat_channel_decaying(std::sqrt(y * y + m * m), l, r, rp);
}

} // namespace sqft
