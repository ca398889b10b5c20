#pragma once

// Modified Bessel function K_1 for complex argument with Re z > 0.
//
//   |z| <= 2       ascending series
//   2 < |z| <= 25  Steed/Temme continued fraction for K_0, K_1
//   |z| > 25       Hankel asymptotic expansion, summed to its smallest term
//
// The asymptotic series alone cannot reach 1e-12 near |z| = 2 (its smallest
// term there is ~e^{-4}), hence the middle branch.

#include <sqft/errors.hpp>
#include <sqft/logscaled.hpp>

#include <cmath>
#include <complex>
#include <numbers>

namespace sqft {

namespace detail {

inline cplx bessel_k1_series(cplx z) {
  constexpr double euler_gamma = 0.57721566490153286061;
  const cplx y = 0.25 * z * z;
  // I_1(z) and the digamma sum share the factor (z/2) y^k / (k! (k+1)!).
  cplx term = 0.5 * z;
  cplx i1 = 0.0, tail = 0.0;
  double psi1 = -euler_gamma;      // psi(k+1)
  double psi2 = 1.0 - euler_gamma; // psi(k+2)
  for (int k = 0; k < 60; ++k) {
    i1 += term;
    tail += (psi1 + psi2) * term;
    if (std::abs(term) < 1e-18 * std::abs(i1) && k > 2)
      break;
    psi1 += 1.0 / (k + 1.0);
    psi2 += 1.0 / (k + 2.0);
    term *= y / ((k + 1.0) * (k + 2.0));
  }
  return 1.0 / z + std::log(0.5 * z) * i1 - 0.5 * tail;
}

inline cplx bessel_k1_cf(cplx x) {
  // Temme's form of Steed's method with mu = 0 (Numerical Recipes, bessik).
  cplx b = 2.0 * (1.0 + x);
  cplx d = 1.0 / b;
  cplx h = d, delh = d;
  cplx q1 = 0.0, q2 = 1.0;
  const double a1 = 0.25;
  cplx q = a1, c = a1;
  double a = -a1;
  cplx s = 1.0 + q * delh;
  int i = 2;
  for (; i <= 100000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / static_cast<double>(i);
    const cplx qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const cplx dels = q * delh;
    s += dels;
    if (std::abs(dels) < 1e-17 * std::abs(s))
      break;
  }
  if (i > 100000)
    throw ConvergenceError("bessel_k1: continued fraction did not converge");
  h = a1 * h;
  const cplx k0 = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  return k0 * (x + 0.5 - h) / x;
}

inline cplx bessel_k1_asymptotic(cplx z) {
  // a_k(1) = prod_{j=1..k} (4 - (2j-1)^2) / (k! 8^k)
  cplx sum = 1.0, term = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double num = 4.0 - (2.0 * k - 1.0) * (2.0 * k - 1.0);
    term *= num / (8.0 * k) / z;
    const double mag = std::abs(term);
    if (mag > prev)
      break;
    sum += term;
    prev = mag;
    if (mag < 1e-17 * std::abs(sum))
      break;
  }
  return std::sqrt(std::numbers::pi / (2.0 * z)) * std::exp(-z) * sum;
}

} // namespace detail

/// K_1(z) on the principal branch, Re z > 0.
inline cplx bessel_k1(cplx z) {
  if (!(z.real() > 0.0))
    throw DomainError("bessel_k1: requires Re z > 0");
  const double a = std::abs(z);
  if (a <= 2.0)
    return detail::bessel_k1_series(z);
  if (a <= 25.0)
    return detail::bessel_k1_cf(z);
  return detail::bessel_k1_asymptotic(z);
}

} // namespace sqft
