#pragma once

// Bose weighting, spectral densities and the KMS / ground-state checks.
//
// Spectral density convention: rho(r, r', w) = (1/pi) Im K(r, r', w) for
// w > 0, extended oddly to w < 0. With it the regulated Wightman functions are
//
//   ground:   W(tau)      = int_0^inf rho(w) e^{-i w tau} dw
//   thermal:  W_beta(tau) = int_0^inf rho(w) [n(w) e^{-i w tau} + (n(w) - 1) e^{i w tau}] dw
//
// with n(w) = 1 / (1 - e^{-beta w}) and -beta < Im tau < 0.

#include <sqft/errors.hpp>
#include <sqft/greens.hpp>
#include <sqft/logscaled.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace sqft {

struct ThermalParams {
  double beta = 1.0;
  double epsilon = 0.1; ///< tau -> tau - i epsilon

  static ThermalParams with_default_epsilon(double beta) { return {beta, 0.1 * beta}; }

  void validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
      throw DomainError("ThermalParams: beta must be > 0");
    if (!(epsilon > 0.0) || !(epsilon < 0.5 * beta))
      throw DomainError("ThermalParams: need 0 < epsilon < beta/2");
  }
};

/// n(w) = 1 / (1 - e^{-beta w}) for w > 0.
inline double bose_weight(double omega, double beta) {
  if (!(omega > 0.0) || !(beta > 0.0))
    throw DomainError("bose_weight: need omega > 0 and beta > 0");
  return -1.0 / std::expm1(-beta * omega);
}

/// Same expression continued to w < 0, where it is negative: n(-w) = 1 - n(w).
inline double bose_weight_extended(double omega, double beta) {
  if (omega == 0.0 || !(beta > 0.0))
    throw DomainError("bose_weight_extended: need omega != 0 and beta > 0");
  return -1.0 / std::expm1(-beta * omega);
}

/// Multiplies every stored value by n(omega). Phases and the frequency
/// integral are applied later by the position-space evaluator.
inline std::vector<FrequencyGreen> thermal_green_frequency(const std::vector<FrequencyGreen>& stack,
                                                           double beta) {
  std::vector<FrequencyGreen> out = stack;
  for (auto& g : out) {
    const double n = bose_weight(g.omega, beta);
    for (auto& e : g.values)
      e.value *= n;
  }
  return out;
}

struct SpectralDensity {
  std::vector<double> omega; ///< strictly increasing, > 0
  std::vector<double> rho;
  double r = 0.0, r_prime = 0.0;

  bool diagonal() const { return r == r_prime; }

  void validate() const {
    if (omega.size() != rho.size())
      throw DomainError("SpectralDensity: omega and rho differ in length");
    for (std::size_t i = 0; i < omega.size(); ++i) {
      if (!(omega[i] > 0.0) || (i > 0 && !(omega[i] > omega[i - 1])))
        throw DomainError("SpectralDensity: omega grid must be positive and increasing");
      if (!std::isfinite(rho[i]))
        throw DomainError("SpectralDensity: non-finite rho");
    }
  }

  /// Tabulated value at +-omega[i]; the negative side is the odd extension.
  double at_index(std::size_t i, bool negative) const { return negative ? -rho[i] : rho[i]; }
};

struct DetailedBalanceReport {
  double max_violation = 0.0;
  double worst_omega = 0.0;
  double floor = 0.0;
  bool pass = false;
};

/// max_w |S(w) - e^{beta w} S(-w)| / max(|S(w)|, floor), S(w) = n(w) rho(w).
/// floor is the smallest normal double times the largest |S| on the grid, so
/// an all-zero table reports 0.
inline DetailedBalanceReport detailed_balance_check(const SpectralDensity& s, double beta) {
  s.validate();
  if (!(beta > 0.0))
    throw DomainError("detailed_balance_check: beta must be > 0");
  DetailedBalanceReport rep;
  double smax = 0.0;
  std::vector<double> S_pos(s.omega.size());
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    S_pos[i] = bose_weight_extended(s.omega[i], beta) * s.at_index(i, false);
    smax = std::max(smax, std::abs(S_pos[i]));
  }
  rep.floor = std::max(std::numeric_limits<double>::min(), std::numeric_limits<double>::min() * smax);
  for (std::size_t i = 0; i < s.omega.size(); ++i) {
    const double w = s.omega[i], bw = beta * w;
    const double rho_neg = s.at_index(i, true);
    // e^{bw} n(-w) overflows past bw ~ 709; there it equals 1/(e^{-bw} - 1).
    const double shifted = bw < 700.0 ? std::exp(bw) * bose_weight_extended(-w, beta) * rho_neg
                                      : rho_neg / std::expm1(-bw);
    const double v = std::abs(S_pos[i] - shifted) / std::max(std::abs(S_pos[i]), rep.floor);
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst_omega = w;
    }
  }
  rep.pass = rep.max_violation <= 1e-12;
  return rep;
}

/// Value plus total error estimate returned by a two-point evaluator.
struct EstimatedValue {
  cplx value;
  double error = 0.0;
};

/// evaluator(tau, r, r') -> thermal two-point value at complex time tau.
using TwoPointEvaluator = std::function<EstimatedValue(cplx, double, double)>;

struct KmsReport {
  double t = 0.0, beta = 0.0, epsilon = 0.0, r = 0.0, r_prime = 0.0;
  EstimatedValue shifted;   ///< W(t - i(beta - eps); r, r')
  EstimatedValue reflected; ///< W(-t - i eps; r', r)
  double difference = 0.0;
  double combined_error = 0.0;
  bool pass = false;
};

inline KmsReport kms_strip_check(const TwoPointEvaluator& evaluator, double t, double beta, double epsilon,
                                 double r, double rp) {
  if (!(beta > 0.0) || !(epsilon > 0.0) || !(epsilon < beta))
    throw DomainError("kms_strip_check: need 0 < epsilon < beta");
  KmsReport rep{t, beta, epsilon, r, rp, {}, {}, 0.0, 0.0, false};
  rep.shifted = evaluator(cplx(t, -(beta - epsilon)), r, rp);
  rep.reflected = evaluator(cplx(-t, -epsilon), rp, r);
  rep.difference = std::abs(rep.shifted.value - rep.reflected.value);
  rep.combined_error = rep.shifted.error + rep.reflected.error;
  rep.pass = rep.difference <= rep.combined_error;
  return rep;
}

struct PositivityReport {
  bool nonnegative = false;
  double min_rho = 0.0;
  double worst_omega = 0.0;
  double tol_pos = 0.0;
};

/// Diagonal spectral weight must satisfy rho >= -1e-8 max|rho| on the grid.
inline PositivityReport ground_positivity_check(const SpectralDensity& s) {
  s.validate();
  if (!s.diagonal())
    throw DomainError("ground_positivity_check: needs a diagonal (r = r') density");
  PositivityReport rep;
  double amax = 0.0;
  for (double v : s.rho)
    amax = std::max(amax, std::abs(v));
  rep.tol_pos = 1e-8 * amax;
  rep.min_rho = s.rho.empty() ? 0.0 : s.rho.front();
  rep.worst_omega = s.omega.empty() ? 0.0 : s.omega.front();
  for (std::size_t i = 0; i < s.rho.size(); ++i)
    if (s.rho[i] < rep.min_rho) {
      rep.min_rho = s.rho[i];
      rep.worst_omega = s.omega[i];
    }
  rep.nonnegative = s.rho.empty() || rep.min_rho >= -rep.tol_pos;
  return rep;
}

} // namespace sqft
