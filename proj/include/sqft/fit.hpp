#pragma once

#include <sqft/errors.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <vector>

namespace sqft::fit {

struct LinearFit {
  std::vector<double> coefficients;
  double rms_residual = 0.0;
};

/// Least squares y ~ sum_k c_k basis_k(x), solved by column-pivoted QR.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y,
                               std::span<const std::function<double(double)>> basis) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto k = static_cast<Eigen::Index>(basis.size());
  if (n < k)
    throw WindowTooSmall("least_squares: fewer samples than model parameters");
  Eigen::MatrixXd A(n, k);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j)
      A(i, j) = basis[static_cast<std::size_t>(j)](x[static_cast<std::size_t>(i)]);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  // Column equilibration keeps mixed bases (r, ln r, 1/r^2) well conditioned.
  Eigen::VectorXd norms = A.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < k; ++j)
    if (norms(j) > 0.0)
      A.col(j) /= norms(j);
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  LinearFit out;
  out.rms_residual = std::sqrt((A * c - b).squaredNorm() / static_cast<double>(n));
  out.coefficients.resize(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j)
    out.coefficients[static_cast<std::size_t>(j)] = norms(j) > 0.0 ? c(j) / norms(j) : 0.0;
  return out;
}

/// Removes 2*pi jumps from a sequence of principal arguments.
inline std::vector<double> unwrap_phase(std::span<const double> phase) {
  std::vector<double> out(phase.begin(), phase.end());
  double offset = 0.0;
  for (std::size_t i = 1; i < out.size(); ++i) {
    const double jump = phase[i] - phase[i - 1];
    offset -= 2.0 * std::numbers::pi * std::round(jump / (2.0 * std::numbers::pi));
    out[i] = phase[i] + offset;
  }
  return out;
}

} // namespace sqft::fit
