#pragma once

#include <cmath>
#include <complex>

namespace sqft {

using cplx = std::complex<double>;

/// Complex number stored as mantissa * exp(scale). Mode functions grow or
/// decay by hundreds of e-folds across a barrier, so products and ratios of
/// them are carried in this form and only collapsed at the end.
struct LogScaled {
  cplx mantissa{0.0, 0.0};
  double scale = 0.0;

  LogScaled() = default;
  LogScaled(cplx m, double s = 0.0) : mantissa(m), scale(s) {}

  static LogScaled from_log(cplx log_value) {
    return {std::exp(cplx(0.0, log_value.imag())), log_value.real()};
  }

  LogScaled normalized() const {
    const double a = std::abs(mantissa);
    if (a == 0.0 || !std::isfinite(a))
      return *this;
    const double la = std::log(a);
    return {mantissa / a, scale + la};
  }

  double log_abs() const { return std::log(std::abs(mantissa)) + scale; }
  cplx value() const { return mantissa * std::exp(scale); }

  friend LogScaled operator*(const LogScaled& a, const LogScaled& b) {
    return LogScaled{a.mantissa * b.mantissa, a.scale + b.scale}.normalized();
  }
  friend LogScaled operator/(const LogScaled& a, const LogScaled& b) {
    return LogScaled{a.mantissa / b.mantissa, a.scale - b.scale}.normalized();
  }
  friend LogScaled operator*(const LogScaled& a, cplx c) {
    return LogScaled{a.mantissa * c, a.scale}.normalized();
  }
  friend LogScaled operator+(const LogScaled& a, const LogScaled& b) {
    if (a.mantissa == 0.0)
      return b;
    if (b.mantissa == 0.0)
      return a;
    const double s = std::max(a.scale, b.scale);
    return LogScaled{a.mantissa * std::exp(a.scale - s) + b.mantissa * std::exp(b.scale - s), s}
        .normalized();
  }
  friend LogScaled conj(const LogScaled& a) { return {std::conj(a.mantissa), a.scale}; }
};

} // namespace sqft
