#pragma once

// Schwarzschild exterior geometry in units G = c = hbar = 1.
//
// The radial Klein-Gordon problem is reduced with u = r * phi and written in
// the tortoise coordinate r* = r + 2M ln(r/(2M) - 1), giving
//
//   u''(r*) + (omega^2 - V_l(r)) u = 0,
//   V_l(r) = (1 - 2M/r) (l(l+1)/r^2 + 2M/r^3 + m^2).
//
// Close to the horizon r - 2M is far below the resolution of r itself, so
// every routine here also exposes the horizon offset x = r - 2M and the
// logarithmic offset s = ln x, which stay accurate for r* -> -infinity.

#include <sqft/errors.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace sqft {

struct SpacetimeParams {
  double M = 1.0; ///< black-hole mass, in units of 1/m by default
  double m = 1.0; ///< scalar field mass

  double horizon() const { return 2.0 * M; }
  bool flat() const { return M == 0.0; }

  void validate() const {
    if (!(M >= 0.0) || !std::isfinite(M))
      throw DomainError("SpacetimeParams: M must be finite and >= 0");
    if (!(m > 0.0) || !std::isfinite(m))
      throw DomainError("SpacetimeParams: m must be finite and > 0");
  }
};

/// A radius together with its tortoise coordinate and horizon offsets.
struct RadialPoint {
  double r = 0.0;
  double offset = 0.0;     ///< r - 2M (equals r when M = 0)
  double log_offset = 0.0; ///< ln(r - 2M); the ODE integration variable
  double rstar = 0.0;
};

namespace detail {

inline void require_exterior(double r, const SpacetimeParams& p, const char* who) {
  if (p.M > 0.0 ? !(r > p.horizon()) : !(r > 0.0))
    throw DomainError(std::string(who) + ": radius must lie outside the horizon (r > 2M)");
}

} // namespace detail

/// r* from the horizon offset x = r - 2M; accurate for arbitrarily small x.
inline double tortoise_from_offset(double x, const SpacetimeParams& p) {
  if (!(x > 0.0))
    throw DomainError("tortoise_from_offset: offset must be positive");
  if (p.M == 0.0)
    return x;
  const double rs = p.horizon();
  return rs + x + rs * std::log(x / rs);
}

inline double tortoise_from_log_offset(double s, const SpacetimeParams& p) {
  if (p.M == 0.0)
    return std::exp(s);
  const double rs = p.horizon();
  return rs + std::exp(s) + rs * (s - std::log(rs));
}

inline double tortoise(double r, const SpacetimeParams& p) {
  detail::require_exterior(r, p, "tortoise");
  if (p.M == 0.0)
    return r;
  return tortoise_from_offset(r - p.horizon(), p);
}

inline RadialPoint radial_point_from_radius(double r, const SpacetimeParams& p) {
  detail::require_exterior(r, p, "radial_point_from_radius");
  RadialPoint pt;
  pt.r = r;
  pt.offset = r - p.horizon();
  pt.log_offset = std::log(pt.offset);
  pt.rstar = p.M == 0.0 ? r : tortoise_from_offset(pt.offset, p);
  return pt;
}

inline RadialPoint radial_point_from_log_offset(double s, const SpacetimeParams& p) {
  RadialPoint pt;
  pt.log_offset = s;
  pt.offset = std::exp(s);
  pt.r = p.horizon() + pt.offset;
  pt.rstar = tortoise_from_log_offset(s, p);
  return pt;
}

/// Inverts the tortoise map.
///
/// With w = (r - 2M)/(2M) the map reads w + ln w = r*/(2M) - 1 =: c. The root
/// is bracketed by w in [exp(c - max(c,1)), max(c,1)], i.e.
/// r in [2M(1 + e^{(r* - R)/2M}), R] with R = max(r*, 4M), and solved for
/// y = ln w by safeguarded Newton iteration.
inline RadialPoint radial_point_from_tortoise(double rstar, const SpacetimeParams& p) {
  if (!std::isfinite(rstar))
    throw DomainError("inverse_tortoise: r* must be finite");
  if (p.M == 0.0) {
    if (!(rstar > 0.0))
      throw DomainError("inverse_tortoise: flat limit requires r* = r > 0");
    return radial_point_from_radius(rstar, p);
  }
  const double rs = p.horizon();
  const double c = rstar / rs - 1.0;
  const double w_hi = std::max(c, 1.0);
  double lo = c - w_hi;       // ln(w_lo)
  double hi = std::log(w_hi); // ln(w_hi)
  auto g = [c](double y) { return std::exp(y) + y - c; };

  double y = std::clamp(c < 0.0 ? c : std::log(std::max(c, 1e-300)), lo, hi);
  bool converged = false;
  for (int it = 0; it < 200; ++it) {
    const double gy = g(y);
    if (gy > 0.0)
      hi = y;
    else
      lo = y;
    const double step = gy / (std::exp(y) + 1.0);
    double next = y - step;
    if (!(next > lo && next < hi))
      next = 0.5 * (lo + hi);
    const double scale = std::max(1.0, std::abs(next));
    if (std::abs(next - y) <= 1e-15 * scale || hi - lo <= 4e-16 * scale) {
      y = next;
      converged = true;
      break;
    }
    y = next;
  }
  if (!converged)
    throw ConvergenceError("inverse_tortoise: root find did not converge");
  return radial_point_from_log_offset(y + std::log(rs), p);
}

inline double inverse_tortoise(double rstar, const SpacetimeParams& p) {
  return radial_point_from_tortoise(rstar, p).r;
}

/// V_l at radius r with horizon offset x = r - 2M supplied separately.
inline double effective_potential_at(double r, double x, int l, const SpacetimeParams& p) {
  const double L = static_cast<double>(l) * (l + 1);
  const double inv = 1.0 / r;
  const double f = x * inv;
  return f * (inv * inv * (L + 2.0 * p.M * inv) + p.m * p.m);
}

inline double effective_potential(double r, int l, const SpacetimeParams& p) {
  if (l < 0)
    throw DomainError("effective_potential: l must be >= 0");
  detail::require_exterior(r, p, "effective_potential");
  return effective_potential_at(r, r - p.horizon(), l, p);
}

/// Strictly increasing samples in r* paired with their radii. Monotonicity
/// is checked on r* and on the horizon offset, since r itself rounds to 2M
/// deep in the near-horizon region.
class RadialGrid {
public:
  RadialGrid() = default;

  static RadialGrid from_tortoise(std::span<const double> rstar, const SpacetimeParams& p) {
    RadialGrid g;
    g.points_.reserve(rstar.size());
    for (double rs : rstar)
      g.points_.push_back(radial_point_from_tortoise(rs, p));
    g.check();
    return g;
  }

  static RadialGrid from_radii(std::span<const double> r, const SpacetimeParams& p) {
    RadialGrid g;
    g.points_.reserve(r.size());
    for (double ri : r)
      g.points_.push_back(radial_point_from_radius(ri, p));
    g.check();
    return g;
  }

  /// n points evenly spaced in r* on [a, b].
  static RadialGrid uniform_tortoise(double a, double b, std::size_t n, const SpacetimeParams& p) {
    if (n < 2 || !(b > a))
      throw DomainError("RadialGrid: need n >= 2 and b > a");
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    xs.back() = b;
    return from_tortoise(xs, p);
  }

  /// n points evenly spaced in r on [a, b].
  static RadialGrid uniform_radius(double a, double b, std::size_t n, const SpacetimeParams& p) {
    if (n < 2 || !(b > a))
      throw DomainError("RadialGrid: need n >= 2 and b > a");
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i)
      xs[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    xs.back() = b;
    return from_radii(xs, p);
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const RadialPoint& operator[](std::size_t i) const { return points_[i]; }
  const RadialPoint& front() const { return points_.front(); }
  const RadialPoint& back() const { return points_.back(); }
  std::span<const RadialPoint> points() const { return points_; }

  /// Index of a sample whose radius matches r to 1e-12 relative, or npos.
  std::size_t find_radius(double r) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), r,
                               [](const RadialPoint& a, double v) { return a.r < v; });
    const double tol = 1e-12 * std::max(1.0, std::abs(r));
    for (auto cand : {it, it == points_.begin() ? it : it - 1})
      if (cand != points_.end() && std::abs(cand->r - r) <= tol)
        return static_cast<std::size_t>(cand - points_.begin());
    return npos;
  }

  /// Index of a sample whose r* matches to 1e-12 relative, or npos.
  std::size_t find_tortoise(double rstar) const {
    auto it = std::lower_bound(points_.begin(), points_.end(), rstar,
                               [](const RadialPoint& a, double v) { return a.rstar < v; });
    const double tol = 1e-12 * std::max(1.0, std::abs(rstar));
    for (auto cand : {it, it == points_.begin() ? it : it - 1})
      if (cand != points_.end() && std::abs(cand->rstar - rstar) <= tol)
        return static_cast<std::size_t>(cand - points_.begin());
    return npos;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
  void check() const {
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i].rstar > points_[i - 1].rstar) || !(points_[i].offset > points_[i - 1].offset))
        throw DomainError("RadialGrid: samples must be strictly increasing");
  }

  std::vector<RadialPoint> points_;
};

} // namespace sqft
