#pragma once

// Adaptive Gauss-Kronrod (10/21) quadrature for vector-valued integrands.
//
// The integrand is evaluated in batches: each refinement round collects the
// abscissae of every new panel and hands them to the caller at once, so the
// caller can cache, parallelize, and share expensive work (one mode solve
// per frequency feeds every radius pair). Refinement decisions depend only on
// the values, never on evaluation order.

#include <sqft/errors.hpp>
#include <sqft/logscaled.hpp>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace sqft {

/// Frequency quadrature settings shared by the flat and Schwarzschild
/// evaluators.
struct QuadratureSpec {
  double omega_min = 0.0;  ///< lower integration limit
  double omega_max = 0.0;  ///< 0 selects m + 20/epsilon
  double rel_tol = 1e-6;
  double abs_tol = 1e-14;
  std::size_t max_panels = 4000;
  double threshold_gap = 1e-6; ///< no node with |omega - m| below this

  void validate(double m) const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw DomainError("QuadratureSpec: tolerances must be positive");
    if (omega_max != 0.0 && !(omega_max > m))
      throw DomainError("QuadratureSpec: omega_max must exceed m");
    if (!(omega_min >= 0.0) || (omega_max != 0.0 && !(omega_min < omega_max)))
      throw DomainError("QuadratureSpec: need 0 <= omega_min < omega_max");
    if (max_panels < 2)
      throw DomainError("QuadratureSpec: max_panels must be >= 2");
  }

  double resolved_omega_max(double m, double epsilon) const {
    return omega_max > 0.0 ? omega_max : m + 20.0 / epsilon;
  }

  std::string panel_scheme() const {
    std::ostringstream os;
    os << "adaptive Gauss-Kronrod 10/21 panels split at the mass threshold; "
       << "omega = m +/- v^2 substitution on each side; nodes kept " << threshold_gap
       << " away from the threshold; tail beyond omega_max bounded with the e^{-epsilon omega} regulator";
    return os.str();
  }
};

struct QuadratureResult {
  std::vector<cplx> value;
  std::vector<double> error;
  std::size_t evaluations = 0;
  std::size_t panels = 0;
  bool converged = false;
};

namespace detail {

struct GkRule {
  std::vector<double> x;  // 21 nodes on [-1, 1]
  std::vector<double> wk; // Kronrod weights
  std::vector<double> wg; // Gauss weights (0 on Kronrod-only nodes)
};

inline const GkRule& gk21() {
  static const GkRule rule = [] {
    namespace bq = boost::math::quadrature;
    const auto a = bq::gauss_kronrod<double, 21>::abscissa();
    const auto w = bq::gauss_kronrod<double, 21>::weights();
    const auto gw = bq::gauss<double, 10>::weights();
    GkRule r;
    for (std::size_t i = a.size(); i-- > 1;) {
      r.x.push_back(-a[i]);
      r.wk.push_back(w[i]);
      r.wg.push_back(i % 2 ? gw[(i - 1) / 2] : 0.0);
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      r.x.push_back(a[i]);
      r.wk.push_back(w[i]);
      r.wg.push_back(i % 2 ? gw[(i - 1) / 2] : 0.0);
    }
    return r;
  }();
  return rule;
}

struct Panel {
  double a, b;
  std::vector<cplx> kronrod;
  std::vector<double> error;
};

} // namespace detail

/// Integrates a vector-valued function over the union of `intervals`.
/// `batch(xs)` must return one vector of length `dim` per abscissa.
/// Converged when every component k < checked satisfies
/// err_k <= max(abs_tol, rel_tol |I_k|). Components at or past `checked` are
/// integrated on the same panels but never drive refinement.
template <class Batch>
QuadratureResult integrate_adaptive(Batch&& batch, const std::vector<std::pair<double, double>>& intervals,
                                    std::size_t dim, double abs_tol, double rel_tol,
                                    std::size_t max_panels,
                                    std::size_t checked = std::numeric_limits<std::size_t>::max()) {
  checked = std::min(checked, dim);
  const auto& rule = detail::gk21();
  QuadratureResult res;
  auto build = [&](const std::vector<std::pair<double, double>>& spans) {
    std::vector<double> xs;
    xs.reserve(spans.size() * rule.x.size());
    for (const auto& [a, b] : spans) {
      const double c = 0.5 * (a + b), h = 0.5 * (b - a);
      for (double t : rule.x)
        xs.push_back(c + h * t);
    }
    const auto vals = batch(xs);
    res.evaluations += xs.size();
    std::vector<detail::Panel> out;
    for (std::size_t p = 0; p < spans.size(); ++p) {
      const auto [a, b] = spans[p];
      const double h = 0.5 * (b - a);
      detail::Panel panel{a, b, std::vector<cplx>(dim, 0.0), std::vector<double>(dim, 0.0)};
      std::vector<cplx> gauss(dim, 0.0);
      for (std::size_t j = 0; j < rule.x.size(); ++j) {
        const auto& v = vals[p * rule.x.size() + j];
        for (std::size_t k = 0; k < dim; ++k) {
          panel.kronrod[k] += rule.wk[j] * v[k];
          gauss[k] += rule.wg[j] * v[k];
        }
      }
      for (std::size_t k = 0; k < dim; ++k) {
        panel.kronrod[k] *= h;
        panel.error[k] = std::abs(panel.kronrod[k] - h * gauss[k]);
      }
      out.push_back(std::move(panel));
    }
    return out;
  };

  std::vector<detail::Panel> panels;
  {
    std::vector<std::pair<double, double>> spans;
    for (const auto& iv : intervals)
      if (iv.second > iv.first)
        spans.push_back(iv);
    panels = build(spans);
  }

  for (;;) {
    res.value.assign(dim, 0.0);
    res.error.assign(dim, 0.0);
    for (const auto& p : panels)
      for (std::size_t k = 0; k < dim; ++k) {
        res.value[k] += p.kronrod[k];
        res.error[k] += p.error[k];
      }
    std::vector<double> tol(dim);
    bool done = true;
    for (std::size_t k = 0; k < checked; ++k) {
      tol[k] = std::max(abs_tol, rel_tol * std::abs(res.value[k]));
      if (res.error[k] > tol[k])
        done = false;
    }
    res.panels = panels.size();
    if (done) {
      res.converged = true;
      return res;
    }
    if (panels.size() >= max_panels)
      return res;

    // Split the panels carrying the largest share of the scaled error.
    std::vector<double> score(panels.size(), 0.0);
    for (std::size_t p = 0; p < panels.size(); ++p)
      for (std::size_t k = 0; k < checked; ++k)
        score[p] = std::max(score[p], panels[p].error[k] / tol[k]);
    std::vector<std::size_t> order(panels.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return score[i] > score[j]; });
    const double total = std::accumulate(score.begin(), score.end(), 0.0);
    std::vector<bool> split(panels.size(), false);
    double acc = 0.0;
    std::size_t budget = max_panels - panels.size();
    for (std::size_t idx : order) {
      if (budget == 0 || (acc >= 0.5 * total && acc > 0.0))
        break;
      split[idx] = true;
      acc += score[idx];
      --budget;
    }
    std::vector<std::pair<double, double>> spans;
    std::vector<detail::Panel> kept;
    for (std::size_t p = 0; p < panels.size(); ++p) {
      if (split[p]) {
        const double mid = 0.5 * (panels[p].a + panels[p].b);
        spans.push_back({panels[p].a, mid});
        spans.push_back({mid, panels[p].b});
      } else {
        kept.push_back(std::move(panels[p]));
      }
    }
    auto fresh = build(spans);
    for (auto& p : fresh)
      kept.push_back(std::move(p));
    std::stable_sort(kept.begin(), kept.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    panels = std::move(kept);
  }
}

} // namespace sqft
