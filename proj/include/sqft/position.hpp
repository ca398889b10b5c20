#pragma once

// Position-space two-point functions.
//
// Angular sums use the addition theorem,
//   K(r, r', gamma; w) = sum_l (2l+1)/(4 pi) P_l(cos gamma) G_l(r, r'; w),
// and the frequency integral runs over rho = (1/pi) Im K (see thermal.hpp).
//
// For the ground state at separated points there is a second route. K_R(w)
// is analytic in the upper half plane and K(-w) = conj K(w) on the real
// axis, so rotating both halves of the contour onto w = i y gives
//
//   W(tau) = (1/pi) int_0^inf K(i y) cosh(y tau) dy,
//
// valid while |Re tau| is below the separation (K(i y) ~ e^{-y D}). K(i y) is
// real and positive and has no oscillating cancellation, which is what makes
// correlations at tens of 1/m separation computable.

#include <sqft/errors.hpp>
#include <sqft/fit.hpp>
#include <sqft/flat.hpp>
#include <sqft/geometry.hpp>
#include <sqft/greens.hpp>
#include <sqft/parallel.hpp>
#include <sqft/quadrature.hpp>
#include <sqft/thermal.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace sqft {

struct ChannelSumOptions {
  double rel_tol = 1e-8;
  int consecutive = 3;
  int l_max = 4000;

  void validate() const {
    if (!(rel_tol > 0.0) || consecutive < 1 || l_max < 0)
      throw DomainError("ChannelSumOptions: need rel_tol > 0, consecutive >= 1, l_max >= 0");
  }
};

struct ChannelSumResult {
  cplx value;
  double lsum_error = 0.0;
  int l_used = -1;
};

/// Running sum_l (2l+1)/(4 pi) P_l(cos gamma) G_l. Stops once `consecutive`
/// successive terms are below rel_tol |partial sum|, but never before l
/// reaches arm_from.
class ChannelAccumulator {
public:
  ChannelAccumulator(double gamma, const ChannelSumOptions& opts, int arm_from = 0)
      : x_(std::cos(gamma)), opts_(opts), arm_(arm_from) {}

  bool done() const { return done_; }
  int next_l() const { return l_; }

  void add(cplx g) {
    const double w = (2.0 * l_ + 1.0) / (4.0 * std::numbers::pi);
    const cplx term = w * p_cur_ * g;
    sum_ += term;
    const double mag = std::abs(term);
    small_ = mag <= opts_.rel_tol * std::abs(sum_) ? small_ + 1 : 0;
    recent_.push_back(mag);
    if (recent_.size() > static_cast<std::size_t>(opts_.consecutive) + 1)
      recent_.erase(recent_.begin());
    if (small_ >= opts_.consecutive && l_ >= arm_)
      done_ = true;
    const double p_next = ((2.0 * l_ + 1.0) * x_ * p_cur_ - l_ * p_prev_) / (l_ + 1.0);
    p_prev_ = p_cur_;
    p_cur_ = p_next;
    ++l_;
  }

  /// The tail bound treats the last terms as a geometric sequence.
  ChannelSumResult result() const {
    ChannelSumResult out{sum_, 0.0, l_ - 1};
    if (recent_.empty())
      return out;
    const double base = *std::max_element(recent_.begin(), recent_.end());
    if (base == 0.0)
      return out;
    double q = 0.99;
    if (recent_.size() >= 2 && recent_.front() > 0.0)
      q = std::pow(recent_.back() / recent_.front(), 1.0 / static_cast<double>(recent_.size() - 1));
    if (!std::isfinite(q))
      q = 0.99;
    q = std::clamp(q, 0.0, 0.99);
    out.lsum_error = base * std::max(q / (1.0 - q), 1.0);
    return out;
  }

private:
  double x_;
  ChannelSumOptions opts_;
  int arm_;
  int l_ = 0;
  double p_prev_ = 0.0, p_cur_ = 1.0;
  cplx sum_{0.0, 0.0};
  int small_ = 0;
  bool done_ = false;
  std::vector<double> recent_;
};

/// channels[l] = G_l for l = 0, 1, ...; throws TruncationError when the list
/// (or l_max) runs out before the stop rule fires.
inline ChannelSumResult channel_sum(const std::vector<cplx>& channels, double gamma,
                                    const ChannelSumOptions& opts = {}, int arm_from = 0) {
  opts.validate();
  ChannelAccumulator acc(gamma, opts, arm_from);
  for (const cplx& g : channels) {
    if (acc.next_l() > opts.l_max)
      break;
    acc.add(g);
    if (acc.done())
      return acc.result();
  }
  throw TruncationError("channel_sum: stop rule did not fire within the available channels");
}

struct Probe {
  double r = 0.0, r_prime = 0.0, gamma = 0.0;

  /// Euclidean chord between the two points at the same coordinate radii.
  double chord() const {
    const double s = std::sin(0.5 * gamma);
    return std::sqrt((r - r_prime) * (r - r_prime) + 4.0 * r * r_prime * s * s);
  }
};

/// One kernel evaluation at every probe.
struct KernelSample {
  std::vector<double> value;
  std::vector<double> lsum_error;
  std::vector<int> l_used;
};

/// Supplies rho(w) on the real axis and, where available, K(i y).
class SpectralSource {
public:
  virtual ~SpectralSource() = default;
  virtual const std::vector<Probe>& probes() const = 0;
  virtual double mass() const = 0;
  virtual std::string name() const = 0;
  virtual std::vector<KernelSample> spectral(const std::vector<double>& omegas) = 0;
  virtual bool has_euclidean() const { return false; }
  /// Whether K(i y) is reliably computable at this probe.
  virtual bool euclidean_converges(const Probe&) const { return has_euclidean(); }
  virtual std::vector<KernelSample> euclidean(const std::vector<double>&) {
    throw DomainError(name() + ": no imaginary-frequency kernel");
  }
};

/// Minkowski kernels in closed form.
class FlatSource : public SpectralSource {
public:
  FlatSource(double m, std::vector<Probe> probes) : m_(m), probes_(std::move(probes)) {
    if (!(m > 0.0))
      throw DomainError("FlatSource: m must be > 0");
    if (probes_.empty())
      throw DomainError("FlatSource: no probes");
  }

  const std::vector<Probe>& probes() const override { return probes_; }
  double mass() const override { return m_; }
  std::string name() const override { return "flat"; }

  std::vector<KernelSample> spectral(const std::vector<double>& omegas) override {
    std::vector<KernelSample> out(omegas.size());
    for (std::size_t i = 0; i < omegas.size(); ++i) {
      auto& s = out[i];
      for (const auto& p : probes_)
        s.value.push_back(flat_spectral_density(omegas[i], p.chord(), m_));
      s.lsum_error.assign(probes_.size(), 0.0);
      s.l_used.assign(probes_.size(), 0);
    }
    return out;
  }

  bool has_euclidean() const override {
    return std::all_of(probes_.begin(), probes_.end(), [](const Probe& p) { return p.chord() > 0.0; });
  }

  /// K(i y) = e^{-kappa D} / (4 pi D), kappa = sqrt(y^2 + m^2).
  std::vector<KernelSample> euclidean(const std::vector<double>& ys) override {
    std::vector<KernelSample> out(ys.size());
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double kappa = std::hypot(ys[i], m_);
      auto& s = out[i];
      for (const auto& p : probes_) {
        const double D = p.chord();
        s.value.push_back(std::exp(-kappa * D) / (4.0 * std::numbers::pi * D));
      }
      s.lsum_error.assign(probes_.size(), 0.0);
      s.l_used.assign(probes_.size(), 0);
    }
    return out;
  }

private:
  double m_;
  std::vector<Probe> probes_;
};

/// Channel-sum kernels on Schwarzschild. Samples are cached by frequency,
/// and new frequencies in a batch are solved on `workers` threads.
class SchwarzschildSource : public SpectralSource {
public:
  SchwarzschildSource(const SpacetimeParams& p, std::vector<Probe> probes, ChannelSumOptions sum_opts = {},
                      ChannelOptions channel_opts = {}, int workers = 1)
      : p_(p), probes_(std::move(probes)), sum_opts_(sum_opts), workers_(workers),
        green_(p, pairs_of(probes_), channel_opts) {
    sum_opts_.validate();
  }

  const std::vector<Probe>& probes() const override { return probes_; }
  double mass() const override { return p_.m; }
  std::string name() const override { return "schwarzschild"; }
  bool has_euclidean() const override { return true; }
  const SpacetimeParams& params() const { return p_; }

  /// Imaginary-frequency terms fall like (r_</r_>)^l; at equal radii only
  /// the oscillation of P_l remains and the sum is not absolutely convergent.
  bool euclidean_converges(const Probe& pr) const override {
    return std::abs(std::log(pr.r / pr.r_prime)) * sum_opts_.l_max >= 25.0;
  }

  std::vector<KernelSample> spectral(const std::vector<double>& omegas) override {
    return cached(omegas, rho_cache_, false);
  }
  std::vector<KernelSample> euclidean(const std::vector<double>& ys) override {
    return cached(ys, euclid_cache_, true);
  }

  /// Complex K(w) at a single real frequency (both parts summed).
  std::vector<ChannelSumResult> kernel(double omega) const {
    std::vector<ChannelAccumulator> acc;
    for (const auto& pr : probes_)
      acc.emplace_back(pr.gamma, sum_opts_, arm_real(omega, pr));
    run(acc, [&](int l) { return green_.evaluate(omega, l); });
    std::vector<ChannelSumResult> out;
    for (const auto& a : acc)
      out.push_back(a.result());
    return out;
  }

private:
  static std::vector<std::pair<double, double>> pairs_of(const std::vector<Probe>& probes) {
    if (probes.empty())
      throw DomainError("SchwarzschildSource: no probes");
    std::vector<std::pair<double, double>> out;
    for (const auto& p : probes)
      out.emplace_back(p.r, p.r_prime);
    return out;
  }

  /// Real-frequency terms oscillate in l until the outer point is inside the
  /// centrifugal barrier, l ~ w r_> / sqrt(f(r_>)); the stop rule waits for it.
  int arm_real(double omega, const Probe& pr) const {
    const double rg = std::max(pr.r, pr.r_prime);
    const double f = 1.0 - 2.0 * p_.M / rg;
    return static_cast<int>(std::ceil(std::abs(omega) * rg / std::sqrt(f))) + 2;
  }

  template <class Eval>
  void run(std::vector<ChannelAccumulator>& acc, Eval&& eval, bool imag_only = false) const {
    for (int l = 0;; ++l) {
      if (std::all_of(acc.begin(), acc.end(), [](const auto& a) { return a.done(); }))
        return;
      if (l > sum_opts_.l_max)
        throw TruncationError("SchwarzschildSource: l_max reached before the stop rule fired");
      const auto g = eval(l);
      for (std::size_t k = 0; k < acc.size(); ++k)
        if (!acc[k].done())
          acc[k].add(imag_only ? cplx(g[k].imag() / std::numbers::pi, 0.0) : cplx(g[k]));
    }
  }

  KernelSample sample(double x, bool imaginary) const {
    std::vector<ChannelAccumulator> acc;
    for (const auto& pr : probes_)
      acc.emplace_back(pr.gamma, sum_opts_, imaginary ? 2 : arm_real(x, pr));
    if (imaginary) {
      run(acc, [&](int l) {
        const auto v = green_.evaluate_imaginary(x, l);
        return std::vector<cplx>(v.begin(), v.end());
      });
    } else {
      run(acc, [&](int l) { return green_.evaluate(x, l); }, true);
    }
    KernelSample s;
    for (const auto& a : acc) {
      const auto r = a.result();
      s.value.push_back(r.value.real());
      s.lsum_error.push_back(r.lsum_error);
      s.l_used.push_back(r.l_used);
    }
    return s;
  }

  std::vector<KernelSample> cached(const std::vector<double>& xs, std::map<double, KernelSample>& cache,
                                   bool imaginary) {
    std::vector<double> todo;
    for (double x : xs)
      if (!cache.count(x))
        todo.push_back(x);
    std::sort(todo.begin(), todo.end());
    todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
    std::vector<KernelSample> fresh(todo.size());
    parallel_for(todo.size(), workers_, [&](std::size_t i) { fresh[i] = sample(todo[i], imaginary); });
    for (std::size_t i = 0; i < todo.size(); ++i)
      cache.emplace(todo[i], std::move(fresh[i]));
    std::vector<KernelSample> out;
    out.reserve(xs.size());
    for (double x : xs)
      out.push_back(cache.at(x));
    return out;
  }

  SpacetimeParams p_;
  std::vector<Probe> probes_;
  ChannelSumOptions sum_opts_;
  int workers_;
  ChannelGreen green_;
  std::map<double, KernelSample> rho_cache_, euclid_cache_;
};

struct State {
  enum class Kind { Ground, Thermal };
  Kind kind = Kind::Ground;
  double beta = 0.0;

  static State ground() { return {}; }
  static State thermal(double beta) {
    if (!(beta > 0.0))
      throw DomainError("State: beta must be > 0");
    return {Kind::Thermal, beta};
  }
  bool is_ground() const { return kind == Kind::Ground; }
};

enum class TwoPointMethod { Auto, RealAxis, Euclidean };

inline const char* to_string(TwoPointMethod m) {
  switch (m) {
  case TwoPointMethod::Auto:
    return "auto";
  case TwoPointMethod::RealAxis:
    return "real-axis";
  case TwoPointMethod::Euclidean:
    return "imaginary-axis";
  }
  return "?";
}

struct TwoPointResult {
  cplx value;
  double quad_error = 0.0;
  double lsum_error = 0.0;
  int l_used = 0;
  QuadratureSpec spec;
  TwoPointMethod method = TwoPointMethod::RealAxis;
  std::size_t evaluations = 0;

  double total_error() const { return quad_error + lsum_error; }
};

namespace detail {

/// Frequency weight multiplying rho(w), w > 0.
inline cplx spectral_weight(double w, cplx tau, const State& s) {
  const cplx I(0.0, 1.0);
  const cplx e = std::exp(-I * w * tau);
  if (s.is_ground())
    return e;
  const double n = bose_weight(w, s.beta);
  // (n - 1) e^{i w tau} = n e^{i w tau - beta w}, which cannot overflow.
  return n * e + n * std::exp(I * w * tau - s.beta * w);
}

inline std::vector<TwoPointResult> two_point_real_axis(SpectralSource& src, const State& state, cplx tau,
                                                       const QuadratureSpec& spec) {
  const double m = src.mass();
  spec.validate(m);
  const double eps = -tau.imag();
  const double eps_eff = state.is_ground() ? eps : std::min(eps, state.beta - eps);
  const double wmax = spec.resolved_omega_max(m, eps_eff);
  const double lo = spec.omega_min, gap = spec.threshold_gap;
  if (!(wmax > lo))
    throw DomainError("two_point: omega_max must exceed omega_min");

  // x < 0: w = m - x^2 (below threshold); x > 0: w = m + x^2.
  std::vector<std::pair<double, double>> spans;
  if (lo < m - gap)
    spans.push_back({-std::sqrt(m - lo), -std::sqrt(gap)});
  spans.push_back({std::sqrt(std::max(gap, lo - m)), std::sqrt(wmax - m)});
  auto omega_of = [m](double x) { return x < 0.0 ? m - x * x : m + x * x; };

  const std::size_t P = src.probes().size();
  std::vector<int> l_used(P, 0);
  auto batch = [&](const std::vector<double>& xs) {
    std::vector<double> ws(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      ws[i] = omega_of(xs[i]);
    const auto samples = src.spectral(ws);
    std::vector<std::vector<cplx>> out(xs.size(), std::vector<cplx>(2 * P));
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const cplx w = spectral_weight(ws[i], tau, state) * (2.0 * std::abs(xs[i]));
      for (std::size_t k = 0; k < P; ++k) {
        out[i][k] = samples[i].value[k] * w;
        out[i][P + k] = samples[i].lsum_error[k] * std::abs(w);
        l_used[k] = std::max(l_used[k], samples[i].l_used[k]);
      }
    }
    return out;
  };
  const auto res = integrate_adaptive(batch, spans, 2 * P, spec.abs_tol, spec.rel_tol, spec.max_panels, P);
  if (!res.converged)
    throw QuadratureError("two_point: frequency quadrature did not reach tolerance within the panel budget");

  // Tail beyond wmax: |rho| <= C w^2 with C from the top of the range (x2),
  // and every weight is bounded by 2 n(wmax) e^{-eps_eff w}.
  const auto top = src.spectral({0.8 * wmax, 0.9 * wmax, wmax});
  const double wfac = state.is_ground() ? 1.0 : 2.0 * bose_weight(wmax, state.beta);
  const double moment = std::exp(-eps_eff * wmax) *
                        (wmax * wmax / eps_eff + 2.0 * wmax / (eps_eff * eps_eff) +
                         2.0 / (eps_eff * eps_eff * eps_eff));
  // Threshold sliver |w - m| < gap, bounded by twice the nearby integrand.
  const bool sliver = lo < m + gap;
  std::vector<double> near_w;
  if (sliver) {
    if (lo < m - 1e-4 * m)
      near_w.push_back(m - 1e-4 * m);
    near_w.push_back(m + 1e-4 * m);
  }
  const auto near = near_w.empty() ? std::vector<KernelSample>{} : src.spectral(near_w);

  std::vector<TwoPointResult> out(P);
  for (std::size_t k = 0; k < P; ++k) {
    double C = 0.0;
    const double tw[3] = {0.8 * wmax, 0.9 * wmax, wmax};
    for (int j = 0; j < 3; ++j)
      C = std::max(C, 2.0 * std::abs(top[static_cast<std::size_t>(j)].value[k]) / (tw[j] * tw[j]));
    double sl = 0.0;
    for (std::size_t j = 0; j < near.size(); ++j)
      sl = std::max(sl, 4.0 * gap * std::abs(near[j].value[k] * spectral_weight(near_w[j], tau, state)));
    auto& r = out[k];
    r.value = res.value[k];
    r.quad_error = res.error[k] + C * wfac * moment + sl;
    r.lsum_error = std::abs(res.value[P + k]);
    r.l_used = l_used[k];
    r.spec = spec;
    r.spec.omega_max = wmax;
    r.method = TwoPointMethod::RealAxis;
    r.evaluations = res.evaluations;
  }
  return out;
}

inline std::vector<TwoPointResult> two_point_imaginary_axis(SpectralSource& src, cplx tau,
                                                            const QuadratureSpec& spec) {
  const double m = src.mass();
  spec.validate(m);
  const double t = std::abs(tau.real());
  const std::size_t P = src.probes().size();
  double dmin = std::numeric_limits<double>::infinity();
  for (const auto& p : src.probes())
    dmin = std::min(dmin, p.chord());
  if (!(dmin > t))
    throw DomainError("two_point: imaginary-axis route needs |Re tau| below every separation");
  // Beyond ymax the integrand is down by e^{-40} on the closest probe.
  const double ymax = (40.0 + m * dmin) / (dmin - t);

  std::vector<int> l_used(P, 0);
  auto batch = [&](const std::vector<double>& ys) {
    const auto samples = src.euclidean(ys);
    std::vector<std::vector<cplx>> out(ys.size(), std::vector<cplx>(2 * P));
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const cplx c = std::cosh(ys[i] * tau) / std::numbers::pi;
      for (std::size_t k = 0; k < P; ++k) {
        out[i][k] = samples[i].value[k] * c;
        out[i][P + k] = samples[i].lsum_error[k] * std::abs(c);
        l_used[k] = std::max(l_used[k], samples[i].l_used[k]);
      }
    }
    return out;
  };
  const auto res = integrate_adaptive(batch, {{0.0, ymax}}, 2 * P, spec.abs_tol, spec.rel_tol,
                                      spec.max_panels, P);
  if (!res.converged)
    throw QuadratureError("two_point: imaginary-axis quadrature did not reach tolerance");

  // K(i y) falls at least like e^{-(y - ymax) D} beyond ymax.
  const auto end = src.euclidean({ymax});
  std::vector<TwoPointResult> out(P);
  for (std::size_t k = 0; k < P; ++k) {
    const double D = src.probes()[k].chord();
    auto& r = out[k];
    r.value = res.value[k];
    r.quad_error = res.error[k] + std::abs(end[0].value[k]) * std::cosh(ymax * t) /
                                      (std::numbers::pi * (D - t));
    r.lsum_error = std::abs(res.value[P + k]);
    r.l_used = l_used[k];
    r.spec = spec;
    r.method = TwoPointMethod::Euclidean;
    r.evaluations = res.evaluations;
  }
  return out;
}

} // namespace detail

/// Imaginary-axis route for ground states when every separation is at
/// least max(2 |Re tau|, 1/m) and the source can sum K(i y) there;
/// real-axis quadrature otherwise.
inline TwoPointMethod select_method(const SpectralSource& src, const State& state, cplx tau) {
  if (!state.is_ground() || !src.has_euclidean())
    return TwoPointMethod::RealAxis;
  const double need = std::max(2.0 * std::abs(tau.real()), 1.0 / src.mass());
  for (const auto& p : src.probes())
    if (p.chord() < need || !src.euclidean_converges(p))
      return TwoPointMethod::RealAxis;
  return TwoPointMethod::Euclidean;
}

/// Regulated two-point values at every probe of `src`.
inline std::vector<TwoPointResult> two_point(SpectralSource& src, const State& state, cplx tau,
                                             const QuadratureSpec& spec,
                                             TwoPointMethod method = TwoPointMethod::Auto) {
  if (!(tau.imag() < 0.0))
    throw DomainError("two_point: need Im tau < 0");
  if (!state.is_ground() && !(tau.imag() > -state.beta))
    throw DomainError("two_point: thermal evaluation needs -beta < Im tau < 0");
  if (method == TwoPointMethod::Auto)
    method = select_method(src, state, tau);
  if (method == TwoPointMethod::Euclidean) {
    if (!state.is_ground())
      throw DomainError("two_point: the imaginary-axis route covers the ground state only");
    return detail::two_point_imaginary_axis(src, tau, spec);
  }
  return detail::two_point_real_axis(src, state, tau, spec);
}

/// Flat source for M = 0, channel sums otherwise.
inline std::unique_ptr<SpectralSource> make_source(const SpacetimeParams& p, std::vector<Probe> probes,
                                                   const ChannelSumOptions& sum_opts = {}, int workers = 1) {
  p.validate();
  if (p.M == 0.0)
    return std::make_unique<FlatSource>(p.m, std::move(probes));
  return std::make_unique<SchwarzschildSource>(p, std::move(probes), sum_opts, ChannelOptions{}, workers);
}

inline TwoPointResult two_point(const SpacetimeParams& p, const State& state, cplx tau, double r, double rp,
                                double gamma, const QuadratureSpec& spec,
                                TwoPointMethod method = TwoPointMethod::Auto) {
  auto src = make_source(p, {{r, rp, gamma}});
  return two_point(*src, state, tau, spec, method).front();
}

/// ln|W| ~ c - kappa d - power ln|sigma|, d the chord, sigma = sqrt(d^2 - tau^2).
struct DecayFit {
  double kappa = 0.0;
  double power = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
  std::vector<double> separation;
  std::vector<double> log_abs;
};

inline DecayFit fit_decay(const std::vector<double>& d, const std::vector<double>& log_abs, cplx tau) {
  if (d.size() < 8)
    throw WindowTooSmall("fit_decay: need at least 8 points");
  for (std::size_t i = 1; i < d.size(); ++i)
    if (!(d[i] > d[i - 1]))
      throw DomainError("fit_decay: separations must increase");
  auto lsig = [tau](double x) { return std::log(std::abs(std::sqrt(cplx(x * x) - tau * tau))); };
  const std::vector<std::function<double(double)>> basis = {
      [](double) { return 1.0; }, [](double x) { return -x; }, [lsig](double x) { return -lsig(x); }};
  const auto f = fit::least_squares(d, log_abs, basis);
  return {f.coefficients[1], f.coefficients[2], f.coefficients[0], f.rms_residual, d, log_abs};
}

/// Two-point values along the probes of `src` (increasing chord), fitted
/// with fit_decay.
inline DecayFit decay_profile(SpectralSource& src, const State& state, cplx tau, const QuadratureSpec& spec,
                              TwoPointMethod method = TwoPointMethod::Auto) {
  const auto vals = two_point(src, state, tau, spec, method);
  std::vector<double> d, la;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    d.push_back(src.probes()[k].chord());
    la.push_back(std::log(std::abs(vals[k].value)));
  }
  return fit_decay(d, la, tau);
}

/// Single-frequency variant: ln|G_l(r, r')| ~ c - kappa r' - power ln r'.
inline DecayFit frequency_decay_profile(const SpacetimeParams& p, double omega, int l, double r,
                                        const std::vector<double>& r_primes) {
  if (r_primes.size() < 8)
    throw WindowTooSmall("frequency_decay_profile: need at least 8 points");
  std::vector<std::pair<double, double>> pairs;
  for (double x : r_primes)
    pairs.emplace_back(r, x);
  ChannelGreen g(p, pairs);
  const auto v = g.evaluate(omega, l);
  std::vector<double> la;
  for (const auto& z : v)
    la.push_back(std::log(std::abs(z)));
  const std::vector<std::function<double(double)>> basis = {
      [](double) { return 1.0; }, [](double x) { return -x; }, [](double x) { return -std::log(x); }};
  const auto f = fit::least_squares(r_primes, la, basis);
  return {f.coefficients[1], f.coefficients[2], f.coefficients[0], f.rms_residual, r_primes, la};
}

struct IntegrabilityOptions {
  double r_min = 0.0;        ///< 0 selects r + 10/m
  double panel_length = 10.0; ///< longest r' panel, in units of 1/m
  double rel_tol = 1e-3;     ///< extrapolated tail must stay below rel_tol I(R_max)
};

struct IntegrabilityReport {
  double r = 0.0, r_min = 0.0;
  std::vector<double> cuts;
  std::vector<double> partial;    ///< I(R) per cut
  std::vector<double> increments; ///< I(c_k) - I(c_{k-1}); the first starts at r_min
  std::vector<double> partial_error;
  double ratio = 0.0;             ///< fitted geometric ratio of increments past the first
  double tail = 0.0;
  bool monotone = false;
  bool converged = false;
  std::size_t nodes = 0;
};

using SourceFactory = std::function<std::unique_ptr<SpectralSource>(std::vector<Probe>)>;

/// I(R) = int_{r_min}^R |W(tau; r, r')| r'^2 dr' at each cut, with 21-point
/// Gauss-Kronrod panels in r' (Kronrod minus Gauss as the panel error).
inline IntegrabilityReport integrability_check(const SourceFactory& make, double m, const State& state,
                                               cplx tau, double r, const std::vector<double>& cuts,
                                               const QuadratureSpec& spec,
                                               const IntegrabilityOptions& opts = {},
                                               TwoPointMethod method = TwoPointMethod::Auto) {
  if (cuts.size() < 4)
    throw DomainError("integrability_check: need at least 4 cuts");
  IntegrabilityReport rep;
  rep.r = r;
  rep.r_min = opts.r_min > 0.0 ? opts.r_min : r + 10.0 / m;
  rep.cuts = cuts;
  if (!(cuts.front() > rep.r_min))
    throw DomainError("integrability_check: first cut must exceed r_min");
  for (std::size_t i = 1; i < cuts.size(); ++i)
    if (!(cuts[i] > cuts[i - 1]))
      throw DomainError("integrability_check: cuts must increase");

  const auto& rule = detail::gk21();
  struct PanelRef {
    std::size_t segment;
    double a, b;
  };
  std::vector<PanelRef> panels;
  double a = rep.r_min;
  for (std::size_t s = 0; s < cuts.size(); ++s) {
    const double b = cuts[s];
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) * m / opts.panel_length)));
    for (int j = 0; j < n; ++j)
      panels.push_back({s, a + (b - a) * j / n, a + (b - a) * (j + 1) / n});
    a = b;
  }
  std::vector<Probe> probes;
  for (const auto& p : panels)
    for (double x : rule.x)
      probes.push_back({r, 0.5 * (p.a + p.b) + 0.5 * (p.b - p.a) * x, 0.0});
  rep.nodes = probes.size();
  auto src = make(probes);
  const auto vals = two_point(*src, state, tau, spec, method);

  std::vector<double> seg(cuts.size(), 0.0), seg_err(cuts.size(), 0.0);
  std::size_t idx = 0;
  for (const auto& p : panels) {
    const double h = 0.5 * (p.b - p.a);
    double kr = 0.0, ga = 0.0, ve = 0.0;
    for (std::size_t j = 0; j < rule.x.size(); ++j, ++idx) {
      const double rp = probes[idx].r_prime;
      const double f = std::abs(vals[idx].value) * rp * rp;
      kr += rule.wk[j] * f;
      ga += rule.wg[j] * f;
      ve += rule.wk[j] * vals[idx].total_error() * rp * rp;
    }
    seg[p.segment] += h * kr;
    seg_err[p.segment] += std::abs(h * (kr - ga)) + h * ve;
  }
  double acc = 0.0, acc_err = 0.0;
  for (std::size_t s = 0; s < cuts.size(); ++s) {
    acc += seg[s];
    acc_err += seg_err[s];
    rep.partial.push_back(acc);
    rep.partial_error.push_back(acc_err);
    rep.increments.push_back(seg[s]);
  }
  rep.monotone = true;
  for (std::size_t s = 1; s < rep.partial.size(); ++s)
    rep.monotone = rep.monotone && rep.partial[s] >= rep.partial[s - 1];

  // ln(increment) against cut index, skipping the first increment.
  std::vector<double> k, li;
  for (std::size_t s = 1; s < rep.increments.size(); ++s) {
    if (!(rep.increments[s] > 0.0))
      break;
    k.push_back(static_cast<double>(s));
    li.push_back(std::log(rep.increments[s]));
  }
  if (k.size() >= 2) {
    const std::vector<std::function<double(double)>> basis = {[](double) { return 1.0; },
                                                              [](double x) { return x; }};
    rep.ratio = std::exp(fit::least_squares(k, li, basis).coefficients[1]);
  } else {
    rep.ratio = 0.0; // increments vanished to underflow
  }
  const double last = rep.increments.back();
  rep.tail = rep.ratio < 1.0 ? last * rep.ratio / (1.0 - rep.ratio) : std::numeric_limits<double>::infinity();
  rep.converged = rep.monotone && rep.ratio < 1.0 && rep.tail < opts.rel_tol * rep.partial.back();
  return rep;
}

} // namespace sqft
