#include <sqft/position.hpp>
#include <sqft/thermal.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sqft;

TEST(BoseWeight, ClosedValues) {
  EXPECT_NEAR(bose_weight(std::log(2.0), 1.0), 2.0, 1e-15);
  EXPECT_NEAR(bose_weight(1.0, 2.0), 1.0 / (1.0 - std::exp(-2.0)), 1e-15);
  const double w = 0.7, beta = 60.0, bound = std::exp(-beta * w) / (1.0 - std::exp(-beta * w));
  EXPECT_LE(std::abs(bose_weight(w, beta) - 1.0), bound * (1.0 + 1e-12));
}

TEST(BoseWeight, SmallArgumentAgainstSeries) {
  // 1/(1 - e^{-x}) = 1/x + 1/2 + x/12 - x^3/720 + ..., evaluated in long double.
  for (long double x : {1e-8L, 3e-6L, 1e-4L}) {
    const long double ref = 1.0L / x + 0.5L + x / 12.0L - x * x * x / 720.0L;
    const double got = bose_weight(static_cast<double>(x), 1.0);
    EXPECT_LE(std::abs((got - ref) / ref), 1e-10L) << static_cast<double>(x);
  }
}

TEST(BoseWeight, MonotoneAndAboveOne) {
  double prev = std::numeric_limits<double>::infinity();
  for (double beta : {0.1, 0.5, 1.0, 4.0, 30.0, 800.0}) {
    const double n = bose_weight(0.9, beta);
    EXPECT_GE(n, 1.0);
    EXPECT_LT(n, prev);
    prev = n;
  }
  EXPECT_THROW(bose_weight(0.0, 1.0), DomainError);
  EXPECT_THROW(bose_weight(1.0, -1.0), DomainError);
  EXPECT_NEAR(bose_weight_extended(-0.4, 2.0), 1.0 - bose_weight(0.4, 2.0), 1e-14);
}

TEST(ThermalParams, Validation) {
  EXPECT_NO_THROW((ThermalParams{2.0, 0.2}).validate());
  EXPECT_THROW((ThermalParams{2.0, 1.0}).validate(), DomainError);
  EXPECT_THROW((ThermalParams{0.0, 0.1}).validate(), DomainError);
  EXPECT_DOUBLE_EQ(ThermalParams::with_default_epsilon(4.0).epsilon, 0.4);
}

TEST(ThermalGreen, WeightsEachChannelByBoseFactor) {
  FrequencyGreen a, b;
  a.omega = 1.0;
  a.values = {{20.0, 20.0, cplx(0.3, 0.2)}, {20.0, 25.0, cplx(-1e-3, 4e-3)}};
  b.omega = 2.5;
  b.values = {{20.0, 20.0, cplx(0.1, 0.05)}};
  const auto w = thermal_green_frequency({a, b}, 2.0);
  auto ratio_is = [](cplx got, cplx base, double n) { return std::abs(got - n * base) <= 1e-15 * std::abs(n * base); };
  EXPECT_TRUE(ratio_is(w[0].values[0].value, a.values[0].value, bose_weight(1.0, 2.0)));
  EXPECT_TRUE(ratio_is(w[0].values[1].value, a.values[1].value, bose_weight(1.0, 2.0)));
  EXPECT_TRUE(ratio_is(w[1].values[0].value, b.values[0].value, bose_weight(2.5, 2.0)));
  const auto cold = thermal_green_frequency({a}, 200.0);
  EXPECT_EQ(cold[0].values[0].value, a.values[0].value);
}

TEST(DetailedBalance, RandomOddTables) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    SpectralDensity s;
    double w = 0.0;
    for (int i = 0; i < 200; ++i) {
      w += 0.05 + 0.1 * (U(rng) + 1.0);
      s.omega.push_back(w);
      s.rho.push_back(U(rng) * std::exp(3.0 * U(rng)));
    }
    const auto rep = detailed_balance_check(s, 3.7);
    EXPECT_LE(rep.max_violation, 1e-12);
    EXPECT_TRUE(rep.pass);
  }
}

TEST(DetailedBalance, ZeroTableAndHugeArguments) {
  SpectralDensity z{{0.5, 1.0, 2.0}, {0.0, 0.0, 0.0}, 20.0, 20.0};
  EXPECT_EQ(detailed_balance_check(z, 2.0).max_violation, 0.0);
  SpectralDensity big{{1.0, 100.0, 900.0}, {1.0, 2.0, 3.0}, 20.0, 20.0};
  const auto rep = detailed_balance_check(big, 10.0);
  EXPECT_TRUE(std::isfinite(rep.max_violation));
  EXPECT_LE(rep.max_violation, 1e-12);
}

TEST(GroundPositivity, FlatDiagonalAndCounterexample) {
  SpectralDensity s;
  s.r = s.r_prime = 20.0;
  for (int i = 1; i <= 60; ++i) {
    s.omega.push_back(0.1 * i);
    s.rho.push_back(flat_spectral_density(0.1 * i, 0.0, 1.0));
  }
  EXPECT_TRUE(ground_positivity_check(s).nonnegative);
  for (auto& v : s.rho)
    v = -v;
  EXPECT_FALSE(ground_positivity_check(s).nonnegative);
  s.r_prime = 21.0;
  EXPECT_THROW(ground_positivity_check(s), DomainError);
}

TEST(GroundPositivity, SchwarzschildDiagonalAboveThreshold) {
  SchwarzschildSource src({1.0, 1.0}, {{20.0, 20.0, 0.0}});
  SpectralDensity s;
  s.r = s.r_prime = 20.0;
  for (int i = 0; i < 12; ++i)
    s.omega.push_back(1.05 + 0.17 * i);
  for (const auto& k : src.spectral(s.omega))
    s.rho.push_back(k.value[0]);
  const auto rep = ground_positivity_check(s);
  EXPECT_TRUE(rep.nonnegative) << rep.min_rho << " at " << rep.worst_omega;
  EXPECT_GT(rep.min_rho, 0.0);
}

namespace {

TwoPointEvaluator flat_evaluator(double beta, const QuadratureSpec& spec) {
  return [beta, spec](cplx tau, double r, double rp) {
    FlatSource src(1.0, {{r, rp, 0.0}});
    const auto v = two_point(src, State::thermal(beta), tau, spec, TwoPointMethod::RealAxis).front();
    return EstimatedValue{v.value, v.total_error()};
  };
}

} // namespace

TEST(KmsStrip, FlatEvaluator) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  spec.abs_tol = 1e-300;
  const auto rep = kms_strip_check(flat_evaluator(2.0, spec), 0.5, 2.0, 0.2, 1.0, 2.0);
  EXPECT_LE(rep.difference, 1e-6 * std::abs(rep.shifted.value));
  EXPECT_TRUE(rep.pass) << rep.difference << " vs " << rep.combined_error;
  // Reference: the image sum at both strip points.
  const auto closed = flat_wightman_thermal_closed({cplx(0.5, -1.8), 1.0, 1.0}, 2.0);
  EXPECT_LE(std::abs(rep.shifted.value - closed), 1e-6 * std::abs(closed));
}

TEST(KmsStrip, SymmetricPointGivesEqualValues) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  spec.abs_tol = 1e-300;
  const auto rep = kms_strip_check(flat_evaluator(3.0, spec), 0.0, 3.0, 0.5, 2.0, 2.0);
  EXPECT_LE(rep.difference, 1e-9 * std::abs(rep.shifted.value));
  EXPECT_TRUE(rep.pass);
}

TEST(KmsStrip, RejectsBadRegulator) {
  const auto ev = [](cplx, double, double) { return EstimatedValue{}; };
  EXPECT_THROW(kms_strip_check(ev, 0.1, 2.0, 2.5, 1.0, 1.0), DomainError);
}
