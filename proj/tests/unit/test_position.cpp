#include <sqft/position.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace sqft;

namespace {

constexpr double kPi = std::numbers::pi;

// G_l = 4 pi t^l / (2l+1) turns the channel sum into the Legendre generating
// function 1 / sqrt(1 - 2 x t + t^2).
std::vector<cplx> generating_channels(double t, int n) {
  std::vector<cplx> g;
  for (int l = 0; l < n; ++l)
    g.push_back(4.0 * kPi * std::pow(t, l) / (2.0 * l + 1.0));
  return g;
}

} // namespace

TEST(ChannelSum, LegendreGeneratingFunction) {
  for (double gamma : {0.0, 0.4, 1.3, 2.9}) {
    const double t = 0.6, x = std::cos(gamma);
    const auto res = channel_sum(generating_channels(t, 400), gamma);
    const double exact = 1.0 / std::sqrt(1.0 - 2.0 * x * t + t * t);
    EXPECT_NEAR(res.value.real(), exact, 1e-7 * exact) << gamma;
    EXPECT_LE(std::abs(res.value.real() - exact), res.lsum_error + 1e-14);
  }
}

TEST(ChannelSum, SingleChannelAndTruncation) {
  ChannelSumOptions opts;
  const auto one = channel_sum({cplx(2.0, -1.0), 0.0, 0.0, 0.0}, 0.3, opts);
  EXPECT_NEAR(std::abs(one.value - cplx(2.0, -1.0) / (4.0 * kPi)), 0.0, 1e-16);
  EXPECT_EQ(one.l_used, 3);
  EXPECT_THROW(channel_sum(generating_channels(0.99, 20), 0.0, opts), TruncationError);
  opts.l_max = 5;
  EXPECT_THROW(channel_sum(generating_channels(0.6, 400), 0.0, opts), TruncationError);
}

TEST(ChannelSum, ArmingDelaysTheStop) {
  std::vector<cplx> g(40, 0.0);
  g[30] = 1.0;
  EXPECT_THROW(channel_sum(std::vector<cplx>(g.begin(), g.begin() + 10), 0.0, {}, 20), TruncationError);
  const auto res = channel_sum(g, 0.0, {}, 32);
  EXPECT_NEAR(res.value.real(), 61.0 / (4.0 * kPi), 1e-14);
}

TEST(SchwarzschildSource, SmallMassMatchesFlatKernels) {
  const std::vector<Probe> probes = {{20.0, 25.0, 0.3}, {30.0, 33.0, 0.2}};
  SchwarzschildSource src({1e-3, 1.0}, probes);
  FlatSource flat(1.0, probes);
  const auto e = src.euclidean({0.7});
  const auto ef = flat.euclidean({0.7});
  for (std::size_t k = 0; k < probes.size(); ++k)
    EXPECT_NEAR(e[0].value[k] / ef[0].value[k], 1.0, 5e-3) << k;
  const auto s = src.spectral({1.6});
  const auto sf = flat.spectral({1.6});
  for (std::size_t k = 0; k < probes.size(); ++k)
    EXPECT_NEAR(s[0].value[k], sf[0].value[k], 0.01 * std::abs(sf[0].value[k])) << k;
}

TEST(SchwarzschildSource, EqualRadiiStayOnTheRealAxis) {
  SchwarzschildSource src({1.0, 1.0}, {{30.0, 30.0, 0.2}});
  EXPECT_FALSE(src.euclidean_converges(src.probes()[0]));
  EXPECT_EQ(select_method(src, State::ground(), cplx(0.0, -0.3)), TwoPointMethod::RealAxis);
  EXPECT_THROW(src.euclidean({0.7}), TruncationError);
  const auto rho = src.spectral({1.6});
  EXPECT_GT(rho[0].l_used[0], 48);
}

TEST(TwoPoint, FlatRoutesAgreeWithClosedForm) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  spec.abs_tol = 1e-300;
  const cplx tau(0.5, -0.3);
  FlatSource src(1.0, {{10.0, 13.0, 0.0}});
  const auto closed = flat_wightman_closed({tau, 3.0, 1.0});
  const auto re = two_point(src, State::ground(), tau, spec, TwoPointMethod::RealAxis).front();
  const auto eu = two_point(src, State::ground(), tau, spec, TwoPointMethod::Euclidean).front();
  EXPECT_LE(std::abs(re.value - closed), 1e-7 * std::abs(closed));
  EXPECT_LE(std::abs(eu.value - closed), 1e-7 * std::abs(closed));
  EXPECT_EQ(select_method(src, State::ground(), tau), TwoPointMethod::Euclidean);
  EXPECT_EQ(select_method(src, State::thermal(2.0), tau), TwoPointMethod::RealAxis);
  EXPECT_EQ(select_method(src, State::ground(), cplx(2.0, -0.3)), TwoPointMethod::RealAxis);
}

TEST(TwoPoint, RejectsBadTimes) {
  QuadratureSpec spec;
  FlatSource src(1.0, {{10.0, 13.0, 0.0}});
  EXPECT_THROW(two_point(src, State::ground(), cplx(0.1, 0.2), spec), DomainError);
  EXPECT_THROW(two_point(src, State::thermal(1.0), cplx(0.1, -1.5), spec), DomainError);
  EXPECT_THROW(two_point(src, State::thermal(1.0), cplx(0.1, -0.2), spec, TwoPointMethod::Euclidean),
               DomainError);
  EXPECT_THROW(two_point(src, State::ground(), cplx(4.0, -0.2), spec, TwoPointMethod::Euclidean), DomainError);
}

TEST(TwoPoint, Hermiticity) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  const cplx tau(0.7, -0.25);
  FlatSource ab(1.0, {{10.0, 12.0, 0.1}});
  FlatSource ba(1.0, {{12.0, 10.0, 0.1}});
  for (auto method : {TwoPointMethod::RealAxis, TwoPointMethod::Euclidean}) {
    const auto w1 = two_point(ab, State::ground(), tau, spec, method).front();
    const auto w2 = two_point(ba, State::ground(), cplx(-tau.real(), tau.imag()), spec, method).front();
    EXPECT_LE(std::abs(w1.value - std::conj(w2.value)), w1.total_error() + w2.total_error() + 1e-15);
  }
  SchwarzschildSource s1({1.0, 1.0}, {{20.0, 26.0, 0.0}});
  SchwarzschildSource s2({1.0, 1.0}, {{26.0, 20.0, 0.0}});
  const auto w1 = two_point(s1, State::ground(), tau, spec).front();
  const auto w2 = two_point(s2, State::ground(), cplx(-tau.real(), tau.imag()), spec).front();
  EXPECT_EQ(w1.method, TwoPointMethod::Euclidean);
  EXPECT_LE(std::abs(w1.value - std::conj(w2.value)), w1.total_error() + w2.total_error());
}

TEST(TwoPoint, ThermalDominatesGroundOnTheDiagonal) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-8;
  FlatSource src(1.0, {{15.0, 15.0, 0.0}});
  const cplx tau(0.0, -0.3);
  const auto g = two_point(src, State::ground(), tau, spec).front();
  for (double beta : {1.0, 3.0, 10.0}) {
    const auto t = two_point(src, State::thermal(beta), tau, spec).front();
    EXPECT_GT(t.value.real(), g.value.real()) << beta;
    EXPECT_LE(std::abs(t.value.imag()), t.total_error());
  }
}

TEST(TwoPoint, ZeroTemperatureLimitWithinBoseBound) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-10;
  spec.abs_tol = 1e-300;
  FlatSource src(1.0, {{15.0, 17.0, 0.0}});
  const cplx tau(0.4, -0.3);
  const double beta = 100.0;
  const auto g = two_point(src, State::ground(), tau, spec, TwoPointMethod::RealAxis).front();
  const auto t = two_point(src, State::thermal(beta), tau, spec, TwoPointMethod::RealAxis).front();
  const double bound = std::exp(-beta) / (1.0 - std::exp(-beta));
  EXPECT_LE(std::abs(t.value - g.value), bound * std::abs(g.value) + g.total_error() + t.total_error());
}

TEST(DecayFit, FlatEqualTimeRateIsTheMass) {
  std::vector<Probe> probes;
  for (int i = 0; i <= 10; ++i)
    probes.push_back({100.0, 105.0 + i, 0.0});
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  for (double m : {1.0, 0.5}) {
    FlatSource src(m, probes);
    const auto fit = decay_profile(src, State::ground(), cplx(0.0, -0.2), spec);
    EXPECT_NEAR(fit.kappa, m, 0.02 * m) << m;
    if (m == 1.0) // K_1 asymptotics: sigma^{-3/2}
      EXPECT_NEAR(fit.power, 1.5, 0.1);
  }
}

TEST(DecayFit, WindowChecks) {
  EXPECT_THROW(fit_decay({1, 2, 3}, {0, 0, 0}, cplx(0, -0.1)), WindowTooSmall);
  EXPECT_THROW(fit_decay({1, 2, 3, 4, 5, 6, 8, 7}, std::vector<double>(8, 0.0), cplx(0, -0.1)), DomainError);
}

TEST(DecayFit, SubThresholdFrequencyRate) {
  std::vector<double> rp;
  for (int i = 0; i < 12; ++i)
    rp.push_back(60.0 + 5.0 * i);
  const auto fit = frequency_decay_profile({1.0, 1.0}, 0.5, 0, 20.0, rp);
  EXPECT_NEAR(fit.kappa, std::sqrt(0.75), 0.02 * std::sqrt(0.75));
}

TEST(Integrability, FlatMassiveConvergesMasslessLikeDoesNot) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-8;
  const std::vector<double> cuts = {80.0, 120.0, 160.0, 200.0};
  const cplx tau(0.0, -0.3);
  auto flat = [](double m) {
    return SourceFactory([m](std::vector<Probe> p) { return std::make_unique<FlatSource>(m, std::move(p)); });
  };
  const auto rep = integrability_check(flat(1.0), 1.0, State::ground(), tau, 60.0, cuts, spec);
  EXPECT_TRUE(rep.converged);
  EXPECT_TRUE(rep.monotone);
  EXPECT_LT(rep.ratio, 1.0);
  EXPECT_LT(rep.tail, 1e-3 * rep.partial.back());

  IntegrabilityOptions opts;
  opts.r_min = 70.0;
  const auto light = integrability_check(flat(1e-3), 1e-3, State::ground(), tau, 60.0, cuts, spec, opts,
                                         TwoPointMethod::Euclidean);
  EXPECT_FALSE(light.converged);
  EXPECT_GT(light.tail, 1e-3 * light.partial.back());

  EXPECT_THROW(integrability_check(flat(1.0), 1.0, State::ground(), tau, 60.0, {80.0, 120.0}, spec),
               DomainError);
}
