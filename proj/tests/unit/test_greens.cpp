#include <sqft/flat.hpp>
#include <sqft/greens.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace sqft;

namespace {
const SpacetimeParams kSchw{1.0, 1.0};
const SpacetimeParams kFlat{0.0, 1.0};
} // namespace

TEST(GreenFrequency, SymmetricAndJumpCondition) {
  const auto grid = RadialGrid::uniform_radius(4.0, 30.0, 2001, kSchw);
  SolveOptions opts;
  opts.tol = 1e-10;
  for (double w : {0.5, 1.5}) {
    const auto phi = solve_phi(w, 1, kSchw, grid, opts);
    const auto psi = solve_psi(w, 1, kSchw, grid, opts);
    const auto g = green_frequency(phi, psi, {{6.0, 9.5}, {9.5, 6.0}, {12.0, 12.0}});
    EXPECT_EQ(g.values[0].value, g.values[1].value);
    EXPECT_EQ(g.at(6.0, 9.5), g.at(9.5, 6.0));
    // One-sided derivatives carry an O(delta) bias.
    EXPECT_LT(green_residual_check(g, 1e-6).max_residual, 1e-5);
    EXPECT_LT(green_residual_check(g, 1e-5).max_residual, 1e-3);
  }
}

TEST(ChannelGreen, FlatMatchesBesselForms) {
  const std::vector<std::pair<double, double>> pairs{{2.0, 7.0}, {5.0, 5.0}, {60.0, 70.0}, {0.5, 30.0}};
  ChannelGreen cg(kFlat, pairs);
  for (double w : {0.3, 0.9, 1.2, 2.5, -1.7}) {
    for (int l : {0, 1, 4, 12}) {
      const auto v = cg.evaluate(w, l);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const cplx ref = flat_channel_green(w, l, 1.0, pairs[k].first, pairs[k].second);
        EXPECT_LT(std::abs(v[k] - ref), 1e-7 * std::abs(ref) + 1e-300) << w << " " << l << " " << k;
      }
    }
  }
}

TEST(ChannelGreen, FlatImaginaryFrequency) {
  const std::vector<std::pair<double, double>> pairs{{2.0, 7.0}, {60.0, 61.0}, {40.0, 100.0}};
  ChannelGreen cg(kFlat, pairs);
  for (double y : {0.01, 0.7, 5.0}) {
    for (int l : {0, 3, 40}) {
      const auto v = cg.evaluate_imaginary(y, l);
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        const double ref = flat_channel_green_imaginary(y, l, 1.0, pairs[k].first, pairs[k].second);
        EXPECT_NEAR(v[k] / ref, 1.0, 1e-7) << y << " " << l << " " << k;
      }
    }
  }
}

TEST(ChannelGreen, AgreesWithGridSolutions) {
  const std::vector<std::pair<double, double>> pairs{{3.0, 8.0}, {10.0, 10.0}, {25.0, 40.0}};
  ChannelGreen cg(kSchw, pairs);
  const auto grid = RadialGrid::uniform_radius(3.0, 40.0, 3701, kSchw);
  SolveOptions opts;
  opts.tol = 1e-11;
  for (double w : {0.6, 1.3, 2.2}) {
    for (int l : {0, 2, 6}) {
      const auto phi = solve_phi(w, l, kSchw, grid, opts);
      const auto psi = solve_psi(w, l, kSchw, grid, opts);
      const auto g = green_frequency(phi, psi, pairs);
      const auto v = cg.evaluate(w, l);
      for (std::size_t k = 0; k < pairs.size(); ++k)
        EXPECT_LT(std::abs(v[k] - g.values[k].value), 1e-7 * std::abs(g.values[k].value))
            << w << " " << l << " " << k;
    }
  }
}

TEST(ChannelGreen, ImaginaryFrequencyPositiveAndNearlyFlatForSmallMass) {
  const SpacetimeParams tiny{1e-6, 1.0};
  const std::vector<std::pair<double, double>> pairs{{20.0, 30.0}};
  ChannelGreen cg(tiny, pairs);
  ChannelGreen cs(kSchw, pairs);
  for (double y : {0.1, 1.0}) {
    for (int l : {0, 5}) {
      const double v = cg.evaluate_imaginary(y, l)[0];
      EXPECT_NEAR(v / flat_channel_green_imaginary(y, l, 1.0, 20.0, 30.0), 1.0, 1e-4);
      EXPECT_GT(cs.evaluate_imaginary(y, l)[0], 0.0);
    }
  }
}

TEST(ChannelGreen, ApproachesFlatAsMassShrinks) {
  // Above threshold the deviation is dominated by the long-range phase
  // (M/q)(2w^2 - m^2) ln r, about 1.6% at M = 1e-3 for this probe.
  const cplx ref = flat_channel_green(1.2, 0, 1.0, 60.0, 70.0);
  double prev = 1.0;
  for (double M : {1e-2, 1e-3, 1e-4}) {
    ChannelGreen cg({M, 1.0}, {{60.0, 70.0}});
    const double dev = std::abs(cg.evaluate(1.2, 0)[0] - ref) / std::abs(ref);
    EXPECT_LT(dev, prev);
    prev = dev;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(ChannelGreen, SubThresholdDecaySlope) {
  std::vector<std::pair<double, double>> pairs;
  for (double r = 80.0; r <= 160.0; r += 10.0)
    pairs.push_back({10.0, r});
  ChannelGreen cg(kSchw, pairs);
  const auto v = cg.evaluate(0.5, 0);
  // ln|r G| ~ -b r - c ln r + const, with b = sqrt(0.75), c = M(2b^2 - m^2)/b.
  const double b = std::sqrt(0.75), c = (2.0 * 0.75 - 1.0) / b;
  const double s = (std::log(std::abs(v.back()) * 160.0) + c * std::log(160.0) -
                    std::log(std::abs(v.front()) * 80.0) - c * std::log(80.0)) / 80.0;
  EXPECT_NEAR(s, -b, 2e-2 * b);
}
