#include <sqft/flat_limit.hpp>

#include <gtest/gtest.h>

using namespace sqft;

TEST(FlatLimit, ZeroMassUsesFlatMachinery) {
  QuadratureSpec spec;
  spec.rel_tol = 1e-9;
  const auto rep = flat_limit_compare(0.0, 1.0, {{1.2, 0, 60.0, 70.0}}, {{cplx(0.0, -0.3), 60.0, 63.0, 0.0}}, spec);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].deviation, 0.0);
  EXPECT_LE(rep.rows[1].deviation, rep.rows[1].error + 1e-12);
}

TEST(FlatLimit, DeviationShrinksWithMass) {
  QuadratureSpec spec;
  const std::vector<ChannelProbe> ch = {{1.2, 0, 60.0, 70.0}, {0.8, 2, 55.0, 80.0}, {2.0, 3, 90.0, 95.0}};
  const std::vector<PositionProbe> pos = {{cplx(0.0, -0.3), 60.0, 64.0, 0.0}};
  const auto small = flat_limit_compare(1e-3, 1.0, ch, pos, spec);
  const auto large = flat_limit_compare(1e-2, 1.0, ch, pos, spec);
  ASSERT_EQ(small.rows.size(), large.rows.size());
  for (std::size_t i = 0; i < small.rows.size(); ++i)
    EXPECT_LT(small.rows[i].deviation, large.rows[i].deviation) << i;
  EXPECT_LT(small.rows.back().deviation, 1e-2);
}

TEST(FlatLimit, Preconditions) {
  QuadratureSpec spec;
  EXPECT_THROW(flat_limit_compare(0.1, 1.0, {{1.2, 0, 60.0, 70.0}}, {}, spec), DomainError);
  EXPECT_THROW(flat_limit_compare(1e-3, 1.0, {{1.2, 0, 20.0, 70.0}}, {}, spec), DomainError);
}
