#include "fabco/stats.h"

#include <cmath>
#include <stdexcept>

#include <gtest/gtest.h>

namespace fabco {
namespace {

TEST(MeanTest, BasicsAndEmpty) {
  EXPECT_DOUBLE_EQ(Mean({1.0, 2.0, 6.0}), 3.0);
  EXPECT_THROW(Mean({}), std::invalid_argument);
  EXPECT_DOUBLE_EQ(SampleVariance({1.0, 2.0, 3.0, 4.0, 5.0}), 2.5);
  EXPECT_EQ(SampleVariance({4.0}), 0.0);
}

TEST(WelchTest, HandWorkedExample) {
  // var_a = 2.5, var_b = 10, se^2 = 0.5 + 2 = 2.5
  WelchResult r = WelchTTest({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10});
  EXPECT_DOUBLE_EQ(r.mean_a, 3.0);
  EXPECT_DOUBLE_EQ(r.mean_b, 6.0);
  EXPECT_NEAR(r.t, -3.0 / std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(r.df, 6.25 / (0.25 / 4 + 4.0 / 4), 1e-12);
  // reference values from an independent statistics package
  EXPECT_NEAR(r.t, -1.8973665961010275, 1e-12);
  EXPECT_NEAR(r.p_value, 0.10753119493062718, 1e-9);
}

TEST(WelchTest, UnequalSizes) {
  WelchResult r = WelchTTest({0.91, 0.88, 0.95, 0.97, 0.86, 0.93},
                             {0.41, 0.55, 0.38, 0.62, 0.47});
  EXPECT_NEAR(r.t, 9.064936988370677, 1e-10);
  EXPECT_NEAR(r.p_value, 0.00022648635247962765, 1e-9);
}

TEST(WelchTest, IdenticalGroupsGiveZeroT) {
  WelchResult r = WelchTTest({0.5, 0.6, 0.7}, {0.5, 0.6, 0.7});
  EXPECT_EQ(r.t, 0.0);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
}

TEST(WelchTest, SingletonLeavesPUndefined) {
  WelchResult r = WelchTTest({0.5}, {0.5, 0.6, 0.7});
  EXPECT_TRUE(std::isnan(r.p_value));
  EXPECT_DOUBLE_EQ(r.mean_a, 0.5);
}

TEST(WelchTest, ConstantButDifferentGroups) {
  WelchResult r = WelchTTest({1.0, 1.0}, {0.0, 0.0});
  EXPECT_TRUE(std::isinf(r.t));
  EXPECT_GT(r.t, 0.0);
  EXPECT_EQ(r.p_value, 0.0);
}

TEST(PairedFeasibilityTest, MeansStdsAndT) {
  PairedFeasibilityStats s =
      ComparePairedFeasibility({1, 2, 3, 4, 5}, {2, 4, 6, 8, 10});
  EXPECT_DOUBLE_EQ(s.mean_fb, 3.0);
  EXPECT_DOUBLE_EQ(s.mean_no_fb, 6.0);
  EXPECT_NEAR(s.std_fb, std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(s.std_no_fb, std::sqrt(10.0), 1e-12);
  EXPECT_NEAR(s.welch.t, -1.8973665961010275, 1e-12);
  EXPECT_TRUE(s.p_defined);
}

TEST(PairedFeasibilityTest, SingletonSessionFlagsP) {
  PairedFeasibilityStats s = ComparePairedFeasibility({0.9}, {0.4, 0.5});
  EXPECT_FALSE(s.p_defined);
  EXPECT_EQ(s.std_fb, 0.0);
}

TEST(PairedFeasibilityTest, IdenticalSessions) {
  PairedFeasibilityStats s =
      ComparePairedFeasibility({0.8, 0.9, 0.7}, {0.8, 0.9, 0.7});
  EXPECT_EQ(s.welch.t, 0.0);
}

}  // namespace
}  // namespace fabco
