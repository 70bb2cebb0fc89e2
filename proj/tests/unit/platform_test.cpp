#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "voltsim/errors.hpp"
#include "voltsim/platform.hpp"

using namespace voltsim;

TEST(Platform, BuiltInProfilesValidate) {
  for (const char* name : {"vc707", "kc705"}) {
    const PlatformProfile p = MakePlatformProfile(name);
    EXPECT_NO_THROW(p.Validate());
    EXPECT_EQ(p.v_nom_mv(), 1000);
    EXPECT_EQ(p.v_min_mv(), 610);
    EXPECT_EQ(p.v_crash_mv(), 540);
    EXPECT_EQ(p.num_steps(), 7);
  }
  EXPECT_EQ(MakePlatformProfile("vc707").num_brams, 2060);
  EXPECT_EQ(MakePlatformProfile("kc705").num_brams, 890);
}

TEST(Platform, UnknownProfileRejected) {
  EXPECT_THROW(MakePlatformProfile("zc706"), InvalidInput);
}

TEST(Platform, GridRunsFromVminToVcrash) {
  const VoltageGrid g(MakePlatformProfile("vc707"));
  const std::vector<int> want = {610, 600, 590, 580, 570, 560, 550, 540};
  EXPECT_EQ(g.levels_mv(), want);
  EXPECT_TRUE(g.Contains(560));
  EXPECT_FALSE(g.Contains(565));
  EXPECT_EQ(g.levels_mv()[static_cast<std::size_t>(g.NearestIndex(556.0))], 560);
}

TEST(Platform, GrowthFactorFromRatePerMbit) {
  const PlatformProfile p = MakePlatformProfile("vc707");
  EXPECT_NEAR(p.growth_per_step(), std::pow(652.0, 1.0 / 7.0), 1e-12);
}

TEST(Platform, ExpectedRateEndpoints) {
  const PlatformProfile p = MakePlatformProfile("vc707");
  EXPECT_NEAR(ExpectedRate(p, 0.54, 50, 1.0), 652.0, 1e-9);
  EXPECT_EQ(ExpectedRate(p, 0.61, 50, 1.0), 0.0);
  EXPECT_EQ(ExpectedRate(p, 0.80, 50, 1.0), 0.0);
  EXPECT_NEAR(ExpectedRate(p, 0.54, 50, 1.1), 652.0 * 1.1, 1e-9);
  EXPECT_THROW(ExpectedRate(p, 0.53, 50, 1.0), CrashRegion);
  EXPECT_THROW(ExpectedRate(p, 0.55, 10, 1.0), InvalidInput);
}

TEST(Platform, ExpectedRateMonotoneOnGrid) {
  const PlatformProfile p = MakePlatformProfile("kc705");
  double prev = -1;
  for (int mv = 610; mv >= 540; mv -= 10) {
    const double r = ExpectedRate(p, mv / 1000.0, 50, 1.0);
    EXPECT_GE(r, prev);
    prev = r;
  }
}

TEST(Platform, TemperatureFactor) {
  const PlatformProfile p = MakePlatformProfile("vc707");
  EXPECT_DOUBLE_EQ(LinearTemperatureFactor(p, 50), 1.0);
  EXPECT_LE(LinearTemperatureFactor(p, 80), 1.0 / 3.0);
  EXPECT_GE(LinearTemperatureFactor(p, 100), 0.0);
}

TEST(Platform, CumulativeFractionEndsAtOne) {
  const PlatformProfile p = MakePlatformProfile("vc707");
  EXPECT_NEAR(p.CumulativeFraction(0), 1.0, 1e-12);
  for (int k = 1; k < p.num_steps(); ++k) {
    EXPECT_LT(p.CumulativeFraction(k), p.CumulativeFraction(k - 1));
  }
}

TEST(Platform, JsonRoundTrip) {
  const PlatformProfile p = MakePlatformProfile("kc705");
  const PlatformProfile q = ProfileFromJson(ProfileToJson(p));
  EXPECT_EQ(ProfileToJson(q), ProfileToJson(p));
}

TEST(Platform, FileOverridesBase) {
  const std::string path = testing::TempDir() + "profile_override.json";
  {
    std::ofstream out(path);
    out << R"({"base": "vc707", "name": "custom", "rate_at_crash": 500})";
  }
  const PlatformProfile p = MakePlatformProfile(path);
  EXPECT_EQ(p.name, "custom");
  EXPECT_EQ(p.rate_at_crash, 500);
  EXPECT_EQ(p.num_brams, 2060);
  std::remove(path.c_str());
}

TEST(Platform, InvariantViolationsRejected) {
  PlatformProfile p = MakePlatformProfile("vc707");
  p.cluster_shares = {0.5, 0.3, 0.1};
  EXPECT_THROW(p.Validate(), InvalidInput);
  p = MakePlatformProfile("vc707");
  p.v_min = 0.615;
  EXPECT_THROW(p.Validate(), InvalidInput);
  p = MakePlatformProfile("vc707");
  p.stuck_at_1_fraction = 0.02;
  EXPECT_THROW(p.Validate(), InvalidInput);
}
