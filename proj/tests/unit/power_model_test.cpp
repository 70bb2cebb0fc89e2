#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "voltsim/errors.hpp"
#include "voltsim/power_model.hpp"

using namespace voltsim;

namespace {

// Fritsch-Carlson monotone cubic over sorted knots.
double PchipOracle(const std::vector<double>& x, const std::vector<double>& y, double v) {
  const std::size_t n = x.size();
  std::vector<double> h(n - 1), d(n - 1), m(n);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = x[i + 1] - x[i];
    d[i] = (y[i + 1] - y[i]) / h[i];
  }
  // Three-point end slopes, clipped to keep the ends monotone.
  auto end = [](double h0, double h1, double d0, double d1) {
    double m0 = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m0 * d0 <= 0) return 0.0;
    if (d0 * d1 <= 0 && std::abs(m0) > std::abs(3 * d0)) return 3 * d0;
    return m0;
  };
  if (n > 2) {
    m[0] = end(h[0], h[1], d[0], d[1]);
    m[n - 1] = end(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
  }
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (d[i - 1] * d[i] <= 0) {
      m[i] = 0;
    } else {
      const double w1 = 2 * h[i] + h[i - 1], w2 = h[i] + 2 * h[i - 1];
      m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
    }
  }
  if (n == 2) m[0] = m[1] = d[0];
  std::size_t k = 0;
  while (k + 2 < n && v > x[k + 1]) ++k;
  const double t = (v - x[k]) / h[k];
  const double h00 = 2 * t * t * t - 3 * t * t + 1, h10 = t * t * t - 2 * t * t + t;
  const double h01 = -2 * t * t * t + 3 * t * t, h11 = t * t * t - t * t;
  return h00 * y[k] + h10 * h[k] * m[k] + h01 * y[k + 1] + h11 * h[k] * m[k + 1];
}

PowerCurve Vc707Curve() { return PowerCurve::FromProfile(MakePlatformProfile("vc707")); }

}  // namespace

TEST(Power, HitsCalibrationPoints) {
  const auto c = Vc707Curve();
  EXPECT_NEAR(c.Power(1.00, false), 2.4, 1e-12);
  EXPECT_NEAR(c.Power(0.61, false), 0.31, 1e-12);
  EXPECT_NEAR(c.Power(0.54, false), 0.198, 1e-12);
  EXPECT_NEAR(c.Power(0.54, true), 0.211, 1e-12);
  EXPECT_FALSE(c.EccExtrapolated(0.54));
  EXPECT_TRUE(c.EccExtrapolated(0.60));
}

TEST(Power, SavingBelowGuardband) {
  const auto c = Vc707Curve();
  EXPECT_NEAR(SavingFraction(c, 0.61, 0.54, false), 0.361, 0.001);
  EXPECT_GT(SavingFraction(c, 1.00, 0.61, false), 0.85);
  EXPECT_THROW(SavingFraction(c, 0.54, 0.61, false), InvalidInput);
}

TEST(Power, MonotoneInVoltage) {
  const auto c = Vc707Curve();
  double prev = 0;
  for (int mv = 540; mv <= 1000; mv += 5) {
    const double p = c.Power(mv / 1000.0, false);
    EXPECT_GT(p, prev) << mv;
    EXPECT_GT(c.Power(mv / 1000.0, true), p);
    prev = p;
  }
}

TEST(Power, MatchesIndependentPchip) {
  const auto c = Vc707Curve();
  const std::vector<double> x = {0.54, 0.61, 1.00}, y = {0.198, 0.31, 2.4};
  for (int mv = 540; mv <= 1000; mv += 7) {
    EXPECT_NEAR(c.Power(mv / 1000.0, false), PchipOracle(x, y, mv / 1000.0), 1e-9) << mv;
  }
}

TEST(Power, EccOverheadRatioCarriesOver) {
  const auto c = Vc707Curve();
  const double ratio = 0.211 / 0.198;
  EXPECT_NEAR(c.Power(0.58, true) / c.Power(0.58, false), ratio, 1e-9);
  EXPECT_NEAR(c.Power(0.80, true, 2.0), 2.0 * c.Power(0.80, true), 1e-12);
}

TEST(Power, OutOfRangeRejected) {
  const auto c = Vc707Curve();
  EXPECT_THROW(c.Power(0.53, false), InvalidInput);
  EXPECT_THROW(c.Power(1.01, false), InvalidInput);
}

TEST(Power, CurveFileRoundTrip) {
  const auto c = Vc707Curve();
  std::stringstream ss;
  WritePowerCurve(ss, c);
  const auto back = ReadPowerCurve(ss, 0.54, 1.00);
  EXPECT_NEAR(back.Power(0.57, false), c.Power(0.57, false), 1e-9);
  std::istringstream bad("mv,mw,ecc\n540,abc,0\n");
  EXPECT_THROW(ReadPowerCurve(bad, 0.54, 1.00), Error);
}
