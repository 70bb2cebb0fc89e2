#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "voltsim/platform.hpp"

namespace voltsim {

// BRAM rail power over supply voltage, interpolating calibration points with
// a shape-preserving (Fritsch-Carlson) cubic.
class PowerCurve {
 public:
  PowerCurve(std::vector<PowerPoint> points, double v_crash, double v_nom);
  static PowerCurve FromProfile(const PlatformProfile& profile);

  // Throws InvalidInput outside [v_crash, v_nom].
  double Power(double volts, bool ecc_on, double scale = 1.0) const;
  // True when the ECC figure at this voltage comes from a relative overhead
  // carried over from another voltage rather than a calibration point.
  bool EccExtrapolated(double volts) const;

  const std::vector<PowerPoint>& points() const { return points_; }
  double v_crash() const { return v_crash_; }
  double v_nom() const { return v_nom_; }

 private:
  double Baseline(double volts) const;
  double EccRatio(double volts) const;

  std::vector<PowerPoint> points_;
  std::vector<double> xs_, ys_, slopes_;
  // (volts, power_on / power_off) at each ECC calibration point.
  std::vector<std::pair<double, double>> ecc_ratios_;
  double v_crash_;
  double v_nom_;
};

double BramPower(const PowerCurve& curve, double volts, bool ecc_on, double scale = 1.0);

// 1 - P(v) / P(v_ref); throws InvalidInput unless v <= v_ref.
double SavingFraction(const PowerCurve& curve, double v_ref, double v, bool ecc_on);

// Curve file: header `mv,mw,ecc` then one integer triple per line.
PowerCurve ReadPowerCurve(std::istream& in, double v_crash, double v_nom);
void WritePowerCurve(std::ostream& out, const PowerCurve& curve);

}  // namespace voltsim
