#include "voltsim/power_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "voltsim/errors.hpp"

namespace voltsim {

PowerCurve::PowerCurve(std::vector<PowerPoint> points, double v_crash, double v_nom)
    : points_(std::move(points)), v_crash_(v_crash), v_nom_(v_nom) {
  std::vector<PowerPoint> off;
  for (const auto& p : points_) {
    if (!(p.watts > 0)) throw InvalidInput("power points need positive watts");
    if (!p.ecc_on) off.push_back(p);
  }
  std::sort(off.begin(), off.end(),
            [](const PowerPoint& a, const PowerPoint& b) { return a.volts < b.volts; });
  if (off.size() < 2) throw InvalidInput("power curve needs at least two ECC-off points");
  for (std::size_t i = 0; i < off.size(); ++i) {
    if (i && off[i].volts <= off[i - 1].volts) throw InvalidInput("duplicate power point voltage");
    if (i && off[i].watts < off[i - 1].watts) {
      throw InvalidInput("power must not decrease with voltage");
    }
    xs_.push_back(off[i].volts);
    ys_.push_back(off[i].watts);
  }

  const std::size_t n = xs_.size();
  std::vector<double> h(n - 1), delta(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    h[i] = xs_[i + 1] - xs_[i];
    delta[i] = (ys_[i + 1] - ys_[i]) / h[i];
  }
  slopes_.assign(n, 0.0);
  if (n == 2) {
    slopes_[0] = slopes_[1] = delta[0];
  } else {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (delta[i - 1] * delta[i] > 0) {
        const double w1 = 2 * h[i] + h[i - 1];
        const double w2 = h[i] + 2 * h[i - 1];
        slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
      }
    }
    auto end_slope = [](double h0, double h1, double d0, double d1) {
      double d = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (d * d0 <= 0) return 0.0;
      if (d0 * d1 <= 0 && std::abs(d) > std::abs(3 * d0)) return 3 * d0;
      return d;
    };
    slopes_[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    slopes_[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
  }

  for (const auto& p : points_) {
    if (!p.ecc_on) continue;
    if (p.volts < xs_.front() - 1e-12 || p.volts > xs_.back() + 1e-12) {
      throw InvalidInput("ECC power point outside the calibrated range");
    }
    ecc_ratios_.emplace_back(p.volts, p.watts / Baseline(p.volts));
  }
  std::sort(ecc_ratios_.begin(), ecc_ratios_.end());
}

PowerCurve PowerCurve::FromProfile(const PlatformProfile& profile) {
  return PowerCurve(profile.power_points, profile.v_crash, profile.v_nom);
}

double PowerCurve::Baseline(double v) const {
  const std::size_t n = xs_.size();
  if (v <= xs_.front()) return ys_.front() + slopes_.front() * (v - xs_.front());
  if (v >= xs_.back()) return ys_.back() + slopes_.back() * (v - xs_.back());
  std::size_t i = static_cast<std::size_t>(
      std::upper_bound(xs_.begin(), xs_.end(), v) - xs_.begin() - 1);
  i = std::min(i, n - 2);
  const double h = xs_[i + 1] - xs_[i];
  const double t = (v - xs_[i]) / h;
  const double t2 = t * t, t3 = t2 * t;
  const double h00 = 2 * t3 - 3 * t2 + 1;
  const double h10 = t3 - 2 * t2 + t;
  const double h01 = -2 * t3 + 3 * t2;
  const double h11 = t3 - t2;
  return h00 * ys_[i] + h10 * h * slopes_[i] + h01 * ys_[i + 1] + h11 * h * slopes_[i + 1];
}

double PowerCurve::EccRatio(double v) const {
  if (ecc_ratios_.empty()) return 1.0;
  if (v <= ecc_ratios_.front().first) return ecc_ratios_.front().second;
  if (v >= ecc_ratios_.back().first) return ecc_ratios_.back().second;
  for (std::size_t i = 0; i + 1 < ecc_ratios_.size(); ++i) {
    const auto [x0, r0] = ecc_ratios_[i];
    const auto [x1, r1] = ecc_ratios_[i + 1];
    if (v <= x1) return r0 + (r1 - r0) * (v - x0) / (x1 - x0);
  }
  return ecc_ratios_.back().second;
}

bool PowerCurve::EccExtrapolated(double volts) const {
  for (const auto& [v, r] : ecc_ratios_) {
    if (std::abs(v - volts) < 1e-9) return false;
  }
  return true;
}

double PowerCurve::Power(double volts, bool ecc_on, double scale) const {
  if (volts < v_crash_ - 1e-12 || volts > v_nom_ + 1e-12) {
    throw InvalidInput("voltage " + std::to_string(volts) + " V outside [v_crash, v_nom]");
  }
  if (!(scale > 0)) throw InvalidInput("power scale must be positive");
  const double base = Baseline(volts);
  return (ecc_on ? base * EccRatio(volts) : base) * scale;
}

double BramPower(const PowerCurve& curve, double volts, bool ecc_on, double scale) {
  return curve.Power(volts, ecc_on, scale);
}

double SavingFraction(const PowerCurve& curve, double v_ref, double v, bool ecc_on) {
  if (v > v_ref + 1e-12) throw InvalidInput("saving requires v <= v_ref");
  return 1.0 - curve.Power(v, ecc_on) / curve.Power(v_ref, ecc_on);
}

PowerCurve ReadPowerCurve(std::istream& in, double v_crash, double v_nom) {
  std::vector<PowerPoint> pts;
  std::string line;
  std::size_t offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const std::size_t start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line != "mv,mw,ecc") throw ParseError("power curve header must be 'mv,mw,ecc'", start);
      continue;
    }
    std::istringstream ss(line);
    long mv = 0, mw = 0, ecc = 0;
    char c1 = 0, c2 = 0;
    if (!(ss >> mv >> c1 >> mw >> c2 >> ecc) || c1 != ',' || c2 != ',' || (ecc != 0 && ecc != 1)) {
      throw ParseError("malformed power curve line '" + line + "'", start);
    }
    pts.push_back({static_cast<double>(mv) / 1000.0, static_cast<double>(mw) / 1000.0, ecc == 1});
  }
  return PowerCurve(std::move(pts), v_crash, v_nom);
}

void WritePowerCurve(std::ostream& out, const PowerCurve& curve) {
  out << "mv,mw,ecc\n";
  for (const auto& p : curve.points()) {
    out << std::lround(p.volts * 1000) << ',' << std::lround(p.watts * 1000) << ','
        << (p.ecc_on ? 1 : 0) << '\n';
  }
}

}  // namespace voltsim
