#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace voltsim {

enum class VulnClass : std::uint8_t { kLow = 0, kMid = 1, kHigh = 2 };

const char* ToString(VulnClass c);
VulnClass VulnClassFromString(const std::string& s);

enum class TempMode : std::uint8_t { kLinear, kEquivalentVoltage };

struct PowerPoint {
  double volts = 0;
  double watts = 0;
  bool ecc_on = false;
};

// Calibration constants of one FPGA family.
struct PlatformProfile {
  std::string name;
  int num_brams = 0;
  int bram_rows = 1024;
  int bram_cols = 16;

  double v_nom = 1.00;
  double v_min = 0.61;
  double v_crash = 0.54;
  double v_step = 0.010;

  // Faults per Mbit (2^20 bits) at v_crash with an all-ones pattern.
  double rate_at_crash = 0;
  // Optional per-level override, faults/Mbit for the grid levels strictly
  // below v_min, ordered from v_min - v_step down to v_crash.
  std::vector<double> level_rates;

  // Indexed by VulnClass.
  std::array<double, 3> cluster_shares{};
  // Mean fault fraction of a BRAM in each class at v_crash.
  std::array<double, 3> cluster_mean_rates{};
  double zero_fault_bram_fraction = 0;
  double stuck_at_1_fraction = 0.001;

  // Per-run equivalent-voltage noise, volts.
  double run_jitter_sigma = 0;

  double temp_ref = 50;
  double temp_slope = 1.0 / 45.0;
  TempMode temp_mode = TempMode::kLinear;
  double temp_volts_per_c = 0.0004;

  std::vector<PowerPoint> power_points;

  int v_nom_mv() const;
  int v_min_mv() const;
  int v_crash_mv() const;
  int v_step_mv() const;

  // Grid steps between v_crash and v_min.
  int num_steps() const;
  // Per-step multiplicative growth of the fault rate.
  double growth_per_step() const;
  double total_mbit() const;
  std::int64_t bits_per_bram() const {
    return static_cast<std::int64_t>(bram_rows) * bram_cols;
  }

  // Cumulative fraction of the v_crash fault population that is already
  // faulty `steps_above_crash` grid steps above v_crash. 1 at v_crash, 0 at v_min.
  double CumulativeFraction(int steps_above_crash) const;

  // Throws InvalidInput describing the first violated invariant.
  void Validate() const;
};

// "vc707", "kc705", or a path to a JSON profile file.
PlatformProfile MakePlatformProfile(const std::string& name_or_path);

PlatformProfile ProfileFromJson(const std::string& text);
std::string ProfileToJson(const PlatformProfile& profile);

// Levels from v_min down to v_crash, in millivolts.
class VoltageGrid {
 public:
  explicit VoltageGrid(const PlatformProfile& profile);
  VoltageGrid(int v_min_mv, int v_crash_mv, int step_mv);

  const std::vector<int>& levels_mv() const& { return levels_; }
  std::vector<int> levels_mv() && { return std::move(levels_); }
  std::size_t size() const { return levels_.size(); }
  bool Contains(int mv) const;
  // Index of the level at or closest to `mv`.
  int NearestIndex(double mv) const;

 private:
  std::vector<int> levels_;
};

// Faults per Mbit expected at (voltage, temperature) on a die scaled by
// chip_scale. Throws CrashRegion below v_crash and InvalidInput outside
// [20, 100] degC or above v_nom.
double ExpectedRate(const PlatformProfile& profile, double volts,
                    double temperature_c, double chip_scale = 1.0);

// Multiplicative thermal factor applied to fault rates in linear mode.
double LinearTemperatureFactor(const PlatformProfile& profile, double temperature_c);

}  // namespace voltsim
