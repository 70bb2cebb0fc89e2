#include "voltsim/platform.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "voltsim/errors.hpp"

namespace voltsim {
namespace {

using nlohmann::ordered_json;

int ToMillivolts(double volts) { return static_cast<int>(std::lround(volts * 1000.0)); }

PlatformProfile Vc707() {
  PlatformProfile p;
  p.name = "vc707";
  p.num_brams = 2060;
  p.rate_at_crash = 652;
  // Published shares sum to 99.8%; the rounding residual goes to the low class.
  p.cluster_shares = {0.888, 0.094, 0.018};
  p.cluster_mean_rates = {0.0002, 0.0024, 0.0086};
  p.zero_fault_bram_fraction = 0.389;
  // Relative run-to-run std of 7.3/652 at v_crash; jitter only acts upward
  // there (no cells exist below v_crash), hence the half-normal correction.
  p.run_jitter_sigma = 0.000207;
  p.power_points = {{1.00, 2.4, false}, {0.61, 0.31, false},
                    {0.54, 0.198, false}, {0.54, 0.211, true}};
  return p;
}

PlatformProfile Kc705() {
  PlatformProfile p;
  p.name = "kc705";
  p.num_brams = 890;
  p.rate_at_crash = 254;
  p.cluster_shares = {0.934, 0.057, 0.009};
  p.cluster_mean_rates = {0.0001, 0.0017, 0.0074};
  p.zero_fault_bram_fraction = 0.452;
  p.run_jitter_sigma = 0.000409;
  // No published points for this board; the VC707 curve scaled by BRAM count.
  const double r = 890.0 / 2060.0;
  p.power_points = {{1.00, 2.4 * r, false}, {0.61, 0.31 * r, false},
                    {0.54, 0.198 * r, false}, {0.54, 0.211 * r, true}};
  return p;
}

template <typename T>
void ReadOptional(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

const char* ToString(VulnClass c) {
  switch (c) {
    case VulnClass::kLow: return "low";
    case VulnClass::kMid: return "mid";
    case VulnClass::kHigh: return "high";
  }
  return "?";
}

VulnClass VulnClassFromString(const std::string& s) {
  if (s == "low") return VulnClass::kLow;
  if (s == "mid") return VulnClass::kMid;
  if (s == "high") return VulnClass::kHigh;
  throw InvalidInput("unknown vulnerability class '" + s + "'");
}

int PlatformProfile::v_nom_mv() const { return ToMillivolts(v_nom); }
int PlatformProfile::v_min_mv() const { return ToMillivolts(v_min); }
int PlatformProfile::v_crash_mv() const { return ToMillivolts(v_crash); }
int PlatformProfile::v_step_mv() const { return ToMillivolts(v_step); }

int PlatformProfile::num_steps() const {
  return (v_min_mv() - v_crash_mv()) / v_step_mv();
}

double PlatformProfile::growth_per_step() const {
  return std::pow(rate_at_crash, 1.0 / num_steps());
}

double PlatformProfile::total_mbit() const {
  return static_cast<double>(num_brams) * static_cast<double>(bits_per_bram()) /
         static_cast<double>(1 << 20);
}

double PlatformProfile::CumulativeFraction(int k) const {
  const int steps = num_steps();
  if (k <= 0) return 1.0;
  if (k >= steps) return 0.0;
  if (!level_rates.empty()) {
    return level_rates[static_cast<std::size_t>(steps - 1 - k)] / rate_at_crash;
  }
  const double g = growth_per_step();
  const double floor = std::pow(g, -steps);
  return (std::pow(g, -k) - floor) / (1.0 - floor);
}

void PlatformProfile::Validate() const {
  auto fail = [this](const std::string& what) {
    throw InvalidInput("profile '" + name + "': " + what);
  };
  if (num_brams <= 0 || bram_rows <= 0 || bram_cols <= 0) fail("geometry must be positive");
  if (bram_cols > 16) fail("at most 16 columns per BRAM are supported");
  if (!(v_crash < v_min && v_min < v_nom)) fail("require v_crash < v_min < v_nom");
  if (!(v_step > 0)) fail("v_step must be positive");
  const double steps = (v_min - v_crash) / v_step;
  if (std::abs(steps - std::round(steps)) > 1e-6 || std::round(steps) < 1) {
    fail("v_min - v_crash must be a positive multiple of v_step");
  }
  double sum = 0;
  for (double s : cluster_shares) {
    if (s < 0) fail("cluster shares must be non-negative");
    sum += s;
  }
  if (std::abs(sum - 1.0) > 1e-9) fail("cluster shares must sum to 1");
  for (double r : cluster_mean_rates) {
    if (r < 0) fail("cluster mean rates must be non-negative");
  }
  if (!(rate_at_crash > 0)) fail("rate_at_crash must be positive");
  if (stuck_at_1_fraction < 0 || stuck_at_1_fraction > 0.01) {
    fail("stuck_at_1_fraction must lie in [0, 0.01]");
  }
  if (zero_fault_bram_fraction < 0 || zero_fault_bram_fraction > cluster_shares[0]) {
    fail("zero_fault_bram_fraction must lie in [0, low-class share]");
  }
  if (run_jitter_sigma < 0) fail("run_jitter_sigma must be non-negative");
  if (!level_rates.empty()) {
    if (static_cast<int>(level_rates.size()) != num_steps()) {
      fail("level_rates needs one entry per level below v_min");
    }
    for (std::size_t i = 1; i < level_rates.size(); ++i) {
      if (level_rates[i] < level_rates[i - 1]) fail("level_rates must not decrease as voltage drops");
    }
    if (std::abs(level_rates.back() - rate_at_crash) > 1e-9 * rate_at_crash) {
      fail("last level rate must equal rate_at_crash");
    }
    if (!(level_rates.front() > 0)) fail("level rates must be positive");
  }
  for (const auto& pp : power_points) {
    if (!(pp.watts > 0)) fail("power points need positive watts");
  }
}

PlatformProfile MakePlatformProfile(const std::string& name_or_path) {
  std::string lower = name_or_path;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  PlatformProfile p;
  if (lower == "vc707") {
    p = Vc707();
  } else if (lower == "kc705") {
    p = Kc705();
  } else if (std::filesystem::is_regular_file(name_or_path)) {
    std::ifstream in(name_or_path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    p = ProfileFromJson(ss.str());
  } else {
    throw InvalidInput("unknown platform '" + name_or_path + "'");
  }
  p.Validate();
  return p;
}

PlatformProfile ProfileFromJson(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed profile: ") + e.what(), e.byte);
  }
  PlatformProfile p;
  try {
    // A profile may start from a built-in and override selected fields.
    if (j.contains("base")) p = MakePlatformProfile(j.at("base").get<std::string>());
    ReadOptional(j, "name", p.name);
    ReadOptional(j, "num_brams", p.num_brams);
    ReadOptional(j, "bram_rows", p.bram_rows);
    ReadOptional(j, "bram_cols", p.bram_cols);
    ReadOptional(j, "v_nom", p.v_nom);
    ReadOptional(j, "v_min", p.v_min);
    ReadOptional(j, "v_crash", p.v_crash);
    ReadOptional(j, "v_step", p.v_step);
    ReadOptional(j, "rate_at_crash", p.rate_at_crash);
    ReadOptional(j, "level_rates", p.level_rates);
    ReadOptional(j, "cluster_shares", p.cluster_shares);
    ReadOptional(j, "cluster_mean_rates", p.cluster_mean_rates);
    ReadOptional(j, "zero_fault_bram_fraction", p.zero_fault_bram_fraction);
    ReadOptional(j, "stuck_at_1_fraction", p.stuck_at_1_fraction);
    ReadOptional(j, "run_jitter_sigma", p.run_jitter_sigma);
    ReadOptional(j, "temp_ref", p.temp_ref);
    ReadOptional(j, "temp_slope", p.temp_slope);
    ReadOptional(j, "temp_volts_per_c", p.temp_volts_per_c);
    if (j.contains("temp_mode")) {
      const auto mode = j.at("temp_mode").get<std::string>();
      if (mode == "linear") {
        p.temp_mode = TempMode::kLinear;
      } else if (mode == "equivalent_voltage") {
        p.temp_mode = TempMode::kEquivalentVoltage;
      } else {
        throw InvalidInput("unknown temp_mode '" + mode + "'");
      }
    }
    if (j.contains("power_points")) {
      p.power_points.clear();
      for (const auto& e : j.at("power_points")) {
        p.power_points.push_back(
            {e.at("volts").get<double>(), e.at("watts").get<double>(), e.at("ecc").get<bool>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed profile: ") + e.what());
  }
  p.Validate();
  return p;
}

std::string ProfileToJson(const PlatformProfile& p) {
  ordered_json j;
  j["name"] = p.name;
  j["num_brams"] = p.num_brams;
  j["bram_rows"] = p.bram_rows;
  j["bram_cols"] = p.bram_cols;
  j["v_nom"] = p.v_nom;
  j["v_min"] = p.v_min;
  j["v_crash"] = p.v_crash;
  j["v_step"] = p.v_step;
  j["rate_at_crash"] = p.rate_at_crash;
  if (!p.level_rates.empty()) j["level_rates"] = p.level_rates;
  j["cluster_shares"] = p.cluster_shares;
  j["cluster_mean_rates"] = p.cluster_mean_rates;
  j["zero_fault_bram_fraction"] = p.zero_fault_bram_fraction;
  j["stuck_at_1_fraction"] = p.stuck_at_1_fraction;
  j["run_jitter_sigma"] = p.run_jitter_sigma;
  j["temp_ref"] = p.temp_ref;
  j["temp_slope"] = p.temp_slope;
  j["temp_mode"] = p.temp_mode == TempMode::kLinear ? "linear" : "equivalent_voltage";
  j["temp_volts_per_c"] = p.temp_volts_per_c;
  ordered_json pts = ordered_json::array();
  for (const auto& pp : p.power_points) {
    ordered_json e;
    e["volts"] = pp.volts;
    e["watts"] = pp.watts;
    e["ecc"] = pp.ecc_on;
    pts.push_back(e);
  }
  j["power_points"] = pts;
  return j.dump();
}

VoltageGrid::VoltageGrid(const PlatformProfile& profile)
    : VoltageGrid(profile.v_min_mv(), profile.v_crash_mv(), profile.v_step_mv()) {}

VoltageGrid::VoltageGrid(int v_min_mv, int v_crash_mv, int step_mv) {
  if (step_mv <= 0 || v_crash_mv >= v_min_mv || (v_min_mv - v_crash_mv) % step_mv != 0) {
    throw InvalidInput("voltage grid requires v_crash < v_min spaced by a positive step");
  }
  for (int mv = v_min_mv; mv >= v_crash_mv; mv -= step_mv) levels_.push_back(mv);
}

bool VoltageGrid::Contains(int mv) const {
  return std::find(levels_.begin(), levels_.end(), mv) != levels_.end();
}

int VoltageGrid::NearestIndex(double mv) const {
  int best = 0;
  for (int i = 1; i < static_cast<int>(levels_.size()); ++i) {
    if (std::abs(levels_[i] - mv) < std::abs(levels_[best] - mv)) best = i;
  }
  return best;
}

double LinearTemperatureFactor(const PlatformProfile& profile, double temperature_c) {
  return std::max(0.0, 1.0 - profile.temp_slope * (temperature_c - profile.temp_ref));
}

double ExpectedRate(const PlatformProfile& profile, double volts, double temperature_c,
                    double chip_scale) {
  if (temperature_c < 20.0 || temperature_c > 100.0) {
    throw InvalidInput("temperature must lie in [20, 100] degC");
  }
  if (!(chip_scale > 0)) throw InvalidInput("chip_scale must be positive");
  if (volts > profile.v_nom + 1e-12) throw InvalidInput("voltage above v_nom");
  if (volts < profile.v_crash - 1e-12) {
    throw CrashRegion("voltage " + std::to_string(volts) + " V is below v_crash");
  }
  double v = volts;
  double thermal = 1.0;
  if (profile.temp_mode == TempMode::kLinear) {
    thermal = LinearTemperatureFactor(profile, temperature_c);
  } else {
    v += profile.temp_volts_per_c * (temperature_c - profile.temp_ref);
  }
  if (v >= profile.v_min - 1e-12 || volts >= profile.v_min - 1e-12) return 0.0;
  v = std::max(v, profile.v_crash);
  const double steps_above = (v - profile.v_crash) / profile.v_step;
  double shape;
  if (profile.level_rates.empty()) {
    shape = std::pow(profile.growth_per_step(), -steps_above);
  } else {
    // Geometric interpolation between tabulated levels.
    const int n = profile.num_steps();
    auto at = [&](int k) {  // k steps above crash, k in [0, n-1]
      return profile.level_rates[static_cast<std::size_t>(n - 1 - k)] / profile.rate_at_crash;
    };
    const int lo = std::min(static_cast<int>(std::floor(steps_above)), n - 1);
    const double frac = steps_above - lo;
    if (lo >= n - 1) {
      shape = at(n - 1) * std::pow(profile.growth_per_step(), -frac);
    } else {
      shape = at(lo) * std::pow(at(lo + 1) / at(lo), frac);
    }
  }
  return profile.rate_at_crash * shape * chip_scale * thermal;
}

}  // namespace voltsim
