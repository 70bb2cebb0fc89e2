#include "voltsim/fault_map.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "voltsim/errors.hpp"
#include "voltsim/rng.hpp"

namespace voltsim {
namespace {

enum Tag : std::uint64_t {
  kTagBram = 0x4252414d,
  kTagRound = 0x524e4444,
  kTagPhi = 0x50484949,
  kTagTemp = 0x54454d50,
  kTagJitter = 0x4a495454,
};

// Probabilities of 1, 2 and 3 vulnerable columns in a faulty BRAM.
constexpr double kOneColumn = 0.80;
constexpr double kTwoColumns = 0.17;

// Shape parameters of the gamma-distributed fault counts (CV = 1/sqrt(shape)).
constexpr double kMidShape = 16.0;
constexpr double kHighShape = 6.0;

std::vector<int> PickColumns(rng::Stream& s, int total_cols) {
  const double u = s.Uniform();
  int n = u < kOneColumn ? 1 : (u < kOneColumn + kTwoColumns ? 2 : 3);
  n = std::min(n, total_cols);
  std::vector<int> cols;
  while (static_cast<int>(cols.size()) < n) {
    const int c = static_cast<int>(s.Below(static_cast<std::uint64_t>(total_cols)));
    if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

// Floyd's sampling of `k` distinct values from [0, n).
std::vector<std::int64_t> SampleDistinct(rng::Stream& s, std::int64_t n, std::int64_t k) {
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> out;
  out.reserve(static_cast<std::size_t>(k));
  for (std::int64_t j = n - k; j < n; ++j) {
    const auto t = static_cast<std::int64_t>(s.Below(static_cast<std::uint64_t>(j + 1)));
    const std::int64_t pick = taken[static_cast<std::size_t>(t)] ? j : t;
    taken[static_cast<std::size_t>(pick)] = 1;
    out.push_back(pick);
  }
  return out;
}

}  // namespace

std::size_t FaultVariationMap::total_cells() const {
  std::size_t n = 0;
  for (const auto& b : brams) n += b.cells.size();
  return n;
}

std::size_t FaultVariationMap::CountAt(int voltage_mv) const {
  std::size_t n = 0;
  for (const auto& b : brams) {
    for (const auto& c : b.cells) n += c.onset_mv >= voltage_mv ? 1 : 0;
  }
  return n;
}

FaultVariationMap GenerateFvm(const PlatformProfile& profile, std::uint64_t chip_seed,
                              double chip_scale) {
  profile.Validate();
  if (!(chip_scale > 0)) throw InvalidInput("chip_scale must be positive");

  const int n = profile.num_brams;
  const std::int64_t bits = profile.bits_per_bram();
  const double target_total = profile.rate_at_crash * profile.total_mbit() * chip_scale;

  // Published shares are rounded, so they are renormalized here.
  std::array<double, 3> shares = profile.cluster_shares;
  const double share_sum = shares[0] + shares[1] + shares[2];
  for (auto& sh : shares) sh /= share_sum;

  // Class means in cells, rescaled so the chip-wide mean hits the rate.
  std::array<double, 3> mean_cells{};
  double weighted = 0;
  for (int c = 0; c < 3; ++c) {
    mean_cells[c] = profile.cluster_mean_rates[c] * static_cast<double>(bits);
    weighted += shares[c] * mean_cells[c];
  }
  const double per_bram = target_total / n;
  for (auto& m : mean_cells) m *= weighted > 0 ? per_bram / weighted : 0.0;

  const double low_share = shares[0];
  const double zero_prob = low_share > 0 ? profile.zero_fault_bram_fraction / low_share : 0.0;
  const double low_nonzero_mean = zero_prob < 1.0 ? mean_cells[0] / (1.0 - zero_prob) : 0.0;

  FaultVariationMap fvm;
  fvm.profile = profile;
  fvm.chip_seed = chip_seed;
  fvm.chip_scale = chip_scale;
  fvm.brams.resize(static_cast<std::size_t>(n));

  std::vector<double> counts(static_cast<std::size_t>(n), 0.0);
  std::vector<std::vector<int>> cols(static_cast<std::size_t>(n));
  double raw_total = 0;
  for (int b = 0; b < n; ++b) {
    rng::Stream s(rng::Derive({chip_seed, kTagBram, static_cast<std::uint64_t>(b)}));
    const double u = s.Uniform();
    VulnClass cls = VulnClass::kHigh;
    if (u < shares[0]) {
      cls = VulnClass::kLow;
    } else if (u < shares[0] + shares[1]) {
      cls = VulnClass::kMid;
    }
    double count = 0;
    switch (cls) {
      case VulnClass::kLow:
        if (s.Uniform() >= zero_prob && low_nonzero_mean > 0) {
          count = static_cast<double>(s.GeometricPositive(low_nonzero_mean));
        }
        break;
      case VulnClass::kMid:
        count = std::max(1.0, std::round(s.Gamma(kMidShape, mean_cells[1] / kMidShape)));
        break;
      case VulnClass::kHigh:
        count = std::max(1.0, std::round(s.Gamma(kHighShape, mean_cells[2] / kHighShape)));
        break;
    }
    fvm.brams[static_cast<std::size_t>(b)].vuln_class = cls;
    if (count > 0) cols[static_cast<std::size_t>(b)] = PickColumns(s, profile.bram_cols);
    counts[static_cast<std::size_t>(b)] = count;
    raw_total += count;
  }

  // Pin the chip total to the calibrated rate; the die-to-die spread is
  // expressed through chip_scale instead of sampling noise.
  const double factor = raw_total > 0 ? target_total / raw_total : 0.0;

  std::vector<double> level_fraction(static_cast<std::size_t>(profile.num_steps()) + 1);
  for (int k = 0; k <= profile.num_steps(); ++k) {
    level_fraction[static_cast<std::size_t>(k)] = profile.CumulativeFraction(k);
  }

  for (int b = 0; b < n; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    if (counts[ub] <= 0) continue;
    rng::Stream s(rng::Derive({chip_seed, kTagRound, static_cast<std::uint64_t>(b)}));
    const double scaled = counts[ub] * factor;
    auto k = static_cast<std::int64_t>(std::floor(scaled));
    if (s.Uniform() < scaled - static_cast<double>(k)) ++k;
    const auto ncols = static_cast<std::int64_t>(cols[ub].size());
    k = std::clamp<std::int64_t>(k, 1, profile.bram_rows * ncols);

    auto& rec = fvm.brams[ub];
    rec.vulnerable_cols = cols[ub];
    rec.cells.reserve(static_cast<std::size_t>(k));
    for (std::int64_t idx : SampleDistinct(s, profile.bram_rows * ncols, k)) {
      FaultCell cell;
      cell.row = static_cast<int>(idx / ncols);
      cell.col = rec.vulnerable_cols[static_cast<std::size_t>(idx % ncols)];
      const double u = 1.0 - s.Uniform();  // (0, 1]
      int level = 0;
      while (level + 1 < profile.num_steps() &&
             level_fraction[static_cast<std::size_t>(level) + 1] >= u) {
        ++level;
      }
      cell.onset_mv = profile.v_crash_mv() + level * profile.v_step_mv();
      cell.stuck = s.Uniform() < profile.stuck_at_1_fraction ? 1 : 0;
      rec.cells.push_back(cell);
    }
    std::sort(rec.cells.begin(), rec.cells.end(), [](const FaultCell& a, const FaultCell& b) {
      return std::tie(a.row, a.col) < std::tie(b.row, b.col);
    });
  }
  return fvm;
}

FipResult VerifyFip(const FaultVariationMap& fvm) {
  const VoltageGrid grid(fvm.profile);
  const auto& levels = grid.levels_mv();
  FipResult result;
  auto report = [&](int bram, const FaultCell& c, int hi, int lo) {
    if (result.ok) {
      result.ok = false;
      result.first_violation = FipViolation{{bram, c.row, c.col}, c.onset_mv, hi, lo};
    }
  };
  for (int b = 0; b < static_cast<int>(fvm.brams.size()); ++b) {
    for (const auto& c : fvm.brams[static_cast<std::size_t>(b)].cells) {
      // A cell belongs to the set at V iff onset >= V. Off-grid onsets or
      // onsets inside the guardband have no consistent nested membership.
      if (!grid.Contains(c.onset_mv) || c.onset_mv >= fvm.profile.v_min_mv()) {
        const int idx = grid.NearestIndex(c.onset_mv);
        const int hi = levels[static_cast<std::size_t>(std::max(idx - 1, 0))];
        report(b, c, hi, levels[static_cast<std::size_t>(idx)]);
        continue;
      }
      for (std::size_t i = 0; i + 1 < levels.size(); ++i) {
        const bool in_hi = c.onset_mv >= levels[i];
        const bool in_lo = c.onset_mv >= levels[i + 1];
        if (in_hi && !in_lo) report(b, c, levels[i], levels[i + 1]);
      }
    }
    if (!result.ok) break;
  }
  return result;
}

FaultMask::FaultMask(int voltage_mv, double temperature_c, std::uint64_t run_seed,
                     int num_brams, std::vector<MaskEntry> entries)
    : voltage_mv_(voltage_mv),
      temperature_c_(temperature_c),
      run_seed_(run_seed),
      entries_(std::move(entries)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const MaskEntry& a, const MaskEntry& b) { return a.cell < b.cell; });
  bram_offsets_.assign(static_cast<std::size_t>(num_brams) + 1, 0);
  for (const auto& e : entries_) {
    if (e.cell.bram < 0 || e.cell.bram >= num_brams) {
      throw InvalidInput("mask entry references BRAM out of range");
    }
    ++bram_offsets_[static_cast<std::size_t>(e.cell.bram) + 1];
  }
  for (std::size_t i = 1; i < bram_offsets_.size(); ++i) bram_offsets_[i] += bram_offsets_[i - 1];
}

std::span<const MaskEntry> FaultMask::EntriesForBram(int bram) const {
  if (bram < 0 || static_cast<std::size_t>(bram) + 1 >= bram_offsets_.size()) return {};
  const auto lo = bram_offsets_[static_cast<std::size_t>(bram)];
  const auto hi = bram_offsets_[static_cast<std::size_t>(bram) + 1];
  return std::span<const MaskEntry>(entries_).subspan(lo, hi - lo);
}

std::span<const MaskEntry> FaultMask::EntriesForRow(int bram, int row) const {
  const auto all = EntriesForBram(bram);
  const auto lo = std::lower_bound(all.begin(), all.end(), row,
                                   [](const MaskEntry& e, int r) { return e.cell.row < r; });
  auto hi = lo;
  while (hi != all.end() && hi->cell.row == row) ++hi;
  return {lo, hi};
}

double RunJitterMv(const FaultVariationMap& fvm, std::uint64_t run_seed) {
  if (fvm.profile.run_jitter_sigma <= 0) return 0.0;
  rng::Stream s(rng::Derive({run_seed, kTagJitter}));
  return s.Normal() * fvm.profile.run_jitter_sigma * 1000.0;
}

double CellThresholdMv(const FaultVariationMap& fvm, int bram, const FaultCell& cell) {
  const auto& p = fvm.profile;
  const int level = (cell.onset_mv - p.v_crash_mv()) / p.v_step_mv();
  double g = p.growth_per_step();
  const double here = p.CumulativeFraction(level);
  const double above = p.CumulativeFraction(level + 1);
  if (above > 0 && here > above) g = here / above;
  const double v = rng::Hash01({fvm.chip_seed, kTagPhi, static_cast<std::uint64_t>(bram),
                                static_cast<std::uint64_t>(cell.row),
                                static_cast<std::uint64_t>(cell.col)});
  // Density within the step decays like g^-x, matching the level-to-level growth.
  const double phi = -std::log1p(-v * (1.0 - 1.0 / g)) / std::log(g);
  return cell.onset_mv + phi * p.v_step_mv();
}

FaultMask RealizeFaults(const FaultVariationMap& fvm, int voltage_mv, double temperature_c,
                        std::uint64_t run_seed, const RealizeOptions& options) {
  const auto& p = fvm.profile;
  if (voltage_mv < p.v_crash_mv()) {
    throw CrashRegion("supply " + std::to_string(voltage_mv) + " mV is below v_crash");
  }
  if (voltage_mv > p.v_nom_mv()) throw InvalidInput("supply above v_nom");
  if (temperature_c < 20.0 || temperature_c > 100.0) {
    throw InvalidInput("temperature must lie in [20, 100] degC");
  }
  std::vector<MaskEntry> entries;
  if (voltage_mv >= p.v_min_mv()) {
    return FaultMask(voltage_mv, temperature_c, run_seed, p.num_brams, std::move(entries));
  }

  double v_eff = voltage_mv + (options.zero_jitter ? 0.0 : RunJitterMv(fvm, run_seed));
  double keep = 1.0;
  if (p.temp_mode == TempMode::kLinear) {
    keep = std::min(1.0, LinearTemperatureFactor(p, temperature_c));
  } else {
    v_eff += p.temp_volts_per_c * 1000.0 * (temperature_c - p.temp_ref);
  }
  const int step = p.v_step_mv();
  for (int b = 0; b < static_cast<int>(fvm.brams.size()); ++b) {
    for (const auto& c : fvm.brams[static_cast<std::size_t>(b)].cells) {
      if (c.onset_mv + step <= v_eff) continue;
      if (c.onset_mv < v_eff && CellThresholdMv(fvm, b, c) < v_eff) continue;
      if (keep < 1.0 &&
          rng::Hash01({fvm.chip_seed, kTagTemp, static_cast<std::uint64_t>(b),
                       static_cast<std::uint64_t>(c.row), static_cast<std::uint64_t>(c.col)}) >=
              keep) {
        continue;
      }
      entries.push_back({{b, c.row, c.col}, c.stuck});
    }
  }
  return FaultMask(voltage_mv, temperature_c, run_seed, p.num_brams, std::move(entries));
}

std::vector<double> BramFaultRates(const FaultVariationMap& fvm) {
  std::vector<double> rates;
  rates.reserve(fvm.brams.size());
  const auto bits = static_cast<double>(fvm.profile.bits_per_bram());
  for (const auto& b : fvm.brams) rates.push_back(static_cast<double>(b.cells.size()) / bits);
  return rates;
}

FvmSummary Summarize(const FaultVariationMap& fvm) {
  FvmSummary s;
  const auto n = static_cast<double>(fvm.brams.size());
  const auto bits = static_cast<double>(fvm.profile.bits_per_bram());
  std::size_t zero = 0, faulty = 0, single = 0, stuck1 = 0;
  double sum_frac = 0;
  for (const auto& b : fvm.brams) {
    s.class_shares[static_cast<std::size_t>(b.vuln_class)] += 1.0 / n;
    s.cells_at_crash += b.cells.size();
    const double frac = static_cast<double>(b.cells.size()) / bits;
    sum_frac += frac;
    s.max_bram_fault_fraction = std::max(s.max_bram_fault_fraction, frac);
    if (b.cells.empty()) {
      ++zero;
    } else {
      ++faulty;
      if (b.vulnerable_cols.size() == 1) ++single;
    }
    for (const auto& c : b.cells) stuck1 += c.stuck;
  }
  s.faults_per_mbit_at_crash = static_cast<double>(s.cells_at_crash) / fvm.profile.total_mbit();
  s.zero_fault_fraction = static_cast<double>(zero) / n;
  s.mean_bram_fault_fraction = sum_frac / n;
  s.single_column_fraction = faulty ? static_cast<double>(single) / faulty : 0.0;
  s.stuck_at_1_fraction =
      s.cells_at_crash ? static_cast<double>(stuck1) / static_cast<double>(s.cells_at_crash) : 0.0;
  return s;
}

}  // namespace voltsim
