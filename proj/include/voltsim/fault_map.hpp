#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voltsim/platform.hpp"

namespace voltsim {

struct CellId {
  int bram = 0;
  int row = 0;
  int col = 0;

  friend auto operator<=>(const CellId&, const CellId&) = default;
};

struct FaultCell {
  int row = 0;
  int col = 0;
  // Highest grid voltage at which the cell reads faulty.
  int onset_mv = 0;
  // Value the cell reads when faulty.
  std::uint8_t stuck = 0;

  friend bool operator==(const FaultCell&, const FaultCell&) = default;
};

struct BramFaults {
  VulnClass vuln_class = VulnClass::kLow;
  // Sorted, 1-3 entries, empty iff the BRAM has no fault cells.
  std::vector<int> vulnerable_cols;
  // Sorted by (row, col).
  std::vector<FaultCell> cells;

  friend bool operator==(const BramFaults&, const BramFaults&) = default;
};

// Chip-specific map of every cell that fails anywhere in [v_crash, v_min).
// Immutable once built.
struct FaultVariationMap {
  PlatformProfile profile;
  std::uint64_t chip_seed = 0;
  double chip_scale = 1.0;
  std::vector<BramFaults> brams;

  std::size_t total_cells() const;
  // Number of cells faulty at the given grid voltage.
  std::size_t CountAt(int voltage_mv) const;

  friend bool operator==(const FaultVariationMap& a, const FaultVariationMap& b) {
    return a.profile.name == b.profile.name && a.chip_seed == b.chip_seed &&
           a.chip_scale == b.chip_scale && a.brams == b.brams;
  }
};

FaultVariationMap GenerateFvm(const PlatformProfile& profile, std::uint64_t chip_seed,
                              double chip_scale = 1.0);

struct FipViolation {
  CellId cell;
  int onset_mv = 0;
  // Adjacent grid pair (higher, lower) where the nesting broke.
  int v_hi_mv = 0;
  int v_lo_mv = 0;
};

struct FipResult {
  bool ok = true;
  std::optional<FipViolation> first_violation;
};

// Checks fault_set(v_hi) is a subset of fault_set(v_lo) for every adjacent
// grid pair, and that every onset lies on the grid strictly below v_min.
FipResult VerifyFip(const FaultVariationMap& fvm);

struct MaskEntry {
  CellId cell;
  std::uint8_t stuck = 0;

  friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

// Faulty cells realized for one (voltage, temperature, run).
class FaultMask {
 public:
  FaultMask() = default;
  FaultMask(int voltage_mv, double temperature_c, std::uint64_t run_seed, int num_brams,
            std::vector<MaskEntry> entries);

  int voltage_mv() const { return voltage_mv_; }
  double temperature_c() const { return temperature_c_; }
  std::uint64_t run_seed() const { return run_seed_; }
  // Sorted by cell.
  const std::vector<MaskEntry>& entries() const { return entries_; }
  std::span<const MaskEntry> EntriesForBram(int bram) const;
  std::span<const MaskEntry> EntriesForRow(int bram, int row) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  int voltage_mv_ = 0;
  double temperature_c_ = 0;
  std::uint64_t run_seed_ = 0;
  std::vector<MaskEntry> entries_;
  std::vector<std::size_t> bram_offsets_;
};

// Per-run equivalent-voltage offset in millivolts.
double RunJitterMv(const FaultVariationMap& fvm, std::uint64_t run_seed);

// Continuous failure threshold of a cell, in millivolts: the cell reads faulty
// whenever the effective supply is at or below it. Lies in
// [onset_mv, onset_mv + step).
double CellThresholdMv(const FaultVariationMap& fvm, int bram, const FaultCell& cell);

struct RealizeOptions {
  // Disables the per-run jitter (noise-free characterization).
  bool zero_jitter = false;
};

FaultMask RealizeFaults(const FaultVariationMap& fvm, int voltage_mv, double temperature_c,
                        std::uint64_t run_seed, const RealizeOptions& options = {});

struct FvmSummary {
  std::size_t cells_at_crash = 0;
  double faults_per_mbit_at_crash = 0;
  double zero_fault_fraction = 0;
  std::array<double, 3> class_shares{};
  // Mean / max within-BRAM fault fraction at v_crash.
  double mean_bram_fault_fraction = 0;
  double max_bram_fault_fraction = 0;
  double single_column_fraction = 0;  // among faulty BRAMs
  double stuck_at_1_fraction = 0;
};

FvmSummary Summarize(const FaultVariationMap& fvm);

// Per-BRAM fault fraction at v_crash.
std::vector<double> BramFaultRates(const FaultVariationMap& fvm);

}  // namespace voltsim
