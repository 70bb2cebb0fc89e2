#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voltsim/bram_sim.hpp"
#include "voltsim/ecc_layout.hpp"
#include "voltsim/fault_map.hpp"
#include "voltsim/secded.hpp"

namespace voltsim {

struct SweepConfig {
  PlatformProfile profile;
  std::uint64_t chip_seed = 0;
  double chip_scale = 1.0;
  Pattern pattern = Pattern::Repeated(0xFFFF);
  double temperature_c = 50;
  int runs_per_level = 100;
  // Millivolts, descending. Empty means the full v_min..v_crash grid.
  std::vector<int> voltages_mv;
  bool ecc_enabled = false;
  EccMapping ecc_mapping = EccMapping::kCascade5;
  std::uint64_t run_seed = 0;
  bool zero_jitter = false;
  // Worker threads; results do not depend on it.
  int threads = 1;

  void Validate() const;
};

struct EccCounts {
  std::uint64_t correctable = 0;
  std::uint64_t detectable = 0;
  std::uint64_t undetectable = 0;

  std::uint64_t total() const { return correctable + detectable + undetectable; }
  EccCounts& operator+=(const EccCounts& o);
};

struct SweepRow {
  int voltage_mv = 0;
  int run = 0;
  std::uint64_t faults_total = 0;
  double faults_per_mbit = 0;
  EccCounts ecc;
  double power_w = 0;
  // FNV-1a over the sorted manifested fault locations.
  std::uint64_t location_digest = 0;
};

struct SweepRecord {
  std::vector<SweepRow> rows;  // ordered by (voltage desc, run)
  double total_mbit = 0;
  bool ecc_enabled = false;

  std::vector<int> voltages_mv() const;
  std::vector<const SweepRow*> RowsAt(int voltage_mv) const;
  // Reported per-voltage statistic (median over runs).
  double MedianFaultsPerMbit(int voltage_mv) const;
  double MeanFaultsPerMbit(int voltage_mv) const;
};

std::uint64_t RunSeed(std::uint64_t base, int run);

SweepRecord RunSweep(const SweepConfig& config);
SweepRecord RunSweep(const FaultVariationMap& fvm, const SweepConfig& config);

struct StabilityStats {
  int voltage_mv = 0;
  int runs = 0;
  double mean = 0;
  double median = 0;
  double min = 0;
  double max = 0;
  double std = 0;  // population
};

StabilityStats ComputeStabilityStats(const SweepRecord& record, int voltage_mv);

struct Cluster {
  std::optional<double> centroid;  // empty for a cluster that holds no points
  std::size_t size = 0;
  double share = 0;
  double mean = 0;
};

// Clusters ordered by ascending centroid; empty clusters last.
struct ClusterReport {
  std::vector<Cluster> clusters;
  std::vector<int> labels;
  int iterations = 0;
  // Fewer distinct values than k.
  bool degenerate = false;
};

ClusterReport KMeansCluster(std::span<const double> values, int k, std::uint64_t seed);

std::string ClusterReportToJson(const ClusterReport& report);

// Vulnerability class of each BRAM implied by a k=3 report.
std::vector<VulnClass> ClassesFromReport(const ClusterReport& report);

struct EccHistogram {
  EccCounts counts;
  double correctable() const;
  double detectable() const;
  double undetectable() const;
};

// Classifies every ECC word that holds at least one manifested fault.
EccCounts ClassifyMaskWords(const FaultMask& mask, const Pattern& pattern, EccMapping mapping,
                            int num_brams);

EccHistogram EccCoverage(const FaultVariationMap& fvm, int voltage_mv, double temperature_c,
                         int runs, const Pattern& pattern,
                         EccMapping mapping = EccMapping::kCascade5, std::uint64_t run_seed = 0);

// `voltage_mv,run,faults_total,faults_per_mbit,correctable,detectable,undetectable,power_w`
void WriteSweepCsv(std::ostream& out, const SweepRecord& record);

}  // namespace voltsim
