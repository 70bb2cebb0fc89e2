#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "voltsim/characterizer.hpp"
#include "voltsim/nn.hpp"

namespace voltsim {

enum class PlacementKind : std::uint8_t { kDefault, kIcbp, kWorstCase };

struct PlacementStrategy {
  PlacementKind kind = PlacementKind::kDefault;
  int n = 0;  // number of innermost weight sets protected by kIcbp

  static PlacementStrategy Default() { return {}; }
  static PlacementStrategy Icbp(int n) { return {PlacementKind::kIcbp, n}; }
  static PlacementStrategy WorstCase() { return {PlacementKind::kWorstCase, 0}; }

  // "default", "icbp-N", "worst"
  std::string ToString() const;
  static PlacementStrategy Parse(const std::string& text);
};

struct LogicalBram {
  int layer = 0;
  int slot = 0;  // index within the layer
};

// Logical BRAM i (global, layer-major) lives at physical BRAM physical()[i].
class PlacementAssignment {
 public:
  PlacementAssignment() = default;
  PlacementAssignment(PlacementStrategy strategy, std::vector<LogicalBram> logical,
                      std::vector<int> physical, int num_physical);

  // Physical BRAM i holds logical BRAM i.
  static PlacementAssignment Identity(std::span<const nn::LayerSpec> layers, int num_physical);

  const PlacementStrategy& strategy() const { return strategy_; }
  const std::vector<LogicalBram>& logical() const { return logical_; }
  const std::vector<int>& physical() const { return physical_; }
  int num_physical() const { return num_physical_; }
  std::size_t size() const { return physical_.size(); }
  // Global logical index of (layer, slot).
  int GlobalIndex(int layer, int slot) const;
  // Logical index held by a physical BRAM, or -1.
  int LogicalAt(int physical) const { return inverse_[static_cast<std::size_t>(physical)]; }

 private:
  PlacementStrategy strategy_;
  std::vector<LogicalBram> logical_;
  std::vector<int> physical_;
  std::vector<int> inverse_;
  std::vector<int> layer_base_;
  int num_physical_ = 0;
};

std::vector<LogicalBram> LogicalBrams(std::span<const nn::LayerSpec> layers);

PlacementAssignment Assign(std::span<const VulnClass> classes,
                           std::span<const nn::LayerSpec> layers, PlacementStrategy strategy,
                           std::uint64_t seed);
PlacementAssignment Assign(const ClusterReport& clusters, std::span<const nn::LayerSpec> layers,
                           PlacementStrategy strategy, std::uint64_t seed);

// Physical index to RAMB18 grid site: column-major, `columns` columns.
struct GridSite {
  int x = 0;
  int y = 0;
};
inline constexpr int kDefaultGridColumns = 14;
GridSite SiteOf(int physical, int num_physical, int columns = kDefaultGridColumns);
std::string SiteName(int physical, int num_physical, int columns = kDefaultGridColumns);

struct ConstraintOutput {
  std::string text;
  std::vector<std::string> warnings;
};

// One Pblock per vulnerability class holding every physical BRAM of that
// class, with the logical BRAMs the assignment places there.
ConstraintOutput EmitConstraints(const PlacementAssignment& assignment,
                                 std::span<const VulnClass> classes,
                                 int columns = kDefaultGridColumns);

std::string AssignmentToJson(const PlacementAssignment& assignment,
                             std::span<const VulnClass> classes);

// Bounding-box area, in grid cells, of the physical BRAMs holding each
// weight set, summed over weight sets. Stands in for timing slack.
double DispersionProxy(const PlacementAssignment& assignment, int columns = kDefaultGridColumns);

struct OptimalVoltageRow {
  int voltage_mv = 0;
  double power_norm = 0;
  double error_norm = 0;
  double product = 0;
};

struct OptimalVoltageResult {
  int voltage_mv = 0;
  std::vector<OptimalVoltageRow> table;  // ordered as given
};

// Both series are normalized by their value at the highest voltage (v_min);
// the minimum product wins, ties toward the higher voltage.
OptimalVoltageResult OptimalVoltage(std::span<const std::pair<int, double>> power,
                                    std::span<const std::pair<int, double>> error);

}  // namespace voltsim
