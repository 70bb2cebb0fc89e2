#include "voltsim/placement.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "voltsim/errors.hpp"
#include "voltsim/rng.hpp"

namespace voltsim {

namespace {

constexpr std::uint64_t kTagPlace = 0x504C4143;

std::vector<int> Permutation(int n, std::uint64_t seed) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng::Stream s(rng::Derive({seed, kTagPlace}));
  for (int i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(s.Below(static_cast<std::uint64_t>(i) + 1));
    std::swap(p[static_cast<std::size_t>(i)], p[j]);
  }
  return p;
}

const char* PoolName(VulnClass c) {
  switch (c) {
    case VulnClass::kLow: return "low-vulnerable_pblock";
    case VulnClass::kMid: return "mid-vulnerable_pblock";
    case VulnClass::kHigh: return "high-vulnerable_pblock";
  }
  return "";
}

}  // namespace

std::string PlacementStrategy::ToString() const {
  switch (kind) {
    case PlacementKind::kDefault: return "default";
    case PlacementKind::kIcbp: return "icbp-" + std::to_string(n);
    case PlacementKind::kWorstCase: return "worst";
  }
  return "";
}

PlacementStrategy PlacementStrategy::Parse(const std::string& text) {
  if (text == "default") return Default();
  if (text == "worst" || text == "worst-case") return WorstCase();
  if (text.rfind("icbp-", 0) == 0) {
    const std::string num = text.substr(5);
    if (!num.empty() && num.size() <= 2 &&
        std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const int n = std::stoi(num);
      if (n >= 1) return Icbp(n);
    }
  }
  throw InvalidInput("unknown placement '" + text + "' (expected default, icbp-N or worst)");
}

PlacementAssignment::PlacementAssignment(PlacementStrategy strategy,
                                         std::vector<LogicalBram> logical,
                                         std::vector<int> physical, int num_physical)
    : strategy_(strategy),
      logical_(std::move(logical)),
      physical_(std::move(physical)),
      inverse_(static_cast<std::size_t>(std::max(0, num_physical)), -1),
      num_physical_(num_physical) {
  if (logical_.size() != physical_.size()) {
    throw InvalidInput("placement logical and physical lists differ in length");
  }
  for (std::size_t i = 0; i < physical_.size(); ++i) {
    const int p = physical_[i];
    if (p < 0 || p >= num_physical) throw InvalidInput("physical BRAM index out of range");
    if (inverse_[static_cast<std::size_t>(p)] != -1) {
      throw InvalidInput("placement maps two logical BRAMs to physical BRAM " + std::to_string(p));
    }
    inverse_[static_cast<std::size_t>(p)] = static_cast<int>(i);
    const auto& lb = logical_[i];
    if (lb.slot == 0) {
      if (static_cast<int>(layer_base_.size()) != lb.layer) {
        throw InvalidInput("logical BRAMs must be listed layer-major");
      }
      layer_base_.push_back(static_cast<int>(i));
    }
  }
}

PlacementAssignment PlacementAssignment::Identity(std::span<const nn::LayerSpec> layers,
                                                  int num_physical) {
  auto logical = LogicalBrams(layers);
  if (static_cast<int>(logical.size()) > num_physical) {
    throw CapacityExceeded("network needs more BRAMs than the chip provides");
  }
  std::vector<int> physical(logical.size());
  for (std::size_t i = 0; i < physical.size(); ++i) physical[i] = static_cast<int>(i);
  return PlacementAssignment(PlacementStrategy::Default(), std::move(logical),
                             std::move(physical), num_physical);
}

int PlacementAssignment::GlobalIndex(int layer, int slot) const {
  return layer_base_.at(static_cast<std::size_t>(layer)) + slot;
}

std::vector<LogicalBram> LogicalBrams(std::span<const nn::LayerSpec> layers) {
  std::vector<LogicalBram> out;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    for (int s = 0; s < layers[j].bram_count(); ++s) out.push_back({static_cast<int>(j), s});
  }
  return out;
}

PlacementAssignment Assign(std::span<const VulnClass> classes,
                           std::span<const nn::LayerSpec> layers, PlacementStrategy strategy,
                           std::uint64_t seed) {
  const int num_physical = static_cast<int>(classes.size());
  auto logical = LogicalBrams(layers);
  const int n = static_cast<int>(logical.size());
  if (n > num_physical) {
    throw CapacityExceeded("network needs " + std::to_string(n) + " BRAMs, chip has " +
                           std::to_string(num_physical));
  }
  const std::vector<int> perm = Permutation(num_physical, seed);
  auto cls = [&](int p) { return classes[static_cast<std::size_t>(p)]; };
  std::vector<int> physical(perm.begin(), perm.begin() + n);

  if (strategy.kind == PlacementKind::kIcbp) {
    const int num_layers = static_cast<int>(layers.size());
    if (strategy.n < 1 || strategy.n > num_layers) {
      throw InvalidInput("icbp-N needs 1 <= N <= " + std::to_string(num_layers));
    }
    const int first_target = num_layers - strategy.n;
    auto is_target = [&](int i) { return logical[static_cast<std::size_t>(i)].layer >= first_target; };
    int required = 0;
    for (int i = 0; i < n; ++i) required += is_target(i);
    const auto low_pool = std::count(classes.begin(), classes.end(), VulnClass::kLow);
    if (low_pool < required) {
      throw CapacityExceeded("icbp-" + std::to_string(strategy.n) + " needs " +
                             std::to_string(required) + " low-vulnerable BRAMs, only " +
                             std::to_string(low_pool) + " exist");
    }
    std::vector<int> holder(static_cast<std::size_t>(num_physical), -1);
    for (int i = 0; i < n; ++i) holder[static_cast<std::size_t>(physical[static_cast<std::size_t>(i)])] = i;
    // Free low BRAMs first, in permutation order; then ones held by
    // non-target slots, which swap into the vacated site.
    std::size_t free_cursor = 0, steal_cursor = 0;
    for (int i = 0; i < n; ++i) {
      if (!is_target(i) || cls(physical[static_cast<std::size_t>(i)]) == VulnClass::kLow) continue;
      const int old = physical[static_cast<std::size_t>(i)];
      int dest = -1;
      for (; free_cursor < perm.size(); ++free_cursor) {
        const int p = perm[free_cursor];
        if (cls(p) == VulnClass::kLow && holder[static_cast<std::size_t>(p)] == -1) {
          dest = p;
          ++free_cursor;
          break;
        }
      }
      if (dest >= 0) {
        holder[static_cast<std::size_t>(old)] = -1;
      } else {
        for (; steal_cursor < perm.size(); ++steal_cursor) {
          const int p = perm[steal_cursor];
          const int h = holder[static_cast<std::size_t>(p)];
          if (cls(p) == VulnClass::kLow && h >= 0 && !is_target(h)) {
            dest = p;
            ++steal_cursor;
            physical[static_cast<std::size_t>(h)] = old;
            holder[static_cast<std::size_t>(old)] = h;
            break;
          }
        }
      }
      physical[static_cast<std::size_t>(i)] = dest;
      holder[static_cast<std::size_t>(dest)] = i;
    }
  } else if (strategy.kind == PlacementKind::kWorstCase) {
    std::vector<int> sites;
    for (VulnClass c : {VulnClass::kHigh, VulnClass::kMid, VulnClass::kLow}) {
      for (int p : perm) {
        if (cls(p) == c) sites.push_back(p);
      }
    }
    std::vector<int> order;  // inner weight sets first
    for (int j = static_cast<int>(layers.size()) - 1; j >= 0; --j) {
      for (int i = 0; i < n; ++i) {
        if (logical[static_cast<std::size_t>(i)].layer == j) order.push_back(i);
      }
    }
    for (std::size_t k = 0; k < order.size(); ++k) {
      physical[static_cast<std::size_t>(order[k])] = sites[k];
    }
  }
  return PlacementAssignment(strategy, std::move(logical), std::move(physical), num_physical);
}

PlacementAssignment Assign(const ClusterReport& clusters, std::span<const nn::LayerSpec> layers,
                           PlacementStrategy strategy, std::uint64_t seed) {
  const auto classes = ClassesFromReport(clusters);
  return Assign(classes, layers, strategy, seed);
}

GridSite SiteOf(int physical, int num_physical, int columns) {
  if (columns < 1) throw InvalidInput("grid needs at least one column");
  if (physical < 0 || physical >= num_physical) throw InvalidInput("physical index out of range");
  const int rows = (num_physical + columns - 1) / columns;
  return {physical / rows, physical % rows};
}

std::string SiteName(int physical, int num_physical, int columns) {
  const GridSite s = SiteOf(physical, num_physical, columns);
  return "RAMB18_X" + std::to_string(s.x) + "Y" + std::to_string(s.y);
}

ConstraintOutput EmitConstraints(const PlacementAssignment& assignment,
                                 std::span<const VulnClass> classes, int columns) {
  if (static_cast<int>(classes.size()) != assignment.num_physical()) {
    throw InvalidInput("class list does not match the placement's BRAM count");
  }
  ConstraintOutput out;
  std::ostringstream os;
  const int np = assignment.num_physical();
  for (VulnClass c : {VulnClass::kLow, VulnClass::kMid, VulnClass::kHigh}) {
    const std::string name = PoolName(c);
    std::vector<int> pool;
    for (int p = 0; p < np; ++p) {
      if (classes[static_cast<std::size_t>(p)] == c) pool.push_back(p);
    }
    std::vector<int> cells;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (classes[static_cast<std::size_t>(assignment.physical()[i])] == c) {
        cells.push_back(static_cast<int>(i));
      }
    }
    if (pool.empty()) out.warnings.push_back(name + " is empty");
    os << "create_pblock " << name << '\n';
    os << "resize_pblock [get_pblocks " << name << "] -add {";
    for (std::size_t k = 0; k < pool.size(); ++k) {
      os << (k ? " " : "") << SiteName(pool[k], np, columns);
    }
    os << "}\n";
    if (!cells.empty()) {
      os << "add_cells_to_pblock [get_pblocks " << name << "] [get_cells -quiet [list";
      for (int i : cells) os << " {l-BRAM[" << i << "]}";
      os << "]]\n";
    }
  }
  out.text = os.str();
  return out;
}

std::string AssignmentToJson(const PlacementAssignment& assignment,
                             std::span<const VulnClass> classes) {
  nlohmann::ordered_json j;
  j["strategy"] = assignment.strategy().ToString();
  j["num_physical"] = assignment.num_physical();
  auto& m = j["mapping"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto& lb = assignment.logical()[i];
    m.push_back({{"logical", i},
                 {"layer", lb.layer},
                 {"slot", lb.slot},
                 {"physical", assignment.physical()[i]}});
  }
  auto& pools = j["class_pools"];
  for (VulnClass c : {VulnClass::kLow, VulnClass::kMid, VulnClass::kHigh}) {
    auto& arr = pools[ToString(c)] = nlohmann::ordered_json::array();
    for (std::size_t p = 0; p < classes.size(); ++p) {
      if (classes[p] == c) arr.push_back(p);
    }
  }
  return j.dump() + "\n";
}

double DispersionProxy(const PlacementAssignment& assignment, int columns) {
  struct Box {
    int x0 = INT_MAX, y0 = INT_MAX, x1 = INT_MIN, y1 = INT_MIN;
  };
  std::vector<Box> boxes;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto layer = static_cast<std::size_t>(assignment.logical()[i].layer);
    if (boxes.size() <= layer) boxes.resize(layer + 1);
    const GridSite s = SiteOf(assignment.physical()[i], assignment.num_physical(), columns);
    auto& b = boxes[layer];
    b.x0 = std::min(b.x0, s.x);
    b.y0 = std::min(b.y0, s.y);
    b.x1 = std::max(b.x1, s.x);
    b.y1 = std::max(b.y1, s.y);
  }
  double area = 0;
  for (const auto& b : boxes) {
    if (b.x0 <= b.x1) area += static_cast<double>(b.x1 - b.x0 + 1) * (b.y1 - b.y0 + 1);
  }
  return area;
}

OptimalVoltageResult OptimalVoltage(std::span<const std::pair<int, double>> power,
                                    std::span<const std::pair<int, double>> error) {
  if (power.empty() || power.size() != error.size()) {
    throw InvalidInput("power and error series must cover the same voltage grid");
  }
  std::size_t ref = 0;
  for (std::size_t i = 0; i < power.size(); ++i) {
    if (power[i].first != error[i].first) {
      throw InvalidInput("power and error series must cover the same voltage grid");
    }
    if (!(power[i].second > 0) || !(error[i].second > 0)) {
      throw InvalidInput("power and error values must be positive");
    }
    if (power[i].first > power[ref].first) ref = i;
  }
  OptimalVoltageResult r;
  for (std::size_t i = 0; i < power.size(); ++i) {
    OptimalVoltageRow row;
    row.voltage_mv = power[i].first;
    row.power_norm = power[i].second / power[ref].second;
    row.error_norm = error[i].second / error[ref].second;
    row.product = row.power_norm * row.error_norm;
    r.table.push_back(row);
  }
  std::vector<std::size_t> order(r.table.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return r.table[a].voltage_mv > r.table[b].voltage_mv;
  });
  const OptimalVoltageRow* best = nullptr;
  for (std::size_t i : order) {
    const auto& row = r.table[i];
    if (!best || row.product < best->product * (1.0 - 1e-12)) best = &row;
  }
  r.voltage_mv = best->voltage_mv;
  return r;
}

}  // namespace voltsim
