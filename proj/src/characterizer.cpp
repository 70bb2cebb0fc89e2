#include "voltsim/characterizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "voltsim/errors.hpp"
#include "voltsim/power_model.hpp"
#include "voltsim/rng.hpp"

namespace voltsim {

namespace {

constexpr std::uint64_t kTagRun = 0x52554E;
constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

std::uint64_t FnvMix(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xFF;
    h *= kFnvPrime;
  }
  return h;
}

// Runs fn(i) for i in [0, n) on up to `threads` workers.
template <typename Fn>
void ParallelFor(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(workers, n); ++t) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<int> ResolveVoltages(const SweepConfig& config) {
  if (config.voltages_mv.empty()) return VoltageGrid(config.profile).levels_mv();
  std::vector<int> v = config.voltages_mv;
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

void SweepConfig::Validate() const {
  profile.Validate();
  if (runs_per_level < 1) throw InvalidInput("runs_per_level must be >= 1");
  if (!(chip_scale > 0)) throw InvalidInput("chip_scale must be positive");
  if (threads < 1) throw InvalidInput("threads must be >= 1");
  if (pattern.width() != profile.bram_cols) {
    throw InvalidInput("pattern width does not match BRAM width");
  }
  for (int mv : voltages_mv) {
    if (mv < profile.v_crash_mv()) {
      throw CrashRegion("sweep voltage " + std::to_string(mv) + " mV is below v_crash");
    }
    if (mv > profile.v_nom_mv()) throw InvalidInput("sweep voltage above v_nom");
  }
}

EccCounts& EccCounts::operator+=(const EccCounts& o) {
  correctable += o.correctable;
  detectable += o.detectable;
  undetectable += o.undetectable;
  return *this;
}

std::vector<int> SweepRecord::voltages_mv() const {
  std::vector<int> out;
  for (const auto& r : rows) {
    if (out.empty() || out.back() != r.voltage_mv) out.push_back(r.voltage_mv);
  }
  return out;
}

std::vector<const SweepRow*> SweepRecord::RowsAt(int voltage_mv) const {
  std::vector<const SweepRow*> out;
  for (const auto& r : rows) {
    if (r.voltage_mv == voltage_mv) out.push_back(&r);
  }
  if (out.empty()) {
    throw InvalidInput("voltage " + std::to_string(voltage_mv) + " mV not in sweep record");
  }
  return out;
}

double SweepRecord::MedianFaultsPerMbit(int voltage_mv) const {
  std::vector<double> v;
  for (const auto* r : RowsAt(voltage_mv)) v.push_back(r->faults_per_mbit);
  return Median(std::move(v));
}

double SweepRecord::MeanFaultsPerMbit(int voltage_mv) const {
  const auto rs = RowsAt(voltage_mv);
  double sum = 0;
  for (const auto* r : rs) sum += r->faults_per_mbit;
  return sum / static_cast<double>(rs.size());
}

std::uint64_t RunSeed(std::uint64_t base, int run) {
  return rng::Derive({base, kTagRun, static_cast<std::uint64_t>(run)});
}

SweepRecord RunSweep(const SweepConfig& config) {
  config.Validate();
  return RunSweep(GenerateFvm(config.profile, config.chip_seed, config.chip_scale), config);
}

SweepRecord RunSweep(const FaultVariationMap& fvm, const SweepConfig& config) {
  config.Validate();
  const auto voltages = ResolveVoltages(config);
  const auto& p = fvm.profile;
  const PowerCurve power = PowerCurve::FromProfile(p);

  BramArray array(p);
  WriteAll(array, config.pattern);

  SweepRecord record;
  record.total_mbit = p.total_mbit();
  record.ecc_enabled = config.ecc_enabled;
  const auto runs = static_cast<std::size_t>(config.runs_per_level);
  record.rows.resize(voltages.size() * runs);

  RealizeOptions opts;
  opts.zero_jitter = config.zero_jitter;
  ParallelFor(record.rows.size(), config.threads, [&](std::size_t i) {
    const int mv = voltages[i / runs];
    const int run = static_cast<int>(i % runs);
    const FaultMask mask =
        RealizeFaults(fvm, mv, config.temperature_c, RunSeed(config.run_seed, run), opts);
    const ManifestedFaults faults = ManifestedFaultCount(array, mask, true);

    SweepRow& row = record.rows[i];
    row.voltage_mv = mv;
    row.run = run;
    row.faults_total = faults.count;
    row.faults_per_mbit = static_cast<double>(faults.count) / record.total_mbit;
    std::uint64_t h = kFnvOffset;
    for (const auto& f : faults.locations) {
      h = FnvMix(h, (static_cast<std::uint64_t>(f.cell.bram) << 32) |
                        (static_cast<std::uint64_t>(f.cell.row) << 8) |
                        static_cast<std::uint64_t>(f.cell.col));
    }
    row.location_digest = h;
    if (config.ecc_enabled) {
      row.ecc = ClassifyMaskWords(mask, config.pattern, config.ecc_mapping, p.num_brams);
    }
    row.power_w = power.Power(mv / 1000.0, config.ecc_enabled);
  });
  return record;
}

StabilityStats ComputeStabilityStats(const SweepRecord& record, int voltage_mv) {
  const auto rows = record.RowsAt(voltage_mv);
  std::vector<double> v;
  for (const auto* r : rows) v.push_back(r->faults_per_mbit);
  StabilityStats s;
  s.voltage_mv = voltage_mv;
  s.runs = static_cast<int>(v.size());
  s.min = *std::min_element(v.begin(), v.end());
  s.max = *std::max_element(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = s.min == s.max ? 0.0 : std::sqrt(ss / static_cast<double>(v.size()));
  s.median = Median(v);
  // Guard against rounding pushing the mean outside [min, max].
  s.mean = s.min == s.max ? s.min : std::clamp(s.mean, s.min, s.max);
  return s;
}

namespace {

struct LloydResult {
  std::vector<double> centroids;
  std::vector<int> labels;
  double inertia = 0;
  int iterations = 0;
};

int Nearest(const std::vector<double>& centroids, double x) {
  int best = 0;
  double best_d = std::abs(x - centroids[0]);
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    const double d = std::abs(x - centroids[static_cast<std::size_t>(c)]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

LloydResult Lloyd(std::span<const double> x, int k, rng::Stream& stream) {
  const std::size_t n = x.size();
  LloydResult r;
  // k-means++ seeding.
  r.centroids.push_back(x[stream.Below(n)]);
  std::vector<double> d2(n);
  while (static_cast<int>(r.centroids.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x[i] - r.centroids[static_cast<std::size_t>(Nearest(r.centroids, x[i]))];
      d2[i] = d * d;
      total += d2[i];
    }
    std::size_t pick = n - 1;
    if (total > 0) {
      const double u = stream.Uniform() * total;
      double acc = 0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = stream.Below(n);
    }
    r.centroids.push_back(x[pick]);
  }

  r.labels.assign(n, -1);
  for (r.iterations = 1; r.iterations <= 300; ++r.iterations) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int l = Nearest(r.centroids, x[i]);
      if (l != r.labels[i]) {
        r.labels[i] = l;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sum[static_cast<std::size_t>(r.labels[i])] += x[i];
      ++count[static_cast<std::size_t>(r.labels[i])];
    }
    for (int c = 0; c < k; ++c) {
      const auto cu = static_cast<std::size_t>(c);
      if (count[cu] > 0) {
        r.centroids[cu] = sum[cu] / static_cast<double>(count[cu]);
        continue;
      }
      // Re-seed at the point farthest from its own centroid.
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < n; ++i) {
        const double d =
            std::abs(x[i] - r.centroids[static_cast<std::size_t>(r.labels[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      r.centroids[cu] = x[far];
    }
  }
  r.iterations = std::min(r.iterations, 300);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - r.centroids[static_cast<std::size_t>(r.labels[i])];
    r.inertia += d * d;
  }
  return r;
}

constexpr int kRestarts = 10;

}  // namespace

ClusterReport KMeansCluster(std::span<const double> values, int k, std::uint64_t seed) {
  if (k < 1) throw InvalidInput("k must be >= 1");
  if (values.empty()) throw InvalidInput("k-means needs at least one value");
  for (double v : values) {
    if (!std::isfinite(v)) throw InvalidInput("k-means values must be finite");
  }
  const std::size_t n = values.size();
  const auto ku = static_cast<std::size_t>(k);
  ClusterReport report;
  report.labels.assign(n, 0);

  std::vector<double> centroids;
  const std::set<double> distinct(values.begin(), values.end());
  if (distinct.size() <= ku) {
    // Each distinct value is its own cluster; the rest stay empty.
    report.degenerate = distinct.size() < ku;
    centroids.assign(distinct.begin(), distinct.end());
    for (std::size_t i = 0; i < n; ++i) {
      report.labels[i] = static_cast<int>(
          std::distance(distinct.begin(), distinct.find(values[i])));
    }
    report.iterations = 1;
  } else {
    std::optional<LloydResult> best;
    for (int restart = 0; restart < kRestarts; ++restart) {
      rng::Stream stream(rng::Derive({seed, static_cast<std::uint64_t>(restart)}));
      LloydResult r = Lloyd(values, k, stream);
      if (!best || r.inertia < best->inertia) best = std::move(r);
    }
    // Ascending centroid order.
    std::vector<int> order(ku);
    for (int c = 0; c < k; ++c) order[static_cast<std::size_t>(c)] = c;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return best->centroids[static_cast<std::size_t>(a)] <
             best->centroids[static_cast<std::size_t>(b)];
    });
    std::vector<int> rank(ku);
    for (int c = 0; c < k; ++c) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(c)])] = c;
    for (int c : order) centroids.push_back(best->centroids[static_cast<std::size_t>(c)]);
    for (std::size_t i = 0; i < n; ++i) {
      report.labels[i] = rank[static_cast<std::size_t>(best->labels[i])];
    }
    report.iterations = best->iterations;
  }

  report.clusters.resize(ku);
  std::vector<double> sum(ku, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto l = static_cast<std::size_t>(report.labels[i]);
    ++report.clusters[l].size;
    sum[l] += values[i];
  }
  for (std::size_t c = 0; c < ku; ++c) {
    auto& cl = report.clusters[c];
    if (c < centroids.size() && cl.size > 0) {
      cl.centroid = centroids[c];
      cl.mean = sum[c] / static_cast<double>(cl.size);
    }
    cl.share = static_cast<double>(cl.size) / static_cast<double>(n);
  }
  return report;
}

std::string ClusterReportToJson(const ClusterReport& report) {
  nlohmann::ordered_json j;
  j["k"] = report.clusters.size();
  j["degenerate"] = report.degenerate;
  j["iterations"] = report.iterations;
  auto& cs = j["clusters"] = nlohmann::ordered_json::array();
  const char* names[] = {"low", "mid", "high"};
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const auto& cl = report.clusters[c];
    nlohmann::ordered_json e;
    e["index"] = c;
    if (report.clusters.size() == 3) e["class"] = names[c];
    e["centroid"] = cl.centroid ? nlohmann::ordered_json(*cl.centroid) : nullptr;
    e["size"] = cl.size;
    e["share"] = cl.share;
    e["mean_rate"] = cl.mean;
    cs.push_back(std::move(e));
  }
  j["labels"] = report.labels;
  return j.dump(2) + "\n";
}

std::vector<VulnClass> ClassesFromReport(const ClusterReport& report) {
  if (report.clusters.size() != 3) {
    throw InvalidInput("vulnerability classes need a k=3 cluster report");
  }
  std::vector<VulnClass> out;
  out.reserve(report.labels.size());
  for (int l : report.labels) out.push_back(static_cast<VulnClass>(l));
  return out;
}

double EccHistogram::correctable() const {
  const auto t = counts.total();
  return t ? static_cast<double>(counts.correctable) / static_cast<double>(t) : 0.0;
}
double EccHistogram::detectable() const {
  const auto t = counts.total();
  return t ? static_cast<double>(counts.detectable) / static_cast<double>(t) : 0.0;
}
double EccHistogram::undetectable() const {
  const auto t = counts.total();
  return t ? static_cast<double>(counts.undetectable) / static_cast<double>(t) : 0.0;
}

EccCounts ClassifyMaskWords(const FaultMask& mask, const Pattern& pattern, EccMapping mapping,
                            int num_brams) {
  std::map<EccWordKey, std::vector<std::pair<int, std::uint8_t>>> words;
  for (const auto& e : mask.entries()) {
    const auto site = EccSiteOf(mapping, e.cell, num_brams);
    if (!site) continue;
    words[site->word].emplace_back(site->position, e.stuck);
  }
  EccCounts counts;
  for (const auto& [key, bits] : words) {
    const ecc::Codeword72 original = ecc::Encode64(EccPayload(mapping, key, pattern));
    ecc::Codeword72 received = original;
    for (const auto& [pos, stuck] : bits) {
      if (received.Bit(pos) != static_cast<bool>(stuck)) received.Flip(pos);
    }
    if (received == original) continue;
    switch (ecc::ClassifyWord(original, received)) {
      case ecc::FaultClass::kCorrectable: ++counts.correctable; break;
      case ecc::FaultClass::kDetectable: ++counts.detectable; break;
      case ecc::FaultClass::kUndetectable: ++counts.undetectable; break;
    }
  }
  return counts;
}

EccHistogram EccCoverage(const FaultVariationMap& fvm, int voltage_mv, double temperature_c,
                         int runs, const Pattern& pattern, EccMapping mapping,
                         std::uint64_t run_seed) {
  if (runs < 1) throw InvalidInput("runs must be >= 1");
  EccHistogram h;
  for (int r = 0; r < runs; ++r) {
    const FaultMask mask = RealizeFaults(fvm, voltage_mv, temperature_c, RunSeed(run_seed, r));
    h.counts += ClassifyMaskWords(mask, pattern, mapping, fvm.profile.num_brams);
  }
  return h;
}

void WriteSweepCsv(std::ostream& out, const SweepRecord& record) {
  out << "voltage_mv,run,faults_total,faults_per_mbit,correctable,detectable,undetectable,"
         "power_w\n";
  char buf[64];
  for (const auto& r : record.rows) {
    out << r.voltage_mv << ',' << r.run << ',' << r.faults_total << ',';
    std::snprintf(buf, sizeof buf, "%.4f", r.faults_per_mbit);
    out << buf << ',' << r.ecc.correctable << ',' << r.ecc.detectable << ','
        << r.ecc.undetectable << ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.power_w);
    out << buf << '\n';
  }
}

}  // namespace voltsim
