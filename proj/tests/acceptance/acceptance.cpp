// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//
//   acceptance [--cli PATH] [--threads N] [--known-fail ID ...] [--only ID ...]
//
// Exit status is 0 when every criterion passes or is listed with --known-fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "voltsim/bram_sim.hpp"
#include "voltsim/characterizer.hpp"
#include "voltsim/errors.hpp"
#include "voltsim/fault_map.hpp"
#include "voltsim/nn.hpp"
#include "voltsim/placement.hpp"
#include "voltsim/power_model.hpp"
#include "voltsim/rng.hpp"
#include "voltsim/secded.hpp"

namespace fs = std::filesystem;
using namespace voltsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Options {
  std::string cli;
  int threads = 1;
  std::set<int> known_fail;
  std::set<int> only;
};

// Numeric arguments only.
std::string Fmt(const char* fmt, double a = 0, double b = 0, double c = 0, double d = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, a, b, c, d);
  return buf;
}

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------

Outcome SecdedOracle() {
  const auto t0 = std::chrono::steady_clock::now();
  rng::Stream s(rng::Derive({0xECC, 1}));
  int failures = 0;
  long checked = 0;
  for (int w = 0; w < 100; ++w) {
    const std::uint64_t data = s.NextU64();
    const auto cw = ecc::Encode64(data);
    for (int a = 0; a < ecc::kCodewordBits; ++a) {
      auto r = cw;
      r.Flip(a);
      const auto out = ecc::Decode72(r);
      // A flip of the overall parity bit is reported as a parity-bit repair.
      const auto want = a == 0 ? ecc::DecodeKind::kParityBitCorrected
                               : ecc::DecodeKind::kCorrectedSingle;
      failures += out.kind != want || out.data != data || out.position != a;
      ++checked;
      for (int b = a + 1; b < ecc::kCodewordBits; ++b) {
        auto r2 = r;
        r2.Flip(b);
        failures += ecc::Decode72(r2).kind != ecc::DecodeKind::kDoubleDetected;
        ++checked;
      }
    }
  }
  const double secs = Seconds(t0);
  return {failures == 0 && checked == 100 * (72 + 2556) && secs < 5.0,
          Fmt("%.0f decodes, %.0f failures, %.2f s", static_cast<double>(checked), failures,
              secs)};
}

Outcome FipProperty() {
  const auto t0 = std::chrono::steady_clock::now();
  int failures = 0, maps = 0;
  for (const char* name : {"vc707", "kc705"}) {
    const auto profile = MakePlatformProfile(name);
    const VoltageGrid grid(profile);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      const auto fvm = GenerateFvm(profile, rng::Derive({0xF1B, seed}));
      ++maps;
      if (!VerifyFip(fvm).ok) ++failures;
      if (seed < 3) {
        // Realized masks of one run must nest along the grid as well.
        FaultMask prev = RealizeFaults(fvm, grid.levels_mv().front(), 50, seed);
        for (std::size_t i = 1; i < grid.size(); ++i) {
          FaultMask cur = RealizeFaults(fvm, grid.levels_mv()[i], 50, seed);
          const bool nested = std::includes(
              cur.entries().begin(), cur.entries().end(), prev.entries().begin(),
              prev.entries().end(),
              [](const MaskEntry& x, const MaskEntry& y) { return x.cell < y.cell; });
          failures += !nested;
          prev = std::move(cur);
        }
      }
    }
  }
  const double secs = Seconds(t0);
  return {failures == 0 && secs < 30.0,
          Fmt("%.0f maps, %.0f failures, %.2f s", maps, failures, secs)};
}

struct SweepPair {
  SweepRecord vc707, kc705;
  double seconds = 0;
};

const SweepPair& CalibrationSweeps(int threads) {
  static const SweepPair pair = [threads] {
    SweepPair p;
    const auto t0 = std::chrono::steady_clock::now();
    SweepConfig c;
    c.runs_per_level = 100;
    c.threads = threads;
    c.chip_seed = 1;
    c.profile = MakePlatformProfile("vc707");
    p.vc707 = RunSweep(c);
    c.profile = MakePlatformProfile("kc705");
    p.kc705 = RunSweep(c);
    p.seconds = Seconds(t0);
    return p;
  }();
  return pair;
}

Outcome CalibrationEndpoints(const Options& o) {
  const auto& s = CalibrationSweeps(o.threads);
  const double v = s.vc707.MedianFaultsPerMbit(540);
  const double k = s.kc705.MedianFaultsPerMbit(540);
  const bool ok = v >= 620 && v <= 685 && k >= 240 && k <= 268 && s.seconds < 120;
  return {ok, Fmt("vc707 median %.1f/Mbit, kc705 median %.1f/Mbit, both sweeps %.1f s", v, k,
                  s.seconds)};
}

Outcome Stability(const Options& o) {
  const auto& s = CalibrationSweeps(o.threads);
  const auto a = ComputeStabilityStats(s.vc707, 540);
  const auto b = ComputeStabilityStats(s.kc705, 540);
  const double ra = a.std / a.mean, rb = b.std / b.mean;
  // The band is set by the VC707 repeat table; KC705 has its own, wider spread.
  const bool ok = a.runs == 100 && ra >= 0.006 && ra <= 0.016;
  return {ok, Fmt("relative std over 100 runs: vc707 %.2f%% (kc705 %.2f%%, not banded)", 100 * ra,
                  100 * rb)};
}

Outcome PatternProportionality() {
  auto profile = MakePlatformProfile("vc707");
  const auto fvm = GenerateFvm(profile, 2);
  const auto mask = RealizeFaults(fvm, 540, 50, 0);
  auto count = [&](const FaultVariationMap& f, const FaultMask& m, const Pattern& p) {
    BramArray arr(f.profile);
    WriteAll(arr, p);
    return static_cast<double>(ManifestedFaultCount(arr, m, false).count);
  };
  const double ffff = count(fvm, mask, Pattern::Parse("FFFF"));
  const double aaaa = count(fvm, mask, Pattern::Parse("AAAA"));
  const double x5555 = count(fvm, mask, Pattern::Parse("5555"));
  const double rnd = count(fvm, mask, Pattern::Random(17));

  profile.stuck_at_1_fraction = 0;
  const auto clean = GenerateFvm(profile, 2);
  const auto clean_mask = RealizeFaults(clean, 540, 50, 0);
  const double zeros = count(clean, clean_mask, Pattern::Parse("0000"));

  std::size_t faulty_brams = 0;
  for (const auto& b : fvm.brams) faulty_brams += !b.cells.empty();
  const double ratio = ffff / aaaa;
  const bool close = std::abs(x5555 / aaaa - 1) <= 0.10 && std::abs(rnd / aaaa - 1) <= 0.10;
  const bool ok = ratio >= 1.8 && ratio <= 2.2 && zeros == 0 && close && faulty_brams >= 200;
  std::ostringstream d;
  d << "FFFF/AAAA " << Fmt("%.3f", ratio) << ", 0000 " << zeros << ", AAAA " << aaaa
    << ", 5555 " << x5555 << ", random " << rnd << " over " << faulty_brams << " faulty BRAMs";
  return {ok, d.str()};
}

Outcome Clustering() {
  const std::array<double, 3> want = {0.886, 0.094, 0.018};
  bool ok = true;
  std::ostringstream d;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto fvm = GenerateFvm(MakePlatformProfile("vc707"), seed);
    const auto rates = BramFaultRates(fvm);
    const auto r = KMeansCluster(rates, 3, seed);
    const auto summary = Summarize(fvm);
    bool seed_ok = !r.degenerate && summary.zero_fault_fraction >= 0.34 &&
                   summary.zero_fault_fraction <= 0.44;
    for (int c = 0; c < 3; ++c) {
      seed_ok = seed_ok && r.clusters[c].centroid &&
                std::abs(r.clusters[c].share - want[c]) <= 0.03;
      if (c > 0) seed_ok = seed_ok && *r.clusters[c].centroid > *r.clusters[c - 1].centroid;
    }
    ok = ok && seed_ok;
    if (seed == 1) {
      d << Fmt("seed 1 shares %.1f/%.1f/%.1f%%", 100 * r.clusters[0].share,
               100 * r.clusters[1].share, 100 * r.clusters[2].share)
        << Fmt(", zero-fault %.1f%%", 100 * summary.zero_fault_fraction);
    } else if (!seed_ok) {
      d << "; seed " << seed << " out of band";
    }
  }
  d << " (5 chip seeds)";
  return {ok, d.str()};
}

Outcome Temperature(const Options& o) {
  const auto fvm = GenerateFvm(MakePlatformProfile("vc707"), 3);
  std::vector<double> med;
  for (int t : {50, 60, 70, 80}) {
    SweepConfig c;
    c.profile = fvm.profile;
    c.temperature_c = t;
    c.voltages_mv = {540};
    c.runs_per_level = 20;
    c.threads = o.threads;
    med.push_back(RunSweep(fvm, c).MedianFaultsPerMbit(540));
  }
  bool mono = true;
  for (std::size_t i = 1; i < med.size(); ++i) mono = mono && med[i] <= med[i - 1];
  const double ratio = med[3] / med[0];
  return {mono && ratio <= 0.37,
          Fmt("median/Mbit at 50/60/70/80 C: %.1f/%.1f/%.1f/%.1f", med[0], med[1], med[2],
              med[3]) +
              Fmt(", 80/50 ratio %.3f", ratio)};
}

Outcome EccCoverageCriterion(std::string& info) {
  const auto fvm = GenerateFvm(MakePlatformProfile("vc707"), 1);
  const auto h = EccCoverage(fvm, 540, 50, 20, Pattern::Parse("FFFF"), EccMapping::kCascade5);
  const double sum = h.correctable() + h.detectable() + h.undetectable();
  const bool ok = h.correctable() >= 0.88 && h.detectable() >= 0.03 && h.detectable() <= 0.11 &&
                  std::abs(sum - 1) < 1e-12;
  const auto q = EccCoverage(fvm, 540, 50, 20, Pattern::Parse("FFFF"), EccMapping::kRowQuad);
  info = Fmt("rowquad mapping: correctable %.4f, detectable %.4f, undetectable %.4f",
             q.correctable(), q.detectable(), q.undetectable());
  return {ok, Fmt("cascade5 mapping: correctable %.4f, detectable %.4f, undetectable %.4f, "
                  "sum %.12f",
                  h.correctable(), h.detectable(), h.undetectable(), sum)};
}

Outcome Power() {
  const auto c = PowerCurve::FromProfile(MakePlatformProfile("vc707"));
  const double e1 = std::abs(c.Power(1.00, false) - 2.4);
  const double e2 = std::abs(c.Power(0.61, false) - 0.31);
  const double e3 = std::abs(c.Power(0.54, false) - 0.198);
  const double e4 = std::abs(c.Power(0.54, true) - 0.211);
  const double exact = std::max({e1, e2, e3, e4});
  const double saving = SavingFraction(c, 0.61, 0.54, false);
  bool mono = true;
  for (int mv = 550; mv <= 1000; mv += 10) {
    for (bool ecc : {false, true}) {
      mono = mono && c.Power(mv / 1000.0, ecc) > c.Power((mv - 10) / 1000.0, ecc);
    }
  }
  const bool ok = exact < 1e-12 && std::abs(saving - 0.361) <= 0.005 && mono;
  return {ok, Fmt("max calibration error %.2e W, saving 0.61->0.54 V %.2f%%, monotone ", exact,
                  100 * saving) +
                  (mono ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

struct NnContext {
  nn::SyntheticModel model;
  FaultVariationMap fvm;
  std::vector<VulnClass> classes;
  std::vector<nn::LayerSpec> layers;
  double fault_free = 0;
};

const NnContext& Nn(int threads) {
  static const NnContext ctx = [threads] {
    NnContext c;
    c.model = nn::MakeSyntheticModel(1, 500);
    c.layers = c.model.network.layers;
    c.fvm = GenerateFvm(MakePlatformProfile("vc707"), 1);
    c.classes = ClassesFromReport(KMeansCluster(BramFaultRates(c.fvm), 3, 1));
    c.fault_free = nn::FaultFreeErrorPercent(c.model.network, c.model.dataset, threads);
    return c;
  }();
  return ctx;
}

double EvalError(const NnContext& c, const PlacementAssignment& place, int mv, bool ecc,
                 std::uint64_t run_seed, int threads) {
  nn::EvalConfig cfg;
  cfg.voltage_mv = mv;
  cfg.ecc_on = ecc;
  cfg.runs = 1;
  cfg.run_seed = run_seed;
  cfg.threads = threads;
  return nn::Evaluate(c.model.network, c.model.dataset, c.fvm, place, cfg).median_error_pct;
}

Outcome NeuralNetwork(const Options& o) {
  const auto& c = Nn(o.threads);
  const auto& net = c.model.network;
  const int num_brams = c.fvm.profile.num_brams;
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream d;
  d << Fmt("fault-free %.2f%%", c.fault_free);

  // (a) guardband voltage is fault-free.
  bool a_ok = true;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto place = Assign(c.classes, c.layers, PlacementStrategy::Default(), s);
    for (bool ecc : {false, true}) a_ok = a_ok && EvalError(c, place, 610, ecc, s, o.threads) == c.fault_free;
  }
  d << "; (a) " << (a_ok ? "ok" : "FAIL");

  // (b) median over 10 seeds is monotone in voltage.
  const VoltageGrid grid(c.fvm.profile);
  std::vector<double> medians;
  for (int mv : grid.levels_mv()) {
    std::vector<double> e;
    for (std::uint64_t s = 0; s < 10; ++s) {
      const auto place = Assign(c.classes, c.layers, PlacementStrategy::Default(), s);
      e.push_back(EvalError(c, place, mv, false, s, o.threads));
    }
    medians.push_back(Median(e));
  }
  bool b_ok = true;
  for (std::size_t i = 1; i < medians.size(); ++i) b_ok = b_ok && medians[i] >= medians[i - 1];
  d << "; (b) " << (b_ok ? "ok" : "FAIL") << Fmt(" 560/550/540 mV medians %.2f/%.2f/%.2f%%",
                                                 medians[5], medians[6], medians[7]);

  // (c) one flipped bit per SECDED word is invisible with ECC on.
  const auto place0 = Assign(c.classes, c.layers, PlacementStrategy::Default(), 0);
  const BramArray stored = nn::MapWeightsToBrams(net, place0, num_brams);
  std::vector<MaskEntry> single;
  for (int p : place0.physical()) {
    for (int q = 0; q < nn::kWeightsPerBram / 4; ++q) {
      const int row = 4 * q + q % 4;
      const int col = (5 * q + p) % 16;
      const int bit = (stored.Stored(p, row) >> col) & 1;
      single.push_back({{p, row, col}, static_cast<std::uint8_t>(bit ^ 1)});
    }
  }
  std::sort(single.begin(), single.end(),
            [](const MaskEntry& x, const MaskEntry& y) { return x.cell < y.cell; });
  const FaultMask single_mask(540, 50, 0, num_brams, std::move(single));
  const auto repaired = nn::FaultyWeights(net, place0, single_mask, true);
  const double c_err = nn::ErrorPercent(net, repaired, c.model.dataset, o.threads);
  const double c_raw = nn::ErrorPercent(net, nn::FaultyWeights(net, place0, single_mask, false),
                                        c.model.dataset, o.threads);
  const bool c_ok = repaired == net.weights && c_err == c.fault_free;
  d << "; (c) " << (c_ok ? "ok" : "FAIL")
    << Fmt(" ecc-on %.2f%% vs ecc-off %.2f%%", c_err, c_raw);

  // (d) placement ordering at v_crash. Placement and run share the seed, so
  // strategies are compared seed by seed.
  constexpr int kPlacementSeeds = 100;
  const std::vector<PlacementStrategy> order = {PlacementStrategy::Icbp(5), PlacementStrategy::Icbp(1),
                                                PlacementStrategy::Default(),
                                                PlacementStrategy::WorstCase()};
  std::vector<std::vector<double>> errs;
  std::vector<double> med;
  for (const auto& strategy : order) {
    std::vector<double> e;
    for (std::uint64_t s = 0; s < kPlacementSeeds; ++s) {
      const auto place = Assign(c.classes, c.layers, strategy, s);
      e.push_back(EvalError(c, place, 540, false, s, o.threads));
    }
    med.push_back(Median(e));
    errs.push_back(std::move(e));
  }
  int differ = 0, icbp1_better = 0;
  for (int s = 0; s < kPlacementSeeds; ++s) {
    differ += errs[1][s] != errs[2][s];
    icbp1_better += errs[1][s] < errs[2][s];
  }
  const bool d_ok = med[0] <= med[1] && med[1] <= med[2] && med[2] <= med[3];
  d << "; (d) " << (d_ok ? "ok" : "FAIL")
    << Fmt(" medians over %.0f seeds icbp-5/icbp-1/default/worst ", kPlacementSeeds)
    << Fmt("%.2f/%.2f/%.2f/%.2f%%", med[0], med[1], med[2], med[3]) << ", icbp-1 vs default differ in "
    << differ << " seeds, icbp-1 lower in " << icbp1_better;

  // (e) faults that agree with the stored bit change nothing.
  std::vector<MaskEntry> agree;
  for (int p : place0.physical()) {
    for (int row = 0; row < nn::kWeightsPerBram; ++row) {
      const std::uint16_t w = stored.Stored(p, row);
      for (int col = 0; col < 16; ++col) {
        if (((w >> col) & 1) == 0) {
          agree.push_back({{p, row, col}, 0});
        }
      }
    }
  }
  const FaultMask agree_mask(540, 50, 0, num_brams, std::move(agree));
  const double e_err = nn::ErrorPercent(
      net, nn::FaultyWeights(net, place0, agree_mask, false), c.model.dataset, o.threads);
  const bool e_ok = e_err == c.fault_free;
  d << "; (e) " << (e_ok ? "ok" : "FAIL") << " over " << agree_mask.size()
    << " stuck-at-0 cells on stored zeros";
  d << Fmt("; %.1f s", Seconds(t0));
  return {a_ok && b_ok && c_ok && d_ok && e_ok, d.str()};
}

Outcome OptimalVoltageCriterion() {
  const auto curve = PowerCurve::FromProfile(MakePlatformProfile("vc707"));
  const double err[] = {2.56, 2.56, 2.56, 2.56, 2.56, 2.66, 4.10, 6.15};
  std::vector<std::pair<int, double>> p, e;
  for (int i = 0; i < 8; ++i) {
    const int mv = 610 - 10 * i;
    p.emplace_back(mv, curve.Power(mv / 1000.0, false));
    e.emplace_back(mv, err[i]);
  }
  const int base = OptimalVoltage(p, e).voltage_mv;
  bool invariant = true;
  for (double k : {0.001, 0.37, 12.5, 1e4}) {
    auto p2 = p, e2 = e;
    for (auto& x : p2) x.second *= k;
    for (auto& x : e2) x.second *= 1.0 / (k + 0.5);
    invariant = invariant && OptimalVoltage(p2, e).voltage_mv == base &&
                OptimalVoltage(p, e2).voltage_mv == base &&
                OptimalVoltage(p2, e2).voltage_mv == base;
  }
  const bool ok = std::abs(base - 560) <= 10 && invariant;
  return {ok, Fmt("optimum %.0f mV, saving vs v_min %.1f%%, rescale invariant ", base,
                  100 * SavingFraction(curve, 0.61, base / 1000.0, false)) +
                  (invariant ? "yes" : "no")};
}

// ---------------------------------------------------------------------------

int Shell(const std::string& cmd, std::string* out = nullptr) {
  FILE* pipe = popen((cmd + " 2>&1").c_str(), "r");
  if (!pipe) return -1;
  std::string text;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) text += buf;
  const int status = pclose(pipe);
  if (out) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Quote(const std::string& s) { return "'" + s + "'"; }

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Determinism(const Options& o) {
  if (o.cli.empty() || !fs::exists(o.cli)) return {false, "voltsim CLI not given (--cli)"};
  const fs::path work = fs::absolute("acceptance_work");
  fs::remove_all(work);
  fs::create_directories(work);
  const std::string cd = "cd " + Quote(work.string()) + " && " + Quote(fs::absolute(o.cli).string());

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"sweep.csv", "--threads 1 sweep --platform vc707 --runs 20 --ecc --out sweep.csv"},
      {"fvm.json", "--threads 1 --seed 7 fvm --platform kc705 --out fvm.json"},
      {"fvm707.json", "--threads 1 --seed 9 fvm --platform vc707 --out fvm707.json"},
      {"cluster.json", "--threads 1 --seed 7 cluster --fvm fvm.json --out cluster.json"},
      {"ecc.csv", "--threads 1 --seed 7 ecc-eval --fvm fvm.json --voltages 550 540 --runs 8 "
                  "--ecc-mapping rowquad --out ecc.csv"},
      {"power.csv", "--threads 1 power --platform vc707 --write-curve curve.csv --out power.csv"},
      {"net.vsnn", "--threads 1 --seed 3 synth --count 120 --out net.vsnn"},
      {"nn.csv", "--threads 1 --seed 7 nn-eval --fvm fvm707.json --weights net.vsnn --images "
                 "net.vsnn.images.idx --labels net.vsnn.labels.idx --voltages 560 540 "
                 "--placement default --placement icbp-1 --ecc both --runs 3 --out nn.csv"},
      {"vuln.csv", "--threads 1 --seed 5 layer-vuln --weights net.vsnn --images "
                   "net.vsnn.images.idx --labels net.vsnn.labels.idx --injections 100 "
                   "--trials 2 --out vuln.csv"},
      {"place.xdc", "--threads 1 --seed 7 placement --fvm fvm707.json --strategy icbp-2 "
                    "--out place.xdc --json place.json"},
      {"opt.csv", "--threads 1 optimal-voltage --platform vc707 --error nn.csv --placement "
                  "default --ecc off --out opt.csv"},
      {"report.fault_power.csv", "--threads 1 report --sweep sweep.csv --nn-eval nn.csv --out report"},
      {"vectors.csv", "--threads 1 --seed 2 ecc-vectors --count 32 --out vectors.csv"},
  };
  std::ostringstream d;
  int outputs = 0, mismatches = 0, failures = 0;
  for (const auto& [out, args] : commands) {
    std::string text;
    if (Shell(cd + " " + args, &text) != 0) {
      ++failures;
      d << out << " failed: " << text.substr(0, 200) << "; ";
      continue;
    }
    for (int threads : {2, 5}) {
      const std::string dir = "rerun_" + std::to_string(threads) + "_" + out;
      const int rc = Shell(cd + " --threads " + std::to_string(threads) + " rerun " + out +
                               ".manifest.json --out-dir " + dir,
                           &text);
      if (rc != 0) {
        ++failures;
        d << out << " rerun x" << threads << " rc " << rc << "; ";
      }
      std::istringstream lines(text);
      std::string line;
      bool any = false;
      while (std::getline(lines, line)) {
        std::istringstream fields(line);
        std::string tag, original;
        fields >> tag >> original;
        if (tag != "MATCH" && tag != "DIFFER") continue;
        any = true;
        ++outputs;
        // Check the bytes directly, not only the digest the tool reports.
        const fs::path a = fs::path(original).is_absolute() ? fs::path(original) : work / original;
        const fs::path b = work / dir / fs::path(original).filename();
        if (tag != "MATCH" || !fs::exists(b) || Slurp(a) != Slurp(b)) {
          ++mismatches;
          d << original << " differs at " << threads << " threads; ";
        }
      }
      if (!any) {
        ++failures;
        d << out << " rerun compared nothing; ";
      }
    }
  }
  d << commands.size() << " commands, " << outputs << " output comparisons at 2 and 5 threads, "
    << mismatches << " mismatches, " << failures << " failures";
  return {mismatches == 0 && failures == 0 && outputs > 0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  o.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::set<int>* target = nullptr;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--cli" && i + 1 < argc) {
      o.cli = argv[++i];
      target = nullptr;
    } else if (a == "--threads" && i + 1 < argc) {
      o.threads = std::max(1, std::atoi(argv[++i]));
      target = nullptr;
    } else if (a == "--known-fail") {
      target = &o.known_fail;
    } else if (a == "--only") {
      target = &o.only;
    } else if (target && !a.empty() && std::isdigit(static_cast<unsigned char>(a[0]))) {
      target->insert(std::atoi(a.c_str()));
    } else {
      std::cerr << "usage: acceptance [--cli PATH] [--threads N] [--known-fail ID ...] "
                   "[--only ID ...]\n";
      return 2;
    }
  }

  std::string ecc_info;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"SECDED exhaustive oracle", [] { return SecdedOracle(); }},
      {"fault inclusion property", [] { return FipProperty(); }},
      {"calibration endpoints", [&] { return CalibrationEndpoints(o); }},
      {"run-to-run stability", [&] { return Stability(o); }},
      {"pattern proportionality", [] { return PatternProportionality(); }},
      {"vulnerability clustering", [] { return Clustering(); }},
      {"temperature effect", [&] { return Temperature(o); }},
      {"ECC coverage", [&] { return EccCoverageCriterion(ecc_info); }},
      {"power model", [] { return Power(); }},
      {"NN qualitative suite", [&] { return NeuralNetwork(o); }},
      {"optimal voltage", [] { return OptimalVoltageCriterion(); }},
      {"rerun determinism", [&] { return Determinism(o); }},
  };

  int failed = 0, unexpected = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!o.only.empty() && !o.only.count(id)) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << id << " " << (r.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << ": " << r.detail << std::endl;
    if (id == 8 && !ecc_info.empty()) std::cout << "  info: " << ecc_info << std::endl;
    if (!r.pass) {
      ++failed;
      if (!o.known_fail.count(id)) ++unexpected;
    }
  }
  std::cout << "summary: " << failed << " failed";
  if (failed > unexpected) std::cout << " (" << failed - unexpected << " documented as known)";
  std::cout << std::endl;
  return unexpected == 0 ? 0 : 1;
}
