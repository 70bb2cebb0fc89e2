// voltsim: command-line front end.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "voltsim/characterizer.hpp"
#include "voltsim/errors.hpp"
#include "voltsim/fvm_io.hpp"
#include "voltsim/nn.hpp"
#include "voltsim/placement.hpp"
#include "voltsim/power_model.hpp"
#include "voltsim/rng.hpp"
#include "voltsim/secded.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace voltsim;

namespace {

std::uint64_t Fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << text;
  if (!out) throw InvalidInput("failed writing " + path);
}

std::string Hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::uint64_t DefaultSeed() {
  if (const char* env = std::getenv("VOLTSIM_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw InvalidInput(std::string("VOLTSIM_SEED is not an integer: ") + env);
    }
  }
  return 1;
}

// State shared by every subcommand invocation.
struct Context {
  std::vector<std::string> argv;
  int threads = 1;
  std::uint64_t seed = 1;
  // Output option -> path, in registration order.
  std::vector<std::pair<std::string, std::string>> outputs;
  json config = json::object();
  json seeds = json::object();
  bool write_manifest = true;
};

void AddOutput(Context& ctx, const std::string& option, const std::string& path) {
  ctx.outputs.emplace_back(option, path);
}

void WriteManifest(const Context& ctx, const std::string& command) {
  if (!ctx.write_manifest || ctx.outputs.empty()) return;
  json m;
  m["tool"] = "voltsim";
  m["version"] = VOLTSIM_VERSION;
  m["command"] = command;
  m["argv"] = ctx.argv;
  m["cwd"] = fs::current_path().string();
  m["config"] = ctx.config;
  m["seeds"] = ctx.seeds;
  m["threads"] = ctx.threads;
  auto& outs = m["outputs"] = json::array();
  for (const auto& [opt, path] : ctx.outputs) {
    outs.push_back({{"option", opt}, {"path", path}, {"fnv1a64", Hex64(Fnv1a64(ReadFile(path)))}});
  }
  WriteFile(ctx.outputs.front().second + ".manifest.json", m.dump(2) + "\n");
}

// Fault map from --fvm or generated from --platform/--chip-seed/--chip-scale.
struct FvmSource {
  std::string fvm_path;
  std::string platform = "vc707";
  std::uint64_t chip_seed = 0;
  bool chip_seed_set = false;
  double chip_scale = 1.0;

  void Register(CLI::App* app) {
    app->add_option("--fvm", fvm_path, "Fault map JSON (instead of generating one)");
    app->add_option("--platform", platform, "vc707, kc705 or a profile JSON file");
    app->add_option("--chip-seed", chip_seed, "Chip seed (default: global seed)")
        ->each([this](const std::string&) { chip_seed_set = true; });
    app->add_option("--chip-scale", chip_scale, "Die-to-die rate multiplier")
        ->check(CLI::PositiveNumber);
  }

  FaultVariationMap Load(Context& ctx) {
    if (!chip_seed_set) chip_seed = ctx.seed;
    if (!fvm_path.empty()) {
      ctx.config["fvm"] = fvm_path;
      return ImportFvm(fvm_path);
    }
    ctx.config["platform"] = platform;
    ctx.config["chip_scale"] = chip_scale;
    ctx.seeds["chip_seed"] = chip_seed;
    return GenerateFvm(MakePlatformProfile(platform), chip_seed, chip_scale);
  }
};

std::vector<int> GridOrGiven(const PlatformProfile& p, const std::vector<int>& given) {
  if (!given.empty()) return given;
  return VoltageGrid(p).levels_mv();
}

// Network and dataset from files or from the synthetic generator.
struct ModelSource {
  std::string weights, images, labels;
  std::uint64_t synth_seed = 0;
  bool synth_seed_set = false;
  std::size_t synth_images = 300;

  void Register(CLI::App* app) {
    app->add_option("--weights", weights, "Weight file");
    app->add_option("--images", images, "IDX image file");
    app->add_option("--labels", labels, "IDX label file");
    app->add_option("--synth-seed", synth_seed, "Synthetic model seed (when no files given)")
        ->each([this](const std::string&) { synth_seed_set = true; });
    app->add_option("--synth-images", synth_images, "Synthetic test images")
        ->check(CLI::PositiveNumber);
  }

  std::pair<nn::Network, nn::Dataset> Load(Context& ctx) {
    if (!weights.empty() || !images.empty() || !labels.empty()) {
      if (weights.empty() || images.empty() || labels.empty()) {
        throw InvalidInput("--weights, --images and --labels must be given together");
      }
      ctx.config["weights"] = weights;
      ctx.config["images"] = images;
      ctx.config["labels"] = labels;
      return {nn::LoadNetwork(weights), nn::LoadIdx(images, labels)};
    }
    if (!synth_seed_set) synth_seed = ctx.seed;
    ctx.seeds["synth_seed"] = synth_seed;
    ctx.config["synth_images"] = synth_images;
    auto m = nn::MakeSyntheticModel(synth_seed, synth_images);
    return {std::move(m.network), std::move(m.dataset)};
  }
};

void CmdSweep(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("sweep", "Voltage sweep with repeated runs per level");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto pattern = std::make_shared<std::string>("FFFF");
  auto temp = std::make_shared<int>(50);
  auto runs = std::make_shared<int>(100);
  auto ecc = std::make_shared<bool>(false);
  auto mapping = std::make_shared<std::string>("cascade5");
  auto voltages = std::make_shared<std::vector<int>>();
  auto out = std::make_shared<std::string>();
  auto fault_log = std::make_shared<std::string>();
  auto zero_jitter = std::make_shared<bool>(false);
  app->add_option("--pattern", *pattern, "FFFF, 0xAAAA, 16'h5555 or random");
  app->add_option("--temp", *temp, "Temperature in degC")->check(CLI::Range(20, 100));
  app->add_option("--runs", *runs, "Runs per voltage level")->check(CLI::PositiveNumber);
  app->add_flag("--ecc", *ecc, "Classify faulty ECC words");
  app->add_option("--ecc-mapping", *mapping, "cascade5 or rowquad");
  app->add_option("--voltages", *voltages, "Voltages in mV (default: v_min..v_crash)");
  app->add_flag("--zero-jitter", *zero_jitter, "Disable run-to-run noise");
  app->add_option("--fault-log", *fault_log, "Also write every manifested fault");
  app->add_option("--out", *out, "Sweep CSV")->required();
  app->callback([&ctx, src, pattern, temp, runs, ecc, mapping, voltages, out, fault_log,
                 zero_jitter] {
    const FaultVariationMap fvm = src->Load(ctx);
    SweepConfig c;
    c.profile = fvm.profile;
    c.chip_seed = fvm.chip_seed;
    c.chip_scale = fvm.chip_scale;
    c.pattern = Pattern::Parse(*pattern, ctx.seed);
    c.temperature_c = *temp;
    c.runs_per_level = *runs;
    c.voltages_mv = *voltages;
    c.ecc_enabled = *ecc;
    c.ecc_mapping = EccMappingFromString(*mapping);
    c.run_seed = ctx.seed;
    c.zero_jitter = *zero_jitter;
    c.threads = ctx.threads;
    const SweepRecord rec = RunSweep(fvm, c);
    std::ostringstream csv;
    WriteSweepCsv(csv, rec);
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    if (!fault_log->empty()) {
      std::ostringstream log;
      WriteFaultLogHeader(log);
      BramArray array(fvm.profile);
      WriteAll(array, c.pattern);
      RealizeOptions opts;
      opts.zero_jitter = c.zero_jitter;
      for (int mv : rec.voltages_mv()) {
        for (int r = 0; r < c.runs_per_level; ++r) {
          const auto mask = RealizeFaults(fvm, mv, c.temperature_c, RunSeed(c.run_seed, r), opts);
          WriteFaultLog(log, mv, r, ManifestedFaultCount(array, mask, true));
        }
      }
      WriteFile(*fault_log, log.str());
      AddOutput(ctx, "--fault-log", *fault_log);
    }
    ctx.config["pattern"] = c.pattern.ToString();
    ctx.config["temperature_c"] = *temp;
    ctx.config["runs"] = *runs;
    ctx.config["ecc"] = *ecc;
    ctx.config["ecc_mapping"] = *mapping;
    ctx.config["voltages_mv"] = rec.voltages_mv();
    ctx.config["zero_jitter"] = *zero_jitter;
    ctx.seeds["run_seed"] = c.run_seed;
    for (int mv : rec.voltages_mv()) {
      std::cout << mv << " mV: median " << Fixed(rec.MedianFaultsPerMbit(mv), 2)
                << " faults/Mbit\n";
    }
    WriteManifest(ctx, "sweep");
  });
}

void CmdFvm(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("fvm", "Generate and export a fault variation map");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto out = std::make_shared<std::string>();
  app->add_option("--out", *out, "FVM JSON")->required();
  app->callback([&ctx, src, out] {
    const FaultVariationMap fvm = src->Load(ctx);
    ExportFvm(fvm, *out);
    AddOutput(ctx, "--out", *out);
    const FvmSummary s = Summarize(fvm);
    std::cout << "cells " << s.cells_at_crash << ", " << Fixed(s.faults_per_mbit_at_crash, 2)
              << " faults/Mbit at v_crash, zero-fault BRAMs " << Fixed(100 * s.zero_fault_fraction, 1)
              << "%\n";
    WriteManifest(ctx, "fvm");
  });
}

void CmdCluster(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("cluster", "k-means vulnerability clustering of BRAMs");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto k = std::make_shared<int>(3);
  auto out = std::make_shared<std::string>();
  app->add_option("--k", *k, "Number of clusters")->check(CLI::PositiveNumber);
  app->add_option("--out", *out, "Cluster report JSON")->required();
  app->callback([&ctx, src, k, out] {
    const FaultVariationMap fvm = src->Load(ctx);
    const auto rates = BramFaultRates(fvm);
    const ClusterReport rep = KMeansCluster(rates, *k, ctx.seed);
    WriteFile(*out, ClusterReportToJson(rep));
    AddOutput(ctx, "--out", *out);
    ctx.config["k"] = *k;
    ctx.seeds["kmeans_seed"] = ctx.seed;
    for (std::size_t c = 0; c < rep.clusters.size(); ++c) {
      const auto& cl = rep.clusters[c];
      std::cout << "cluster " << c << ": share " << Fixed(100 * cl.share, 1) << "%, mean rate "
                << Fixed(100 * cl.mean, 4) << "%\n";
    }
    WriteManifest(ctx, "cluster");
  });
}

void CmdEccEval(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("ecc-eval", "SECDED coverage histogram over faulty words");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto voltages = std::make_shared<std::vector<int>>();
  auto temp = std::make_shared<int>(50);
  auto runs = std::make_shared<int>(10);
  auto pattern = std::make_shared<std::string>("FFFF");
  auto mapping = std::make_shared<std::string>("cascade5");
  auto out = std::make_shared<std::string>();
  app->add_option("--voltages", *voltages, "Voltages in mV (default: the grid below v_min)");
  app->add_option("--temp", *temp, "Temperature in degC")->check(CLI::Range(20, 100));
  app->add_option("--runs", *runs, "Runs per voltage")->check(CLI::PositiveNumber);
  app->add_option("--pattern", *pattern, "Data pattern");
  app->add_option("--ecc-mapping", *mapping, "cascade5 or rowquad");
  app->add_option("--out", *out, "Coverage CSV")->required();
  app->callback([&ctx, src, voltages, temp, runs, pattern, mapping, out] {
    const FaultVariationMap fvm = src->Load(ctx);
    const Pattern pat = Pattern::Parse(*pattern, ctx.seed);
    const EccMapping m = EccMappingFromString(*mapping);
    std::vector<int> vs = *voltages;
    if (vs.empty()) {
      for (int mv : VoltageGrid(fvm.profile).levels_mv()) {
        if (mv < fvm.profile.v_min_mv()) vs.push_back(mv);
      }
    }
    std::ostringstream csv;
    csv << "voltage_mv,faulty_words,correctable,detectable,undetectable\n";
    for (int mv : vs) {
      const EccHistogram h = EccCoverage(fvm, mv, *temp, *runs, pat, m, ctx.seed);
      csv << mv << ',' << h.counts.total() << ',' << Fixed(h.correctable(), 6) << ','
          << Fixed(h.detectable(), 6) << ',' << Fixed(h.undetectable(), 6) << '\n';
    }
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    ctx.config["voltages_mv"] = vs;
    ctx.config["temperature_c"] = *temp;
    ctx.config["runs"] = *runs;
    ctx.config["pattern"] = pat.ToString();
    ctx.config["ecc_mapping"] = *mapping;
    ctx.seeds["run_seed"] = ctx.seed;
    std::cout << csv.str();
    WriteManifest(ctx, "ecc-eval");
  });
}

void CmdPower(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("power", "BRAM power and savings over voltage");
  auto platform = std::make_shared<std::string>("vc707");
  auto curve_path = std::make_shared<std::string>();
  auto voltages = std::make_shared<std::vector<int>>();
  auto ref = std::make_shared<int>(0);
  auto out = std::make_shared<std::string>();
  auto curve_out = std::make_shared<std::string>();
  app->add_option("--platform", *platform, "Profile supplying calibration points");
  app->add_option("--curve", *curve_path, "Curve file (mv,mw,ecc) overriding the profile");
  app->add_option("--voltages", *voltages, "Voltages in mV (default: v_nom and the grid)");
  app->add_option("--ref", *ref, "Reference voltage for savings, mV (default: v_min)");
  app->add_option("--write-curve", *curve_out, "Also write the calibration curve file");
  app->add_option("--out", *out, "Power CSV")->required();
  app->callback([&ctx, platform, curve_path, voltages, ref, out, curve_out] {
    const PlatformProfile p = MakePlatformProfile(*platform);
    PowerCurve curve = PowerCurve::FromProfile(p);
    if (!curve_path->empty()) {
      std::ifstream in(*curve_path);
      if (!in) throw InvalidInput("cannot read " + *curve_path);
      curve = ReadPowerCurve(in, p.v_crash, p.v_nom);
    }
    std::vector<int> vs = *voltages;
    if (vs.empty()) {
      vs.push_back(p.v_nom_mv());
      for (int mv : VoltageGrid(p).levels_mv()) vs.push_back(mv);
    }
    const int ref_mv = *ref ? *ref : p.v_min_mv();
    std::ostringstream csv;
    csv << "voltage_mv,ecc,power_w,saving_vs_ref,ecc_extrapolated\n";
    for (bool ecc : {false, true}) {
      for (int mv : vs) {
        const double v = mv / 1000.0;
        csv << mv << ',' << (ecc ? "on" : "off") << ',' << Fixed(curve.Power(v, ecc), 6) << ',';
        csv << (mv <= ref_mv ? Fixed(SavingFraction(curve, ref_mv / 1000.0, v, ecc), 6) : "");
        csv << ',' << (ecc && curve.EccExtrapolated(v) ? 1 : 0) << '\n';
      }
    }
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    if (!curve_out->empty()) {
      std::ostringstream c;
      WritePowerCurve(c, curve);
      WriteFile(*curve_out, c.str());
      AddOutput(ctx, "--write-curve", *curve_out);
    }
    ctx.config["platform"] = *platform;
    ctx.config["curve"] = *curve_path;
    ctx.config["voltages_mv"] = vs;
    ctx.config["ref_mv"] = ref_mv;
    std::cout << csv.str();
    WriteManifest(ctx, "power");
  });
}

void CmdSynth(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("synth", "Write the synthetic network and test set");
  auto images = std::make_shared<std::size_t>(1000);
  auto out = std::make_shared<std::string>();
  auto images_out = std::make_shared<std::string>();
  auto labels_out = std::make_shared<std::string>();
  app->add_option("--count", *images, "Test images")->check(CLI::PositiveNumber);
  app->add_option("--out", *out, "Weight file")->required();
  app->add_option("--images-out", *images_out, "IDX images (default: <out>.images.idx)");
  app->add_option("--labels-out", *labels_out, "IDX labels (default: <out>.labels.idx)");
  app->callback([&ctx, images, out, images_out, labels_out] {
    const std::string im = images_out->empty() ? *out + ".images.idx" : *images_out;
    const std::string lb = labels_out->empty() ? *out + ".labels.idx" : *labels_out;
    const auto m = nn::MakeSyntheticModel(ctx.seed, *images);
    nn::SaveNetwork(*out, m.network);
    nn::SaveIdx(im, lb, m.dataset);
    AddOutput(ctx, "--out", *out);
    AddOutput(ctx, "--images-out", im);
    AddOutput(ctx, "--labels-out", lb);
    ctx.config["count"] = *images;
    ctx.seeds["synth_seed"] = ctx.seed;
    std::cout << "fault-free error " << Fixed(nn::FaultFreeErrorPercent(m.network, m.dataset, ctx.threads), 2)
              << "%, weight bit sparsity " << Fixed(100 * nn::BitSparsity(m.network), 1) << "%\n";
    WriteManifest(ctx, "synth");
  });
}

std::vector<VulnClass> ClassesOf(const FaultVariationMap& fvm, std::uint64_t seed) {
  return ClassesFromReport(KMeansCluster(BramFaultRates(fvm), 3, seed));
}

void CmdNnEval(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("nn-eval", "NN classification error under BRAM faults");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto model = std::make_shared<ModelSource>();
  model->Register(app);
  auto voltages = std::make_shared<std::vector<int>>();
  auto placements = std::make_shared<std::vector<std::string>>(std::vector<std::string>{"default"});
  auto ecc = std::make_shared<std::string>("off");
  auto runs = std::make_shared<int>(5);
  auto temp = std::make_shared<int>(50);
  auto out = std::make_shared<std::string>();
  app->add_option("--voltages", *voltages, "Voltages in mV (default: the grid)");
  app->add_option("--placement", *placements, "default, icbp-N, worst (repeatable)");
  app->add_option("--ecc", *ecc, "off, on or both")->check(CLI::IsMember({"off", "on", "both"}));
  app->add_option("--runs", *runs, "Runs per configuration")->check(CLI::PositiveNumber);
  app->add_option("--temp", *temp, "Temperature in degC")->check(CLI::Range(20, 100));
  app->add_option("--out", *out, "Evaluation CSV")->required();
  app->callback([&ctx, src, model, voltages, placements, ecc, runs, temp, out] {
    const FaultVariationMap fvm = src->Load(ctx);
    const auto [net, data] = model->Load(ctx);
    const auto classes = ClassesOf(fvm, ctx.seed);
    const auto vs = GridOrGiven(fvm.profile, *voltages);
    std::vector<bool> eccs;
    if (*ecc != "on") eccs.push_back(false);
    if (*ecc != "off") eccs.push_back(true);
    std::ostringstream csv;
    csv << "voltage_mv,ecc,placement,run,error_pct\n";
    for (const auto& name : *placements) {
      const PlacementStrategy st = PlacementStrategy::Parse(name);
      const auto assignment = Assign(classes, net.layers, st, ctx.seed);
      for (bool e : eccs) {
        for (int mv : vs) {
          nn::EvalConfig c;
          c.voltage_mv = mv;
          c.temperature_c = *temp;
          c.ecc_on = e;
          c.runs = *runs;
          c.run_seed = ctx.seed;
          c.threads = ctx.threads;
          const auto r = nn::Evaluate(net, data, fvm, assignment, c);
          for (int run = 0; run < *runs; ++run) {
            csv << mv << ',' << (e ? "on" : "off") << ',' << st.ToString() << ',' << run << ','
                << Fixed(r.per_run_error_pct[static_cast<std::size_t>(run)], 4) << '\n';
          }
          std::cout << st.ToString() << " ecc=" << (e ? "on" : "off") << ' ' << mv
                    << " mV: median error " << Fixed(r.median_error_pct, 2) << "%\n";
        }
      }
    }
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    ctx.config["voltages_mv"] = vs;
    ctx.config["placements"] = *placements;
    ctx.config["ecc"] = *ecc;
    ctx.config["runs"] = *runs;
    ctx.config["temperature_c"] = *temp;
    ctx.seeds["run_seed"] = ctx.seed;
    ctx.seeds["placement_seed"] = ctx.seed;
    WriteManifest(ctx, "nn-eval");
  });
}

void CmdLayerVuln(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("layer-vuln", "Per-layer statistical fault injection");
  auto model = std::make_shared<ModelSource>();
  model->Register(app);
  auto injections = std::make_shared<int>(1000);
  auto trials = std::make_shared<int>(3);
  auto out = std::make_shared<std::string>();
  app->add_option("--injections", *injections, "Stuck-at-0 faults per layer (0 or >= 100)");
  app->add_option("--trials", *trials, "Repetitions per layer")->check(CLI::PositiveNumber);
  app->add_option("--out", *out, "Vulnerability CSV")->required();
  app->callback([&ctx, model, injections, trials, out] {
    const auto [net, data] = model->Load(ctx);
    const auto v = nn::LayerVulnerability(net, data, *injections, ctx.seed, *trials, ctx.threads);
    std::ostringstream csv;
    csv << "layer,normalized_vulnerability\n";
    for (std::size_t j = 0; j < v.size(); ++j) csv << j << ',' << Fixed(v[j], 4) << '\n';
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    ctx.config["injections"] = *injections;
    ctx.config["trials"] = *trials;
    ctx.seeds["injection_seed"] = ctx.seed;
    std::cout << csv.str();
    WriteManifest(ctx, "layer-vuln");
  });
}

void CmdPlacement(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("placement", "Assign logical BRAMs and emit Pblock constraints");
  auto src = std::make_shared<FvmSource>();
  src->Register(app);
  auto strategy = std::make_shared<std::string>("icbp-1");
  auto columns = std::make_shared<int>(kDefaultGridColumns);
  auto out = std::make_shared<std::string>();
  auto json_out = std::make_shared<std::string>();
  app->add_option("--strategy", *strategy, "default, icbp-N or worst");
  app->add_option("--columns", *columns, "BRAM grid columns")->check(CLI::PositiveNumber);
  app->add_option("--out", *out, "Constraint text (TCL/XDC)")->required();
  app->add_option("--json", *json_out, "Also write the assignment as JSON");
  app->callback([&ctx, src, strategy, columns, out, json_out] {
    const FaultVariationMap fvm = src->Load(ctx);
    const auto classes = ClassesOf(fvm, ctx.seed);
    const auto layers = nn::MnistTopology();
    const auto a = Assign(classes, layers, PlacementStrategy::Parse(*strategy), ctx.seed);
    const ConstraintOutput c = EmitConstraints(a, classes, *columns);
    for (const auto& w : c.warnings) std::cerr << "warning: " << w << '\n';
    WriteFile(*out, c.text);
    AddOutput(ctx, "--out", *out);
    if (!json_out->empty()) {
      WriteFile(*json_out, AssignmentToJson(a, classes));
      AddOutput(ctx, "--json", *json_out);
    }
    ctx.config["strategy"] = *strategy;
    ctx.config["columns"] = *columns;
    ctx.seeds["placement_seed"] = ctx.seed;
    std::cout << a.strategy().ToString() << ": " << a.size() << " logical BRAMs, dispersion proxy "
              << Fixed(DispersionProxy(a, *columns), 0) << " grid cells\n";
    WriteManifest(ctx, "placement");
  });
}

// Reads `voltage_mv,<value>` or an nn-eval CSV (median per voltage).
std::vector<std::pair<int, double>> ReadSeries(const std::string& path,
                                               const std::string& placement,
                                               const std::string& ecc) {
  std::istringstream in(ReadFile(path));
  std::string line;
  std::getline(in, line);
  const bool nn_eval = line.rfind("voltage_mv,ecc,placement,run,error_pct", 0) == 0;
  std::map<int, std::vector<double>> values;
  std::vector<int> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    int mv;
    double v;
    try {
      if (nn_eval) {
        if (f.size() != 5) throw InvalidInput("bad row");
        if (f[1] != ecc || f[2] != placement) continue;
        mv = std::stoi(f[0]);
        v = std::stod(f[4]);
      } else {
        if (f.size() < 2) throw InvalidInput("bad row");
        mv = std::stoi(f[0]);
        v = std::stod(f[1]);
      }
    } catch (const std::exception&) {
      throw InvalidInput("malformed line in " + path + ": " + line);
    }
    if (!values.count(mv)) order.push_back(mv);
    values[mv].push_back(v);
  }
  std::vector<std::pair<int, double>> out;
  for (int mv : order) {
    auto v = values[mv];
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    out.emplace_back(mv, n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
  }
  if (out.empty()) throw InvalidInput("no usable rows in " + path);
  return out;
}

void CmdOptimalVoltage(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("optimal-voltage", "Minimize normalized power x error");
  auto platform = std::make_shared<std::string>("vc707");
  auto power_path = std::make_shared<std::string>();
  auto error_path = std::make_shared<std::string>();
  auto placement = std::make_shared<std::string>("default");
  auto ecc = std::make_shared<std::string>("off");
  auto out = std::make_shared<std::string>();
  app->add_option("--platform", *platform, "Profile supplying the power curve");
  app->add_option("--power", *power_path, "voltage_mv,power_w CSV (default: profile curve)");
  app->add_option("--error", *error_path, "voltage_mv,error_pct CSV or nn-eval CSV")->required();
  app->add_option("--placement", *placement, "Placement rows to use from an nn-eval CSV");
  app->add_option("--ecc", *ecc, "ECC rows to use from an nn-eval CSV")
      ->check(CLI::IsMember({"off", "on"}));
  app->add_option("--out", *out, "Metric table CSV")->required();
  app->callback([&ctx, platform, power_path, error_path, placement, ecc, out] {
    const auto error = ReadSeries(*error_path, *placement, *ecc);
    std::vector<std::pair<int, double>> power;
    if (!power_path->empty()) {
      power = ReadSeries(*power_path, *placement, *ecc);
    } else {
      const PowerCurve curve = PowerCurve::FromProfile(MakePlatformProfile(*platform));
      for (const auto& [mv, e] : error) power.emplace_back(mv, curve.Power(mv / 1000.0, *ecc == "on"));
    }
    const OptimalVoltageResult r = OptimalVoltage(power, error);
    std::ostringstream csv;
    csv << "voltage_mv,power_norm,error_norm,product,optimal\n";
    for (const auto& row : r.table) {
      csv << row.voltage_mv << ',' << Fixed(row.power_norm, 6) << ',' << Fixed(row.error_norm, 6)
          << ',' << Fixed(row.product, 6) << ',' << (row.voltage_mv == r.voltage_mv ? 1 : 0) << '\n';
    }
    WriteFile(*out, csv.str());
    AddOutput(ctx, "--out", *out);
    ctx.config["platform"] = *platform;
    ctx.config["power"] = *power_path;
    ctx.config["error"] = *error_path;
    ctx.config["placement"] = *placement;
    ctx.config["ecc"] = *ecc;
    std::cout << "optimal voltage " << r.voltage_mv << " mV\n";
    WriteManifest(ctx, "optimal-voltage");
  });
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable ReadCsv(const std::string& path) {
  std::istringstream in(ReadFile(path));
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (first) {
      t.header = std::move(f);
      first = false;
    } else {
      t.rows.push_back(std::move(f));
    }
  }
  if (t.header.empty()) throw InvalidInput("empty CSV " + path);
  return t;
}

double MedianOf(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void CmdReport(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("report", "Plot-ready tables from sweep and nn-eval CSVs");
  auto sweeps = std::make_shared<std::vector<std::string>>();
  auto labels = std::make_shared<std::vector<std::string>>();
  auto nn_eval = std::make_shared<std::string>();
  auto out = std::make_shared<std::string>();
  app->add_option("--sweep", *sweeps, "Sweep CSV (repeatable)");
  app->add_option("--label", *labels, "Name per sweep (default: file stem)");
  app->add_option("--nn-eval", *nn_eval, "nn-eval CSV");
  app->add_option("--out", *out, "Output prefix")->required();
  app->callback([&ctx, sweeps, labels, nn_eval, out] {
    if (sweeps->empty() && nn_eval->empty()) throw InvalidInput("report needs --sweep or --nn-eval");
    if (!labels->empty() && labels->size() != sweeps->size()) {
      throw InvalidInput("--label must be given once per --sweep");
    }
    if (!sweeps->empty()) {
      // Fault rate and power per voltage, one block per sweep.
      std::ostringstream csv;
      csv << "source,voltage_mv,median_faults_per_mbit,mean_faults_per_mbit,min,max,std,power_w\n";
      for (std::size_t s = 0; s < sweeps->size(); ++s) {
        const std::string& path = (*sweeps)[s];
        const CsvTable t = ReadCsv(path);
        if (t.header.size() != 8 || t.header[0] != "voltage_mv") {
          throw InvalidInput(path + " is not a sweep CSV");
        }
        const std::string label = labels->empty() ? fs::path(path).stem().string() : (*labels)[s];
        std::vector<int> order;
        std::map<int, std::vector<double>> rates;
        std::map<int, double> power;
        for (const auto& r : t.rows) {
          if (r.size() != 8) throw InvalidInput("malformed row in " + path);
          const int mv = std::stoi(r[0]);
          if (!rates.count(mv)) order.push_back(mv);
          rates[mv].push_back(std::stod(r[3]));
          power[mv] = std::stod(r[7]);
        }
        for (int mv : order) {
          const auto& v = rates[mv];
          double mean = 0;
          for (double x : v) mean += x;
          mean /= static_cast<double>(v.size());
          double ss = 0;
          for (double x : v) ss += (x - mean) * (x - mean);
          csv << label << ',' << mv << ',' << Fixed(MedianOf(v), 4) << ',' << Fixed(mean, 4) << ','
              << Fixed(*std::min_element(v.begin(), v.end()), 4) << ','
              << Fixed(*std::max_element(v.begin(), v.end()), 4) << ','
              << Fixed(std::sqrt(ss / static_cast<double>(v.size())), 4) << ','
              << Fixed(power[mv], 6) << '\n';
        }
      }
      const std::string path = *out + ".fault_power.csv";
      WriteFile(path, csv.str());
      AddOutput(ctx, "--out", path);
    }
    if (!nn_eval->empty()) {
      // Median error per (placement, ecc, voltage).
      const CsvTable t = ReadCsv(*nn_eval);
      if (t.header.size() != 5 || t.header[2] != "placement") {
        throw InvalidInput(*nn_eval + " is not an nn-eval CSV");
      }
      std::vector<std::tuple<std::string, std::string, int>> order;
      std::map<std::tuple<std::string, std::string, int>, std::vector<double>> err;
      for (const auto& r : t.rows) {
        if (r.size() != 5) throw InvalidInput("malformed row in " + *nn_eval);
        const auto key = std::make_tuple(r[2], r[1], std::stoi(r[0]));
        if (!err.count(key)) order.push_back(key);
        err[key].push_back(std::stod(r[4]));
      }
      std::ostringstream csv;
      csv << "placement,ecc,voltage_mv,median_error_pct,runs\n";
      for (const auto& key : order) {
        csv << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
            << Fixed(MedianOf(err[key]), 4) << ',' << err[key].size() << '\n';
      }
      const std::string path = *out + ".nn_error.csv";
      WriteFile(path, csv.str());
      AddOutput(ctx, "--out", path);
    }
    ctx.config["sweeps"] = *sweeps;
    ctx.config["labels"] = *labels;
    ctx.config["nn_eval"] = *nn_eval;
    WriteManifest(ctx, "report");
  });
}

void CmdEccVectors(CLI::App& root, Context& ctx) {
  auto* app = root.add_subcommand("ecc-vectors", "Golden SECDED encode vectors");
  auto count = std::make_shared<int>(100);
  auto out = std::make_shared<std::string>();
  app->add_option("--count", *count, "Random words (after the fixed corner cases)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--out", *out, "Vector CSV")->required();
  app->callback([&ctx, count, out] {
    std::vector<std::uint64_t> data = {0, ~0ULL, 0xAAAAAAAAAAAAAAAAULL, 0x5555555555555555ULL};
    for (int i = 0; i < 64; ++i) data.push_back(1ULL << i);
    rng::Stream s(rng::Derive({ctx.seed, 0x4543435645ULL}));
    for (int i = 0; i < *count; ++i) data.push_back(s.NextU64());
    std::ostringstream os;
    ecc::WriteTestVectors(os, data);
    WriteFile(*out, os.str());
    AddOutput(ctx, "--out", *out);
    ctx.config["count"] = *count;
    ctx.seeds["vector_seed"] = ctx.seed;
    WriteManifest(ctx, "ecc-vectors");
  });
}

int Run(std::vector<std::string> args);

void CmdRerun(CLI::App& root, Context& ctx, int& status) {
  auto* app = root.add_subcommand("rerun", "Re-execute a manifest and compare output digests");
  auto manifest = std::make_shared<std::string>();
  auto out_dir = std::make_shared<std::string>();
  app->add_option("manifest", *manifest, "Manifest JSON")->required();
  app->add_option("--out-dir", *out_dir, "Directory for regenerated outputs (default: temp dir)");
  app->callback([&ctx, &status, manifest, out_dir] {
    ctx.write_manifest = false;
    json m;
    try {
      m = json::parse(ReadFile(*manifest));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("manifest: ") + e.what(), e.byte);
    }
    if (m.value("tool", "") != "voltsim") throw InvalidInput("not a voltsim manifest");
    fs::path dir = out_dir->empty()
                       ? fs::temp_directory_path() / ("voltsim-rerun-" + std::to_string(::getpid()))
                       : fs::path(*out_dir);
    fs::create_directories(dir);
    dir = fs::absolute(dir);

    auto argv = m.at("argv").get<std::vector<std::string>>();
    // Pin outputs into the rerun directory; the thread count may change.
    std::map<std::string, std::string> redirected;
    for (const auto& o : m.at("outputs")) {
      const std::string opt = o.at("option").get<std::string>();
      const std::string path = o.at("path").get<std::string>();
      for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
        if (argv[i] == opt && !redirected.count(opt)) {
          argv[i + 1] = (dir / fs::path(argv[i + 1]).filename()).string();
          redirected[opt] = argv[i + 1];
        }
      }
      if (!redirected.count(opt) && opt == "--out") {
        throw InvalidInput("manifest argv lacks " + opt);
      }
      (void)path;
    }
    std::vector<std::string> cmd;
    bool skip = false;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      if (skip) {
        skip = false;
        continue;
      }
      if (argv[i] == "--threads") {
        skip = true;
        continue;
      }
      if (argv[i].rfind("--threads=", 0) == 0) continue;
      cmd.push_back(argv[i]);
    }
    cmd.insert(cmd.begin(), {"--threads", std::to_string(ctx.threads)});
    cmd.insert(cmd.begin(), {"--no-manifest"});

    const fs::path cwd = fs::current_path();
    const std::string recorded_cwd = m.value("cwd", "");
    if (!recorded_cwd.empty() && fs::exists(recorded_cwd)) fs::current_path(recorded_cwd);
    const int rc = Run(cmd);
    fs::current_path(cwd);
    if (rc != 0) {
      status = rc;
      return;
    }

    bool ok = true;
    for (const auto& o : m.at("outputs")) {
      const std::string opt = o.at("option").get<std::string>();
      const std::string original = o.at("path").get<std::string>();
      std::string regenerated;
      if (redirected.count(opt)) {
        regenerated = opt == "--out" ? (dir / fs::path(original).filename()).string()
                                     : redirected[opt];
      } else {
        // Outputs derived from --out (synth companions, report tables).
        regenerated = (dir / fs::path(original).filename()).string();
      }
      const std::string want = o.at("fnv1a64").get<std::string>();
      std::string got = "missing";
      if (fs::exists(regenerated)) got = Hex64(Fnv1a64(ReadFile(regenerated)));
      const bool match = got == want;
      ok = ok && match;
      std::cout << (match ? "MATCH " : "DIFFER ") << original << " " << want << " " << got << '\n';
    }
    status = ok ? 0 : 3;
  });
}

int Run(std::vector<std::string> args) {
  Context ctx;
  ctx.argv = args;
  int status = 0;
  CLI::App app{"BRAM undervolting simulator and placement toolkit", "voltsim"};
  app.set_version_flag("--version", VOLTSIM_VERSION);
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool no_manifest = false;
  app.add_option("--threads", ctx.threads, "Worker threads (outputs do not depend on it)")
      ->check(CLI::Range(1, 256));
  app.add_option("--seed", seed, "Master seed (default: $VOLTSIM_SEED or 1)")
      ->each([&](const std::string&) { seed_set = true; });
  app.add_flag("--no-manifest", no_manifest, "Do not write a run manifest");
  app.parse_complete_callback([&] {
    ctx.seed = seed_set ? seed : DefaultSeed();
    ctx.write_manifest = !no_manifest;
    ctx.seeds["seed"] = ctx.seed;
    // Pin the resolved seed so a rerun does not depend on the environment.
    if (!seed_set) {
      ctx.argv.insert(ctx.argv.begin(), {"--seed", std::to_string(ctx.seed)});
    }
  });

  CmdSweep(app, ctx);
  CmdFvm(app, ctx);
  CmdCluster(app, ctx);
  CmdEccEval(app, ctx);
  CmdPower(app, ctx);
  CmdSynth(app, ctx);
  CmdNnEval(app, ctx);
  CmdLayerVuln(app, ctx);
  CmdPlacement(app, ctx);
  CmdOptimalVoltage(app, ctx);
  CmdReport(app, ctx);
  CmdEccVectors(app, ctx);
  CmdRerun(app, ctx, status);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "voltsim: " << e.what() << '\n';
    return 1;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return Run(std::move(args));
}
