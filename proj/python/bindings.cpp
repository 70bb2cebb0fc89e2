#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "voltsim/characterizer.hpp"
#include "voltsim/errors.hpp"
#include "voltsim/fvm_io.hpp"
#include "voltsim/nn.hpp"
#include "voltsim/placement.hpp"
#include "voltsim/power_model.hpp"
#include "voltsim/secded.hpp"

namespace py = pybind11;
using namespace voltsim;

PYBIND11_MODULE(_voltsim, m) {
  m.doc() = "BRAM undervolting simulator core";
  m.attr("__version__") = VOLTSIM_VERSION;

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
  py::register_exception<CrashRegion>(m, "CrashRegion", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<CapacityExceeded>(m, "CapacityExceeded", base.ptr());

  py::class_<PlatformProfile>(m, "PlatformProfile")
      .def_readonly("name", &PlatformProfile::name)
      .def_readonly("num_brams", &PlatformProfile::num_brams)
      .def_readonly("rate_at_crash", &PlatformProfile::rate_at_crash)
      .def_readonly("v_nom", &PlatformProfile::v_nom)
      .def_readonly("v_min", &PlatformProfile::v_min)
      .def_readonly("v_crash", &PlatformProfile::v_crash)
      .def("total_mbit", &PlatformProfile::total_mbit)
      .def("grid_mv", [](const PlatformProfile& p) { return VoltageGrid(p).levels_mv(); })
      .def("to_json", [](const PlatformProfile& p) { return ProfileToJson(p); });
  m.def("make_profile", &MakePlatformProfile, py::arg("name_or_path"));

  py::class_<FaultVariationMap>(m, "FaultVariationMap")
      .def_readonly("chip_seed", &FaultVariationMap::chip_seed)
      .def_readonly("chip_scale", &FaultVariationMap::chip_scale)
      .def_readonly("profile", &FaultVariationMap::profile)
      .def("total_cells", &FaultVariationMap::total_cells)
      .def("count_at", &FaultVariationMap::CountAt, py::arg("voltage_mv"))
      .def("bram_rates", [](const FaultVariationMap& f) { return BramFaultRates(f); })
      .def("to_json", [](const FaultVariationMap& f) { return FvmToJson(f); })
      .def("__eq__", [](const FaultVariationMap& a, const FaultVariationMap& b) { return a == b; });
  m.def("generate_fvm", &GenerateFvm, py::arg("profile"), py::arg("chip_seed"),
        py::arg("chip_scale") = 1.0);
  m.def("fvm_from_json", &FvmFromJson, py::arg("text"));
  m.def("verify_fip", [](const FaultVariationMap& f) { return VerifyFip(f).ok; });

  m.def(
      "realize_faults",
      [](const FaultVariationMap& f, int mv, double temp, std::uint64_t run_seed) {
        std::vector<std::tuple<int, int, int, int>> out;
        const FaultMask mask = RealizeFaults(f, mv, temp, run_seed);
        for (const auto& e : mask.entries()) {
          out.emplace_back(e.cell.bram, e.cell.row, e.cell.col, e.stuck);
        }
        return out;
      },
      py::arg("fvm"), py::arg("voltage_mv"), py::arg("temperature_c") = 50.0,
      py::arg("run_seed") = 0, "Faulty cells as (bram, row, col, stuck) tuples.");

  m.def(
      "run_sweep",
      [](const FaultVariationMap& f, const std::string& pattern, double temp, int runs,
         std::vector<int> voltages, bool ecc, std::uint64_t run_seed, int threads) {
        SweepConfig c;
        c.profile = f.profile;
        c.chip_seed = f.chip_seed;
        c.chip_scale = f.chip_scale;
        c.pattern = Pattern::Parse(pattern, run_seed);
        c.temperature_c = temp;
        c.runs_per_level = runs;
        c.voltages_mv = std::move(voltages);
        c.ecc_enabled = ecc;
        c.run_seed = run_seed;
        c.threads = threads;
        const SweepRecord rec = RunSweep(f, c);
        py::list rows;
        for (const auto& r : rec.rows) {
          py::dict d;
          d["voltage_mv"] = r.voltage_mv;
          d["run"] = r.run;
          d["faults_total"] = r.faults_total;
          d["faults_per_mbit"] = r.faults_per_mbit;
          d["correctable"] = r.ecc.correctable;
          d["detectable"] = r.ecc.detectable;
          d["undetectable"] = r.ecc.undetectable;
          d["power_w"] = r.power_w;
          rows.append(d);
        }
        return rows;
      },
      py::arg("fvm"), py::arg("pattern") = "FFFF", py::arg("temperature_c") = 50.0,
      py::arg("runs") = 100, py::arg("voltages_mv") = std::vector<int>{},
      py::arg("ecc") = false, py::arg("run_seed") = 0, py::arg("threads") = 1);

  m.def(
      "kmeans",
      [](const std::vector<double>& values, int k, std::uint64_t seed) {
        const ClusterReport r = KMeansCluster(values, k, seed);
        std::vector<std::optional<double>> centroids;
        std::vector<double> shares;
        for (const auto& c : r.clusters) {
          centroids.push_back(c.centroid);
          shares.push_back(c.share);
        }
        py::dict d;
        d["centroids"] = centroids;
        d["shares"] = shares;
        d["labels"] = r.labels;
        d["degenerate"] = r.degenerate;
        return d;
      },
      py::arg("values"), py::arg("k") = 3, py::arg("seed") = 0);

  m.def(
      "ecc_coverage",
      [](const FaultVariationMap& f, int mv, double temp, int runs, const std::string& pattern,
         const std::string& mapping) {
        const EccHistogram h = EccCoverage(f, mv, temp, runs, Pattern::Parse(pattern),
                                           EccMappingFromString(mapping));
        return py::make_tuple(h.correctable(), h.detectable(), h.undetectable());
      },
      py::arg("fvm"), py::arg("voltage_mv"), py::arg("temperature_c") = 50.0,
      py::arg("runs") = 1, py::arg("pattern") = "FFFF", py::arg("mapping") = "cascade5");

  m.def("encode64", [](std::uint64_t d) { return ecc::Encode64(d).ToHex(); }, py::arg("data"));
  m.def(
      "decode72",
      [](const std::string& hex) {
        const auto o = ecc::Decode72(ecc::Codeword72::FromHex(hex));
        return py::make_tuple(std::string(ecc::ToString(o.kind)), o.position, o.data);
      },
      py::arg("codeword_hex"), "Returns (kind, position, data).");

  m.def(
      "bram_power",
      [](const PlatformProfile& p, double volts, bool ecc, double scale) {
        return PowerCurve::FromProfile(p).Power(volts, ecc, scale);
      },
      py::arg("profile"), py::arg("volts"), py::arg("ecc_on") = false, py::arg("scale") = 1.0);
  m.def(
      "saving_fraction",
      [](const PlatformProfile& p, double v_ref, double v, bool ecc) {
        return SavingFraction(PowerCurve::FromProfile(p), v_ref, v, ecc);
      },
      py::arg("profile"), py::arg("v_ref"), py::arg("v"), py::arg("ecc_on") = false);

  py::class_<nn::SyntheticModel>(m, "SyntheticModel")
      .def("fault_free_error", [](const nn::SyntheticModel& s) {
        return nn::FaultFreeErrorPercent(s.network, s.dataset);
      })
      .def("bit_sparsity", [](const nn::SyntheticModel& s) { return nn::BitSparsity(s.network); })
      .def_property_readonly("num_images", [](const nn::SyntheticModel& s) { return s.dataset.size(); });
  m.def("synthetic_model", [](std::uint64_t seed, std::size_t images) {
    return nn::MakeSyntheticModel(seed, images);
  }, py::arg("seed"), py::arg("images") = 300);

  m.def(
      "nn_evaluate",
      [](const nn::SyntheticModel& s, const FaultVariationMap& f, int mv, const std::string& placement,
         bool ecc, int runs, std::uint64_t seed) {
        const auto classes = ClassesFromReport(KMeansCluster(BramFaultRates(f), 3, seed));
        const auto a = Assign(classes, s.network.layers, PlacementStrategy::Parse(placement), seed);
        nn::EvalConfig c;
        c.voltage_mv = mv;
        c.ecc_on = ecc;
        c.runs = runs;
        c.run_seed = seed;
        return nn::Evaluate(s.network, s.dataset, f, a, c).median_error_pct;
      },
      py::arg("model"), py::arg("fvm"), py::arg("voltage_mv"), py::arg("placement") = "default",
      py::arg("ecc") = false, py::arg("runs") = 1, py::arg("seed") = 0);

  m.def(
      "emit_constraints",
      [](const FaultVariationMap& f, const std::string& strategy, std::uint64_t seed) {
        const auto classes = ClassesFromReport(KMeansCluster(BramFaultRates(f), 3, seed));
        const auto a = Assign(classes, nn::MnistTopology(), PlacementStrategy::Parse(strategy), seed);
        return EmitConstraints(a, classes).text;
      },
      py::arg("fvm"), py::arg("strategy") = "icbp-1", py::arg("seed") = 0);

  m.def(
      "optimal_voltage",
      [](const std::vector<std::pair<int, double>>& power,
         const std::vector<std::pair<int, double>>& error) {
        return OptimalVoltage(power, error).voltage_mv;
      },
      py::arg("power"), py::arg("error"));
}
