#include "voltsim/fvm_io.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "voltsim/errors.hpp"

namespace voltsim {

using nlohmann::ordered_json;

std::string FvmToJson(const FaultVariationMap& fvm) {
  // Written by hand, one BRAM per line, so large maps stay diff-friendly.
  std::string out;
  out += "{\"format_version\":" + std::to_string(kFvmFormatVersion);
  out += ",\"profile\":" + ordered_json(fvm.profile.name).dump();
  out += ",\"profile_params\":" + ProfileToJson(fvm.profile);
  out += ",\"chip_seed\":" + std::to_string(fvm.chip_seed);
  out += ",\"chip_scale\":" + ordered_json(fvm.chip_scale).dump();
  out += ",\"brams\":[";
  for (std::size_t b = 0; b < fvm.brams.size(); ++b) {
    const auto& rec = fvm.brams[b];
    out += b ? ",\n" : "\n";
    out += "{\"id\":" + std::to_string(b) + ",\"class\":\"" + ToString(rec.vuln_class) + "\"";
    out += ",\"cols\":[";
    for (std::size_t i = 0; i < rec.vulnerable_cols.size(); ++i) {
      if (i) out += ',';
      out += std::to_string(rec.vulnerable_cols[i]);
    }
    out += "],\"cells\":[";
    for (std::size_t i = 0; i < rec.cells.size(); ++i) {
      const auto& c = rec.cells[i];
      if (i) out += ',';
      out += "{\"row\":" + std::to_string(c.row) + ",\"col\":" + std::to_string(c.col) +
             ",\"onset_mv\":" + std::to_string(c.onset_mv) +
             ",\"stuck\":" + std::to_string(static_cast<int>(c.stuck)) + "}";
    }
    out += "]}";
  }
  out += "\n]}\n";
  return out;
}

FaultVariationMap FvmFromJson(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed FVM file: ") + e.what(), e.byte);
  }
  FaultVariationMap fvm;
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFvmFormatVersion) {
      throw InvalidInput("FVM format version " + std::to_string(version) +
                         " is not supported (expected " +
                         std::to_string(kFvmFormatVersion) + ")");
    }
    const auto name = j.at("profile").get<std::string>();
    if (j.contains("profile_params")) {
      fvm.profile = ProfileFromJson(j.at("profile_params").dump());
    } else {
      fvm.profile = MakePlatformProfile(name);
    }
    if (fvm.profile.name != name) throw InvalidInput("profile name mismatch in FVM file");
    fvm.chip_seed = j.at("chip_seed").get<std::uint64_t>();
    fvm.chip_scale = j.at("chip_scale").get<double>();
    const auto& brams = j.at("brams");
    if (static_cast<int>(brams.size()) != fvm.profile.num_brams) {
      throw InvalidInput("FVM lists " + std::to_string(brams.size()) + " BRAMs, profile has " +
                         std::to_string(fvm.profile.num_brams));
    }
    fvm.brams.resize(brams.size());
    for (std::size_t b = 0; b < brams.size(); ++b) {
      const auto& e = brams[b];
      if (e.at("id").get<std::size_t>() != b) throw InvalidInput("BRAM ids must be sequential");
      auto& rec = fvm.brams[b];
      rec.vuln_class = VulnClassFromString(e.at("class").get<std::string>());
      rec.vulnerable_cols = e.at("cols").get<std::vector<int>>();
      for (const auto& c : e.at("cells")) {
        FaultCell cell;
        cell.row = c.at("row").get<int>();
        cell.col = c.at("col").get<int>();
        cell.onset_mv = c.at("onset_mv").get<int>();
        cell.stuck = static_cast<std::uint8_t>(c.at("stuck").get<int>());
        if (cell.row < 0 || cell.row >= fvm.profile.bram_rows || cell.col < 0 ||
            cell.col >= fvm.profile.bram_cols || cell.stuck > 1) {
          throw InvalidInput("cell out of range in BRAM " + std::to_string(b));
        }
        rec.cells.push_back(cell);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed FVM content: ") + e.what());
  }
  return fvm;
}

void ExportFvm(const FaultVariationMap& fvm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path);
  out << FvmToJson(fvm);
}

FaultVariationMap ImportFvm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return FvmFromJson(ss.str());
}

}  // namespace voltsim
