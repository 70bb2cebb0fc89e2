#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "voltsim/bram_sim.hpp"
#include "voltsim/secded.hpp"

namespace voltsim {

// How 72-bit ECC words sit on 16-column physical BRAMs.
enum class EccMapping : std::uint8_t {
  // Word (g, r) = row r of BRAMs 5g..5g+4 laid side by side (80 columns);
  // codeword position k lives in BRAM 5g + k/16, column k%16. Positions
  // 72..79 are unused padding.
  kCascade5,
  // Word (b, q) = rows 4q..4q+3 of BRAM b as the 64 data bits (row 4q+i
  // holds data bits 16i..16i+15); the eight check bits occupy the two
  // per-row parity columns of the 18-bit physical row, which are outside
  // the fault map and therefore never fail.
  kRowQuad,
};

const char* ToString(EccMapping m);
EccMapping EccMappingFromString(const std::string& s);

struct EccWordKey {
  int unit = 0;  // cascade group or BRAM
  int index = 0;  // row or quad

  friend auto operator<=>(const EccWordKey&, const EccWordKey&) = default;
};

struct EccCellSite {
  EccWordKey word;
  int position = 0;  // codeword position 0..71
};

// Codeword site of a physical cell, or nullopt when the cell holds no
// codeword bit under the mapping.
std::optional<EccCellSite> EccSiteOf(EccMapping mapping, const CellId& cell, int num_brams);

// The 64-bit payload of a word as written from `pattern`.
std::uint64_t EccPayload(EccMapping mapping, const EccWordKey& word, const Pattern& pattern);

}  // namespace voltsim
