#include "voltsim/ecc_layout.hpp"

#include "voltsim/errors.hpp"

namespace voltsim {

const char* ToString(EccMapping m) {
  return m == EccMapping::kCascade5 ? "cascade5" : "rowquad";
}

EccMapping EccMappingFromString(const std::string& s) {
  if (s == "cascade5") return EccMapping::kCascade5;
  if (s == "rowquad") return EccMapping::kRowQuad;
  throw InvalidInput("unknown ECC mapping '" + s + "' (expected cascade5 or rowquad)");
}

std::optional<EccCellSite> EccSiteOf(EccMapping mapping, const CellId& cell, int num_brams) {
  if (mapping == EccMapping::kCascade5) {
    const int group = cell.bram / 5;
    if ((group + 1) * 5 > num_brams) return std::nullopt;  // partial trailing group
    const int position = (cell.bram % 5) * 16 + cell.col;
    if (position >= ecc::kCodewordBits) return std::nullopt;
    return EccCellSite{{group, cell.row}, position};
  }
  const int data_index = (cell.row % 4) * 16 + cell.col;
  return EccCellSite{{cell.bram, cell.row / 4}, ecc::DataPosition(data_index)};
}

std::uint64_t EccPayload(EccMapping mapping, const EccWordKey& word, const Pattern& pattern) {
  std::uint64_t data = 0;
  for (int i = 0; i < 4; ++i) {
    const std::uint16_t w = mapping == EccMapping::kCascade5
                                ? pattern.WordFor(word.unit * 5 + i, word.index)
                                : pattern.WordFor(word.unit, word.index * 4 + i);
    data |= static_cast<std::uint64_t>(w) << (16 * i);
  }
  return data;
}

}  // namespace voltsim
