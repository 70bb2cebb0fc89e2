#pragma once

#include <iosfwd>
#include <string>

#include "voltsim/fault_map.hpp"

namespace voltsim {

inline constexpr int kFvmFormatVersion = 1;

// Canonical JSON text: fixed field order, cells sorted, voltages in integer mV.
std::string FvmToJson(const FaultVariationMap& fvm);
// Throws ParseError (with byte offset) on malformed text and InvalidInput on
// a version mismatch or inconsistent content.
FaultVariationMap FvmFromJson(const std::string& text);

void ExportFvm(const FaultVariationMap& fvm, const std::string& path);
FaultVariationMap ImportFvm(const std::string& path);

}  // namespace voltsim
