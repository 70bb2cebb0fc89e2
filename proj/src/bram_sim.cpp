#include "voltsim/bram_sim.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <ostream>
#include <string>

#include "voltsim/errors.hpp"
#include "voltsim/rng.hpp"

namespace voltsim {
namespace {

std::uint16_t WidthMask(int width) {
  return static_cast<std::uint16_t>(width >= 16 ? 0xFFFFu : ((1u << width) - 1u));
}

void CheckWidth(std::uint32_t word, int width) {
  if (width < 1 || width > 16) throw InvalidInput("pattern width must lie in [1, 16]");
  if ((word & ~static_cast<std::uint32_t>(WidthMask(width))) != 0) {
    throw InvalidInput("pattern word does not fit in " + std::to_string(width) + " bits");
  }
}

}  // namespace

Pattern Pattern::Repeated(std::uint16_t word, int width) {
  CheckWidth(word, width);
  Pattern p;
  p.kind_ = Kind::kRepeated;
  p.width_ = width;
  p.word_ = word;
  return p;
}

Pattern Pattern::Random(std::uint64_t seed, int width) {
  CheckWidth(0, width);
  Pattern p;
  p.kind_ = Kind::kRandom;
  p.width_ = width;
  p.seed_ = seed;
  return p;
}

Pattern Pattern::PerRow(std::vector<std::uint16_t> rows, int width) {
  for (auto w : rows) CheckWidth(w, width);
  if (rows.empty()) throw InvalidInput("per-row pattern needs at least one row");
  Pattern p;
  p.kind_ = Kind::kPerRow;
  p.width_ = width;
  p.rows_ = std::move(rows);
  return p;
}

Pattern Pattern::Parse(const std::string& text, std::uint64_t seed) {
  std::string t;
  for (char c : text) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "random") return Random(seed);
  if (t.rfind("16'h", 0) == 0) t = t.substr(4);
  if (t.rfind("0x", 0) == 0) t = t.substr(2);
  if (t.empty() || t.size() > 4 ||
      !std::all_of(t.begin(), t.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); })) {
    throw InvalidInput("pattern '" + text + "' is not a 16-bit hex word or 'random'");
  }
  return Repeated(static_cast<std::uint16_t>(std::stoul(t, nullptr, 16)));
}

std::uint16_t Pattern::WordFor(int bram, int row) const {
  switch (kind_) {
    case Kind::kRepeated: return word_;
    case Kind::kRandom:
      return static_cast<std::uint16_t>(
          rng::Derive({seed_, static_cast<std::uint64_t>(bram), static_cast<std::uint64_t>(row)}) &
          WidthMask(width_));
    case Kind::kPerRow: return rows_[static_cast<std::size_t>(row) % rows_.size()];
  }
  return 0;
}

std::string Pattern::ToString() const {
  if (kind_ == Kind::kRandom) return "random";
  if (kind_ == Kind::kPerRow) return "per-row";
  char buf[8];
  std::snprintf(buf, sizeof buf, "%04X", word_);
  return buf;
}

BramArray::BramArray(int num_brams, int rows, int cols)
    : num_brams_(num_brams), rows_(rows), cols_(cols) {
  if (num_brams <= 0 || rows <= 0 || cols <= 0 || cols > 16) {
    throw InvalidInput("invalid BRAM array geometry");
  }
  words_.assign(static_cast<std::size_t>(num_brams) * static_cast<std::size_t>(rows), 0);
}

BramArray::BramArray(const PlatformProfile& profile)
    : BramArray(profile.num_brams, profile.bram_rows, profile.bram_cols) {}

void BramArray::Check(int bram, int row) const {
  if (bram < 0 || bram >= num_brams_ || row < 0 || row >= rows_) {
    throw InvalidInput("BRAM address (" + std::to_string(bram) + ", " + std::to_string(row) +
                       ") out of range");
  }
}

std::uint16_t BramArray::Stored(int bram, int row) const {
  Check(bram, row);
  return words_[static_cast<std::size_t>(bram) * static_cast<std::size_t>(rows_) +
                static_cast<std::size_t>(row)];
}

void BramArray::Store(int bram, int row, std::uint16_t word) {
  Check(bram, row);
  if ((word & ~WidthMask(cols_)) != 0) throw InvalidInput("word wider than BRAM row");
  words_[static_cast<std::size_t>(bram) * static_cast<std::size_t>(rows_) +
         static_cast<std::size_t>(row)] = word;
}

bool BramArray::StoredBit(const CellId& cell) const {
  if (cell.col < 0 || cell.col >= cols_) throw InvalidInput("column out of range");
  return (Stored(cell.bram, cell.row) >> cell.col) & 1u;
}

void WriteAll(BramArray& array, const Pattern& pattern) {
  if (pattern.width() != array.cols()) {
    throw InvalidInput("pattern width " + std::to_string(pattern.width()) +
                       " does not match BRAM width " + std::to_string(array.cols()));
  }
  for (int b = 0; b < array.num_brams(); ++b) {
    for (int r = 0; r < array.rows(); ++r) array.Store(b, r, pattern.WordFor(b, r));
  }
}

std::uint16_t ReadRow(const BramArray& array, int bram, int row, const FaultMask& mask) {
  std::uint16_t word = array.Stored(bram, row);
  for (const auto& e : mask.EntriesForRow(bram, row)) {
    const auto bit = static_cast<std::uint16_t>(1u << e.cell.col);
    word = e.stuck ? static_cast<std::uint16_t>(word | bit)
                   : static_cast<std::uint16_t>(word & ~bit);
  }
  return word;
}

ManifestedFaults ManifestedFaultCount(const BramArray& array, const FaultMask& mask,
                                      bool collect_locations) {
  ManifestedFaults out;
  for (const auto& e : mask.entries()) {
    const auto stored = static_cast<std::uint8_t>(array.StoredBit(e.cell));
    if (stored == e.stuck) continue;
    ++out.count;
    if (collect_locations) out.locations.push_back({e.cell, stored, e.stuck});
  }
  return out;
}

void WriteFaultLogHeader(std::ostream& out) { out << "voltage_mv,run,bram,row,col,stored,read\n"; }

void WriteFaultLog(std::ostream& out, int voltage_mv, int run, const ManifestedFaults& faults) {
  for (const auto& f : faults.locations) {
    out << voltage_mv << ',' << run << ',' << f.cell.bram << ',' << f.cell.row << ','
        << f.cell.col << ',' << static_cast<int>(f.stored) << ',' << static_cast<int>(f.read)
        << '\n';
  }
}

}  // namespace voltsim
