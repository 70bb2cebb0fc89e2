#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "voltsim/fault_map.hpp"

namespace voltsim {

// Data written to every row, or one explicit word per row.
class Pattern {
 public:
  static Pattern Repeated(std::uint16_t word, int width = 16);
  // Deterministic pseudo-random word per (bram, row).
  static Pattern Random(std::uint64_t seed, int width = 16);
  static Pattern PerRow(std::vector<std::uint16_t> rows, int width = 16);
  // Parses "FFFF", "0xAAAA", "16'h5555" or "random".
  static Pattern Parse(const std::string& text, std::uint64_t seed = 0);

  int width() const { return width_; }
  std::uint16_t WordFor(int bram, int row) const;
  std::string ToString() const;

 private:
  enum class Kind { kRepeated, kRandom, kPerRow };
  Kind kind_ = Kind::kRepeated;
  int width_ = 16;
  std::uint16_t word_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<std::uint16_t> rows_;
};

// Dense pristine storage: one word of `cols` bits per (bram, row).
class BramArray {
 public:
  BramArray(int num_brams, int rows, int cols);
  explicit BramArray(const PlatformProfile& profile);

  int num_brams() const { return num_brams_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  std::uint16_t Stored(int bram, int row) const;
  void Store(int bram, int row, std::uint16_t word);
  bool StoredBit(const CellId& cell) const;

 private:
  void Check(int bram, int row) const;

  int num_brams_;
  int rows_;
  int cols_;
  std::vector<std::uint16_t> words_;
};

void WriteAll(BramArray& array, const Pattern& pattern);

// Faulty read: stuck-at-0 cells force 0, stuck-at-1 cells force 1. Storage
// is left untouched.
std::uint16_t ReadRow(const BramArray& array, int bram, int row, const FaultMask& mask);

struct ManifestedFault {
  CellId cell;
  std::uint8_t stored = 0;
  std::uint8_t read = 0;
};

struct ManifestedFaults {
  std::size_t count = 0;
  std::vector<ManifestedFault> locations;
};

ManifestedFaults ManifestedFaultCount(const BramArray& array, const FaultMask& mask,
                                      bool collect_locations = true);

// CSV header and rows: voltage_mv,run,bram,row,col,stored,read
void WriteFaultLogHeader(std::ostream& out);
void WriteFaultLog(std::ostream& out, int voltage_mv, int run, const ManifestedFaults& faults);

}  // namespace voltsim
