#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

// Extended Hamming (72,64) SECDED codec.
//
// Codeword positions 0..71:
//   position 0            overall parity (even over all 72 bits)
//   positions 1,2,4,..,64 Hamming parity p_i, covering every position whose
//                         index has bit i set
//   all other positions   data bits 0..63 in ascending position order
//                         (data bit 0 at position 3, bit 63 at position 71)
// `parity` stores p_0..p_6 in bits 0..6 and the overall parity in bit 7.

namespace voltsim::ecc {

inline constexpr int kCodewordBits = 72;

struct Codeword72 {
  std::uint64_t data = 0;
  std::uint8_t parity = 0;

  bool Bit(int position) const;
  void Flip(int position);
  // 18 hex digits, most significant = position 71.
  std::string ToHex() const;
  static Codeword72 FromHex(const std::string& hex);

  friend bool operator==(const Codeword72&, const Codeword72&) = default;
};

// Codeword position holding data bit `index`.
int DataPosition(int index);
// Data bit index at a codeword position, or -1 for parity positions.
int DataIndexAt(int position);

Codeword72 Encode64(std::uint64_t data);

// 7-bit syndrome (XOR of the positions of flipped bits, for <= 1 flip).
std::uint8_t Syndrome(const Codeword72& received);

enum class DecodeKind : std::uint8_t {
  kNoError,
  kCorrectedSingle,
  kDoubleDetected,
  kParityBitCorrected,
};

struct DecodeOutcome {
  DecodeKind kind = DecodeKind::kNoError;
  // Position repaired for kCorrectedSingle / kParityBitCorrected, else -1.
  int position = -1;
  // Best-effort payload (uncorrected for kDoubleDetected).
  std::uint64_t data = 0;
};

DecodeOutcome Decode72(const Codeword72& received);

enum class FaultClass : std::uint8_t { kCorrectable, kDetectable, kUndetectable };

const char* ToString(DecodeKind kind);
const char* ToString(FaultClass cls);

FaultClass ClassifyWord(const Codeword72& original, const Codeword72& received);

// Golden interchange: lines of `data_hex,codeword_hex`.
void WriteTestVectors(std::ostream& out, const std::vector<std::uint64_t>& data);
std::vector<std::pair<std::uint64_t, Codeword72>> ReadTestVectors(std::istream& in);

}  // namespace voltsim::ecc
