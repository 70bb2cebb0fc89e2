#include "voltsim/secded.hpp"

#include <bit>
#include <cstdio>
#include <istream>
#include <ostream>

#include "voltsim/errors.hpp"

namespace voltsim::ecc {
namespace {

struct Layout {
  std::array<std::int8_t, kCodewordBits> data_index{};  // position -> data bit or -1
  std::array<std::int8_t, 64> position{};               // data bit -> position
  std::array<std::uint64_t, 7> cover{};                 // data bits covered by p_i
};

constexpr bool IsPowerOfTwo(int v) { return v > 0 && (v & (v - 1)) == 0; }

constexpr Layout MakeLayout() {
  Layout l{};
  int next = 0;
  for (int pos = 0; pos < kCodewordBits; ++pos) {
    if (pos == 0 || IsPowerOfTwo(pos)) {
      l.data_index[static_cast<std::size_t>(pos)] = -1;
      continue;
    }
    l.data_index[static_cast<std::size_t>(pos)] = static_cast<std::int8_t>(next);
    l.position[static_cast<std::size_t>(next)] = static_cast<std::int8_t>(pos);
    for (int i = 0; i < 7; ++i) {
      if (pos & (1 << i)) l.cover[static_cast<std::size_t>(i)] |= std::uint64_t{1} << next;
    }
    ++next;
  }
  return l;
}

constexpr Layout kLayout = MakeLayout();
static_assert(kLayout.position[63] == 71);

int ParityBitFor(int position) {
  if (position == 0) return 7;
  return std::countr_zero(static_cast<unsigned>(position));
}

std::uint8_t HammingParity(std::uint64_t data) {
  std::uint8_t p = 0;
  for (int i = 0; i < 7; ++i) {
    p |= static_cast<std::uint8_t>((std::popcount(data & kLayout.cover[static_cast<std::size_t>(i)]) & 1) << i);
  }
  return p;
}

bool OverallParityOdd(const Codeword72& cw) {
  return ((std::popcount(cw.data) + std::popcount(static_cast<unsigned>(cw.parity))) & 1) != 0;
}

}  // namespace

int DataPosition(int index) {
  if (index < 0 || index >= 64) throw InvalidInput("data bit index out of range");
  return kLayout.position[static_cast<std::size_t>(index)];
}

int DataIndexAt(int position) {
  if (position < 0 || position >= kCodewordBits) throw InvalidInput("codeword position out of range");
  return kLayout.data_index[static_cast<std::size_t>(position)];
}

bool Codeword72::Bit(int position) const {
  const int d = DataIndexAt(position);
  if (d >= 0) return (data >> d) & 1u;
  return (parity >> ParityBitFor(position)) & 1u;
}

void Codeword72::Flip(int position) {
  const int d = DataIndexAt(position);
  if (d >= 0) {
    data ^= std::uint64_t{1} << d;
  } else {
    parity = static_cast<std::uint8_t>(parity ^ (1u << ParityBitFor(position)));
  }
}

std::string Codeword72::ToHex() const {
  // Assemble positions 71..0 into 72 bits: high 8 bits + low 64 bits.
  std::uint64_t lo = 0;
  std::uint8_t hi = 0;
  for (int pos = 0; pos < kCodewordBits; ++pos) {
    if (!Bit(pos)) continue;
    if (pos < 64) {
      lo |= std::uint64_t{1} << pos;
    } else {
      hi = static_cast<std::uint8_t>(hi | (1u << (pos - 64)));
    }
  }
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02X%016llX", hi, static_cast<unsigned long long>(lo));
  return buf;
}

Codeword72 Codeword72::FromHex(const std::string& hex) {
  if (hex.size() != 18) throw InvalidInput("codeword hex must have 18 digits");
  std::uint8_t hi = 0;
  std::uint64_t lo = 0;
  try {
    hi = static_cast<std::uint8_t>(std::stoul(hex.substr(0, 2), nullptr, 16));
    lo = std::stoull(hex.substr(2), nullptr, 16);
  } catch (const std::exception&) {
    throw InvalidInput("codeword hex '" + hex + "' is not hexadecimal");
  }
  Codeword72 cw;
  for (int pos = 0; pos < kCodewordBits; ++pos) {
    const bool bit = pos < 64 ? ((lo >> pos) & 1u) : ((hi >> (pos - 64)) & 1u);
    if (bit) cw.Flip(pos);
  }
  return cw;
}

Codeword72 Encode64(std::uint64_t data) {
  Codeword72 cw;
  cw.data = data;
  cw.parity = HammingParity(data);
  if (OverallParityOdd(cw)) cw.parity = static_cast<std::uint8_t>(cw.parity | 0x80u);
  return cw;
}

std::uint8_t Syndrome(const Codeword72& received) {
  return static_cast<std::uint8_t>((HammingParity(received.data) ^ received.parity) & 0x7Fu);
}

DecodeOutcome Decode72(const Codeword72& received) {
  const std::uint8_t s = Syndrome(received);
  const bool odd = OverallParityOdd(received);
  DecodeOutcome out;
  out.data = received.data;
  if (s == 0) {
    if (odd) {
      out.kind = DecodeKind::kParityBitCorrected;
      out.position = 0;
    }
    return out;
  }
  if (!odd || s >= kCodewordBits) {
    // Even parity with a nonzero syndrome, or a syndrome naming no position:
    // at least two bits are wrong and the word cannot be repaired.
    out.kind = DecodeKind::kDoubleDetected;
    return out;
  }
  out.kind = DecodeKind::kCorrectedSingle;
  out.position = s;
  const int d = DataIndexAt(s);
  if (d >= 0) out.data ^= std::uint64_t{1} << d;
  return out;
}

const char* ToString(DecodeKind kind) {
  switch (kind) {
    case DecodeKind::kNoError: return "no_error";
    case DecodeKind::kCorrectedSingle: return "corrected_single";
    case DecodeKind::kDoubleDetected: return "double_detected";
    case DecodeKind::kParityBitCorrected: return "parity_bit_corrected";
  }
  return "?";
}

const char* ToString(FaultClass cls) {
  switch (cls) {
    case FaultClass::kCorrectable: return "correctable";
    case FaultClass::kDetectable: return "detectable";
    case FaultClass::kUndetectable: return "undetectable";
  }
  return "?";
}

FaultClass ClassifyWord(const Codeword72& original, const Codeword72& received) {
  const DecodeOutcome d = Decode72(received);
  if (d.kind == DecodeKind::kDoubleDetected) return FaultClass::kDetectable;
  if (d.data == original.data) return FaultClass::kCorrectable;
  return FaultClass::kUndetectable;
}

void WriteTestVectors(std::ostream& out, const std::vector<std::uint64_t>& data) {
  char buf[24];
  for (auto d : data) {
    std::snprintf(buf, sizeof buf, "%016llX", static_cast<unsigned long long>(d));
    out << buf << ',' << Encode64(d).ToHex() << '\n';
  }
}

std::vector<std::pair<std::uint64_t, Codeword72>> ReadTestVectors(std::istream& in) {
  std::vector<std::pair<std::uint64_t, Codeword72>> out;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma != 16 || line.size() != 16 + 1 + 18) {
      throw ParseError("malformed test vector line '" + line + "'", line_start);
    }
    std::uint64_t d = 0;
    try {
      d = std::stoull(line.substr(0, 16), nullptr, 16);
    } catch (const std::exception&) {
      throw ParseError("malformed data word '" + line.substr(0, 16) + "'", line_start);
    }
    out.emplace_back(d, Codeword72::FromHex(line.substr(17)));
  }
  return out;
}

}  // namespace voltsim::ecc
