#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "voltsim/errors.hpp"
#include "voltsim/rng.hpp"
#include "voltsim/secded.hpp"

using namespace voltsim;
using namespace voltsim::ecc;

namespace {

// Independent check: every Hamming parity group and the overall parity are even.
bool ParityChecksHold(const Codeword72& w) {
  for (int i = 0; i < 7; ++i) {
    int acc = 0;
    for (int pos = 1; pos < kCodewordBits; ++pos) {
      if (pos & (1 << i)) acc ^= w.Bit(pos);
    }
    if (acc) return false;
  }
  int all = 0;
  for (int pos = 0; pos < kCodewordBits; ++pos) all ^= w.Bit(pos);
  return all == 0;
}

std::vector<std::uint64_t> Samples() {
  std::vector<std::uint64_t> v = {0, ~0ull, 0xAAAAAAAAAAAAAAAAull, 0x0123456789ABCDEFull, 1,
                                  1ull << 63};
  rng::Stream rng(99);
  for (int i = 0; i < 6; ++i) v.push_back(rng.NextU64());
  return v;
}

}  // namespace

TEST(Secded, LayoutPositions) {
  EXPECT_EQ(DataPosition(0), 3);
  EXPECT_EQ(DataPosition(63), 71);
  std::set<int> seen;
  for (int i = 0; i < 64; ++i) {
    const int p = DataPosition(i);
    EXPECT_NE(p & (p - 1), 0) << "data at a power-of-two position";
    EXPECT_EQ(DataIndexAt(p), i);
    seen.insert(p);
  }
  EXPECT_EQ(seen.size(), 64u);
  for (int p : {0, 1, 2, 4, 8, 16, 32, 64}) EXPECT_EQ(DataIndexAt(p), -1);
}

TEST(Secded, EncodingSatisfiesParityChecks) {
  for (auto d : Samples()) {
    const auto w = Encode64(d);
    EXPECT_EQ(w.data, d);
    EXPECT_TRUE(ParityChecksHold(w));
    EXPECT_EQ(Syndrome(w), 0);
    const auto out = Decode72(w);
    EXPECT_EQ(out.kind, DecodeKind::kNoError);
    EXPECT_EQ(out.data, d);
  }
}

TEST(Secded, EverySingleFlipCorrected) {
  for (auto d : Samples()) {
    const auto w = Encode64(d);
    std::set<int> syndromes;
    for (int pos = 0; pos < kCodewordBits; ++pos) {
      auto r = w;
      r.Flip(pos);
      const auto out = Decode72(r);
      EXPECT_EQ(out.data, d) << pos;
      EXPECT_EQ(out.position, pos);
      EXPECT_EQ(out.kind,
                pos == 0 ? DecodeKind::kParityBitCorrected : DecodeKind::kCorrectedSingle);
      EXPECT_EQ(ClassifyWord(w, r), FaultClass::kCorrectable);
      if (pos > 0) {
        EXPECT_EQ(Syndrome(r), pos);
        syndromes.insert(Syndrome(r));
      }
    }
    EXPECT_EQ(syndromes.size(), 71u);
  }
}

TEST(Secded, EveryDoubleFlipDetected) {
  for (auto d : {0ull, ~0ull, 0x0123456789ABCDEFull}) {
    const auto w = Encode64(d);
    for (int a = 0; a < kCodewordBits; ++a) {
      for (int b = a + 1; b < kCodewordBits; ++b) {
        auto r = w;
        r.Flip(a);
        r.Flip(b);
        ASSERT_EQ(Decode72(r).kind, DecodeKind::kDoubleDetected) << a << "," << b;
        ASSERT_EQ(ClassifyWord(w, r), FaultClass::kDetectable);
      }
    }
  }
}

TEST(Secded, TripleFlipCanMiscorrect) {
  const auto w = Encode64(0);
  auto r = w;
  // 3 ^ 5 ^ 6 == 0: syndrome vanishes, overall parity is odd, so position 0 is "repaired".
  r.Flip(3);
  r.Flip(5);
  r.Flip(6);
  const auto out = Decode72(r);
  EXPECT_NE(out.kind, DecodeKind::kDoubleDetected);
  EXPECT_NE(out.data, 0u);
  EXPECT_EQ(ClassifyWord(w, r), FaultClass::kUndetectable);
}

TEST(Secded, HexRoundTrip) {
  for (auto d : Samples()) {
    const auto w = Encode64(d);
    const std::string hex = w.ToHex();
    EXPECT_EQ(hex.size(), 18u);
    EXPECT_EQ(Codeword72::FromHex(hex), w);
  }
  EXPECT_THROW(Codeword72::FromHex("xyz"), Error);
}

TEST(Secded, TestVectorsRoundTrip) {
  const auto data = Samples();
  std::stringstream ss;
  WriteTestVectors(ss, data);
  const auto back = ReadTestVectors(ss);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].first, data[i]);
    EXPECT_EQ(back[i].second, Encode64(data[i]));
  }
}
