#include <gtest/gtest.h>

#include <bit>
#include <sstream>

#include "voltsim/bram_sim.hpp"
#include "voltsim/errors.hpp"

using namespace voltsim;

TEST(Pattern, ParsesHexForms) {
  EXPECT_EQ(Pattern::Parse("FFFF").WordFor(0, 0), 0xFFFF);
  EXPECT_EQ(Pattern::Parse("0xAAAA").WordFor(3, 9), 0xAAAA);
  EXPECT_EQ(Pattern::Parse("16'h5555").WordFor(1, 1), 0x5555);
  EXPECT_EQ(Pattern::Parse("random").ToString(), "random");
  EXPECT_THROW(Pattern::Parse("GGGG"), InvalidInput);
  EXPECT_THROW(Pattern::Parse("1FFFF"), InvalidInput);
}

TEST(Pattern, RandomIsDeterministic) {
  const Pattern a = Pattern::Random(7), b = Pattern::Random(7), c = Pattern::Random(8);
  int differ = 0;
  for (int r = 0; r < 64; ++r) {
    EXPECT_EQ(a.WordFor(2, r), b.WordFor(2, r));
    differ += a.WordFor(2, r) != c.WordFor(2, r);
  }
  EXPECT_GT(differ, 32);
}

TEST(BramArray, StuckAtSemantics) {
  BramArray arr(2, 4, 16);
  arr.Store(0, 1, 0x00F0);
  std::vector<MaskEntry> e = {{{0, 1, 4}, 0}, {{0, 1, 0}, 1}, {{0, 1, 1}, 0}};
  const FaultMask mask(540, 50, 0, 2, e);
  // bit 4 stored 1 forced 0, bit 0 stored 0 forced 1, bit 1 stored 0 stays 0
  EXPECT_EQ(ReadRow(arr, 0, 1, mask), 0x00E1);
  EXPECT_EQ(arr.Stored(0, 1), 0x00F0);
  const auto m = ManifestedFaultCount(arr, mask);
  EXPECT_EQ(m.count, 2u);
  ASSERT_EQ(m.locations.size(), 2u);
  EXPECT_EQ(ReadRow(arr, 1, 1, mask), 0);
  EXPECT_THROW(arr.Store(2, 0, 1), InvalidInput);
}

TEST(BramArray, PatternRatioMatchesPopcount) {
  const auto fvm = GenerateFvm(MakePlatformProfile("kc705"), 3);
  const auto mask = RealizeFaults(fvm, 540, 50, 0);
  BramArray ones(fvm.profile), alt(fvm.profile);
  WriteAll(ones, Pattern::Parse("FFFF"));
  WriteAll(alt, Pattern::Parse("AAAA"));
  std::size_t want_ones = 0, want_alt = 0;
  for (const auto& e : mask.entries()) {
    const bool one_bit = true;
    const bool alt_bit = (0xAAAA >> e.cell.col) & 1;
    want_ones += one_bit != (e.stuck == 1);
    want_alt += alt_bit != (e.stuck == 1);
  }
  const auto got_ones = ManifestedFaultCount(ones, mask, false).count;
  const auto got_alt = ManifestedFaultCount(alt, mask, false).count;
  EXPECT_EQ(got_ones, want_ones);
  EXPECT_EQ(got_alt, want_alt);
  const double ratio = static_cast<double>(got_alt) / static_cast<double>(got_ones);
  EXPECT_NEAR(ratio, std::popcount(0xAAAAu) / 16.0, 0.1);
}

TEST(BramArray, ZeroPatternOnlyShowsStuckAtOne) {
  const auto fvm = GenerateFvm(MakePlatformProfile("kc705"), 3);
  const auto mask = RealizeFaults(fvm, 540, 50, 0);
  BramArray zeros(fvm.profile);
  WriteAll(zeros, Pattern::Parse("0000"));
  std::size_t ones = 0;
  for (const auto& e : mask.entries()) ones += e.stuck;
  EXPECT_EQ(ManifestedFaultCount(zeros, mask, false).count, ones);
}

TEST(FaultLog, CsvShape) {
  BramArray arr(1, 2, 16);
  WriteAll(arr, Pattern::Parse("FFFF"));
  const FaultMask mask(550, 50, 0, 1, {{{0, 1, 3}, 0}});
  std::ostringstream out;
  WriteFaultLogHeader(out);
  WriteFaultLog(out, 550, 2, ManifestedFaultCount(arr, mask));
  EXPECT_EQ(out.str(), "voltage_mv,run,bram,row,col,stored,read\n550,2,0,1,3,1,0\n");
}
