// Copyright 2026 The EASN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <vector>

#include <gtest/gtest.h>

#include "easn/bitstream.h"
#include "easn/entropy.h"
#include "easn/error.h"
#include "easn/grad_suite.h"
#include "easn/image_io.h"
#include "easn/ops.h"
#include "easn/range_coder.h"
#include "easn/symbol_table.h"
#include "coder_fixtures.h"
#include "test_util.h"

namespace easn {
namespace {

using testing::GoldenContainer;
using testing::GoldenPath;
using testing::GoldenSkewed;
using testing::GoldenStream;
using testing::GoldenUniform4;
using testing::RandomTable;
using testing::RandomTensor;
using testing::SampleSymbol;
using testing::TableFromFrequencies;

double Logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

FactorizedPrior PriorWith(double loc, double scale) {
  FactorizedPrior p = FactorizedPrior::Init(1);
  p.loc.mutable_data()[0] = loc;
  // Inverse of softplus(raw) + 1e-6.
  p.raw_scale.mutable_data()[0] = std::log(std::expm1(scale - ops::kScaleFloor));
  return p;
}

TEST(NoiseTest, RangeMeanAndDeterminism) {
  Tensor y = Tensor::Zeros({1, 4, 250, 100});
  Tape tape;
  Tensor a = AddUniformNoise(tape, y, 7);
  Tensor b = AddUniformNoise(tape, y, 7);
  Tensor c = AddUniformNoise(tape, y, 8);
  double sum = 0.0, max_abs = 0.0;
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.data()[i], b.data()[i]);
    differs = differs || a.data()[i] != c.data()[i];
    max_abs = std::max(max_abs, std::abs(a.data()[i]));
    sum += a.data()[i];
  }
  EXPECT_TRUE(differs);
  EXPECT_LE(max_abs, 0.5);
  EXPECT_LT(std::abs(sum / static_cast<double>(a.size())), 0.01);
}

TEST(QuantizeTest, RoundHalfAwayFromZero) {
  EXPECT_EQ(RoundHalfAwayFromZero(0.4), 0);
  EXPECT_EQ(RoundHalfAwayFromZero(-0.4), 0);
  EXPECT_EQ(RoundHalfAwayFromZero(0.5), 1);
  EXPECT_EQ(RoundHalfAwayFromZero(-0.5), -1);
  EXPECT_EQ(RoundHalfAwayFromZero(2.5), 3);
  EXPECT_EQ(RoundHalfAwayFromZero(-2.5), -3);
  for (int v = -50; v <= 50; ++v) EXPECT_EQ(RoundHalfAwayFromZero(v), v);
  EXPECT_THROW(RoundHalfAwayFromZero(3e9), Error);
  EXPECT_THROW(RoundHalfAwayFromZero(std::nan("")), Error);
  Tensor q = QuantizeRound(Tensor::FromData({1, 1, 1, 3}, {1.49, -1.5, 0.0}));
  EXPECT_EQ(q.data()[0], 1.0);
  EXPECT_EQ(q.data()[1], -2.0);
  EXPECT_EQ(q.data()[2], 0.0);
}

TEST(LikelihoodTest, HandValue) {
  FactorizedPrior p = PriorWith(0.0, 1.0);
  Tape tape;
  const double l = Likelihood(tape, p, Tensor::Zeros({1, 1, 1, 1})).item();
  EXPECT_NEAR(l, Logistic(0.5) - Logistic(-0.5), 1e-12);
  EXPECT_NEAR(l, 0.244919, 1e-6);
}

TEST(LikelihoodTest, PmfSumsToOneAndIsSymmetric) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const double loc = rng.Uniform(-3, 3), scale = rng.Uniform(0.05, 5);
    FactorizedPrior p = PriorWith(loc, scale);
    double total = 0.0;
    for (int v = -2000; v <= 2000; ++v) total += p.BinProbability(0, v);
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  FactorizedPrior centred = PriorWith(0.0, 1.7);
  for (int v = 0; v < 20; ++v) {
    EXPECT_NEAR(centred.BinProbability(0, v), centred.BinProbability(0, -v), 1e-16);
  }
}

TEST(LikelihoodTest, FloorAndOpAgreeWithScalarForm) {
  Rng rng(4);
  FactorizedPrior p = FactorizedPrior::Init(3);
  for (double& v : p.loc.mutable_data()) v = rng.Uniform(-1, 1);
  for (double& v : p.raw_scale.mutable_data()) v = rng.Uniform(-2, 2);
  Tensor v = RandomTensor({2, 3, 4, 4}, rng, -60, 60);
  Tape tape;
  Tensor l = Likelihood(tape, p, v);
  for (int n = 0; n < 2; ++n) {
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
          const double expect =
              std::max(kLikelihoodFloor, p.BinProbability(c, v.at(n, c, y, x)));
          EXPECT_NEAR(l.at(n, c, y, x), expect, 1e-15);
          EXPECT_GE(l.at(n, c, y, x), kLikelihoodFloor);
        }
      }
    }
  }
  EXPECT_THROW(Likelihood(tape, p, Tensor::Zeros({1, 2, 1, 1})), Error);
}

TEST(LikelihoodTest, GradientsPass) {
  for (uint64_t seed = 1; seed <= 3; ++seed) {
    const SuiteResult r = CheckPriorGradients(seed);
    EXPECT_TRUE(r.passed()) << r.report.max_relative_error;
  }
}

TEST(RateTest, HandValues) {
  Tape tape;
  EXPECT_DOUBLE_EQ(RateBits(tape, Tensor::Filled({1, 2, 2, 2}, 0.5)).item(), 8.0);
  EXPECT_EQ(RateBits(tape, Tensor::Filled({1, 1, 3, 3}, 1.0)).item(), 0.0);
  EXPECT_DOUBLE_EQ(RateBits(tape, Tensor::FromData({1, 1, 1, 2}, {0.25, 0.5})).item(), 3.0);
  EXPECT_THROW(RateBits(tape, Tensor::FromData({1, 1, 1, 1}, {0.0})), Error);
}

// --- symbol tables -------------------------------------------------------

TEST(SymbolTableTest, ConcentratedPriorPutsMassOnZero) {
  FactorizedPrior p = PriorWith(0.0, 1e-3);
  SymbolTable t = BuildSymbolTable(p, 0, {0, 0});
  ASSERT_TRUE(t.Valid());
  EXPECT_EQ(t.symbol_min, -1);
  EXPECT_EQ(t.symbol_max, 1);
  ASSERT_EQ(t.slots(), 4u);
  EXPECT_EQ(t.frequency(1), kCdfTotal - 3);
}

TEST(SymbolTableTest, RandomPriorsAreStrictlyMonotone) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const double loc = rng.Uniform(-20, 20);
    const double scale = std::pow(10.0, rng.Uniform(-3, 2));
    FactorizedPrior p = PriorWith(loc, scale);
    const int lo = static_cast<int>(rng.UniformInt(80)) - 40;
    const int hi = lo + static_cast<int>(rng.UniformInt(60));
    SymbolTable t = BuildSymbolTable(p, 0, {lo, hi});
    ASSERT_TRUE(t.Valid()) << trial;
    EXPECT_EQ(t.cdf.front(), 0u);
    EXPECT_EQ(t.cdf.back(), kCdfTotal);
    EXPECT_EQ(t.cdf.size(), static_cast<size_t>(hi - lo) + 5);
  }
}

TEST(SymbolTableTest, QuantizeLargestRemainder) {
  // Spare counts 65533 over thirds: 21844 each with one left for slot 0.
  const std::vector<double> pmf{1.0, 1.0, 1.0};
  const std::vector<uint32_t> cdf = QuantizeToCdf(pmf);
  EXPECT_EQ(cdf, (std::vector<uint32_t>{0, 21846, 43691, 65536}));
  const std::vector<double> zero{0.0, 0.0};
  EXPECT_EQ(QuantizeToCdf(zero).back(), kCdfTotal);
}

TEST(SymbolTableTest, ObservedRangesPerChannel) {
  FactorizedPrior p = FactorizedPrior::Init(2);
  Tensor y = Tensor::FromData({1, 2, 1, 3}, {-2, 0, 5, 1, 1, 1});
  const std::vector<ChannelRange> r = ObservedRanges(p, y);
  EXPECT_EQ(r[0], (ChannelRange{-2, 5}));
  EXPECT_EQ(r[1], (ChannelRange{1, 1}));
}

// --- range coder ---------------------------------------------------------

TEST(RangeCoderTest, UniformFourThreeSymbols) {
  const SymbolTable t = TableFromFrequencies(0, {16384, 16384, 16383, 16384, 1});
  ASSERT_TRUE(t.Valid());
  const std::vector<int32_t> symbols{0, 3, 1};
  const std::vector<const SymbolTable*> tables(3, &t);
  const std::vector<uint8_t> bytes = RangeEncode(symbols, tables);
  EXPECT_NEAR(IdealCodeLengthBits(symbols, tables), 6.0, 1e-4);
  EXPECT_LE(bytes.size() * 8.0, IdealCodeLengthBits(symbols, tables) + 64);
  EXPECT_EQ(RangeDecode(bytes, tables, 3), symbols);
}

TEST(RangeCoderTest, EmptySequence) {
  const std::vector<uint8_t> bytes = RangeEncode({}, {});
  EXPECT_LE(bytes.size(), 8u);
  EXPECT_TRUE(RangeDecode(bytes, {}, 0).empty());
}

TEST(RangeCoderTest, RandomRoundTripsAndOverheadBound) {
  Rng rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<SymbolTable> pool(1 + rng.UniformInt(4));
    for (SymbolTable& t : pool) t = RandomTable(rng);
    const size_t count = rng.UniformInt(trial % 10 == 0 ? 5000 : 400);
    std::vector<int32_t> symbols(count);
    std::vector<const SymbolTable*> tables(count);
    for (size_t i = 0; i < count; ++i) {
      tables[i] = &pool[rng.UniformInt(pool.size())];
      symbols[i] = SampleSymbol(*tables[i], rng);
    }
    const std::vector<uint8_t> bytes = RangeEncode(symbols, tables);
    ASSERT_EQ(RangeDecode(bytes, tables, count), symbols) << "trial " << trial;
    EXPECT_LE(bytes.size() * 8.0, IdealCodeLengthBits(symbols, tables) + 64)
        << "trial " << trial;
  }
}

TEST(RangeCoderTest, ExtremeSkewRoundTrip) {
  // One slot holds all but the minimum counts: ~4.4e-5 bits per symbol.
  std::vector<uint32_t> freq(10, 1);
  freq[4] = kCdfTotal - 9;
  const SymbolTable t = TableFromFrequencies(-4, freq);
  std::vector<int32_t> symbols(100000, 0);
  symbols[5000] = 3;
  symbols[77777] = -4;
  symbols[90000] = 1 << 30;  // escaped
  const std::vector<const SymbolTable*> tables(symbols.size(), &t);
  const std::vector<uint8_t> bytes = RangeEncode(symbols, tables);
  EXPECT_EQ(RangeDecode(bytes, tables, symbols.size()), symbols);
  EXPECT_LE(bytes.size() * 8.0, IdealCodeLengthBits(symbols, tables) + 64);
}

TEST(RangeCoderTest, TruncatedAndTrailingInputRejected) {
  Rng rng(9);
  const SymbolTable t = RandomTable(rng);
  std::vector<int32_t> symbols(300);
  for (int32_t& s : symbols) s = SampleSymbol(t, rng);
  const std::vector<const SymbolTable*> tables(symbols.size(), &t);
  std::vector<uint8_t> bytes = RangeEncode(symbols, tables);
  std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 3);
  try {
    RangeDecode(cut, tables, symbols.size());
    FAIL() << "truncated stream decoded";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDecode);
  }
  bytes.push_back(0);
  EXPECT_THROW(RangeDecode(bytes, tables, symbols.size()), Error);
}

// --- bitstream -----------------------------------------------------------

Bitstream SampleStream() {
  Bitstream s;
  s.model_id = {1, 2, 3, 4, 5, 6, 7, 8};
  s.height = 37;
  s.width = 513;
  s.ranges = {{-3, 4}, {0, 0}, {-32768, 32767}};
  s.payload = {0xde, 0xad, 0xbe, 0xef, 0x00};
  return s;
}

TEST(BitstreamTest, RoundTripAndLayout) {
  const Bitstream s = SampleStream();
  const std::vector<uint8_t> bytes = SerializeBitstream(s);
  EXPECT_EQ(bytes.size(), BitstreamHeaderBytes(3) + 5);
  EXPECT_EQ(std::vector<uint8_t>(bytes.begin(), bytes.begin() + 5),
            (std::vector<uint8_t>{'E', 'A', 'S', 'N', 1}));
  // H = 37, W = 513 little-endian after the 8-byte id.
  EXPECT_EQ(bytes[13], 37);
  EXPECT_EQ(bytes[14], 0);
  EXPECT_EQ(bytes[15], 1);
  EXPECT_EQ(bytes[16], 2);
  const Bitstream back = ParseBitstream(bytes);
  EXPECT_EQ(back.model_id, s.model_id);
  EXPECT_EQ(back.height, s.height);
  EXPECT_EQ(back.width, s.width);
  EXPECT_EQ(back.ranges, s.ranges);
  EXPECT_EQ(back.payload, s.payload);
}

TEST(BitstreamTest, MalformedInputRejected) {
  const std::vector<uint8_t> good = SerializeBitstream(SampleStream());
  auto expect_decode_error = [](std::vector<uint8_t> bytes) {
    try {
      ParseBitstream(bytes);
      ADD_FAILURE() << "accepted malformed stream";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kDecode);
    }
  };
  std::vector<uint8_t> bad = good;
  bad[0] = 'X';
  expect_decode_error(bad);
  bad = good;
  bad[4] = 2;
  expect_decode_error(bad);
  for (size_t n : {size_t{0}, size_t{3}, size_t{12}, good.size() - 1}) {
    expect_decode_error(std::vector<uint8_t>(good.begin(), good.begin() + n));
  }
  bad = good;
  bad.push_back(0);
  expect_decode_error(bad);
}

// --- golden files --------------------------------------------------------

// EASN_UPDATE_GOLDEN=1 rewrites the files instead of comparing.
void ExpectGolden(const std::string& name, const std::vector<uint8_t>& bytes) {
  const std::filesystem::path path = GoldenPath(name);
  if (std::getenv("EASN_UPDATE_GOLDEN") != nullptr) {
    WriteFileAtomic(path, bytes);
    return;
  }
  ASSERT_TRUE(std::filesystem::exists(path)) << path;
  EXPECT_EQ(ReadFileBytes(path), bytes) << name;
}

TEST(GoldenTest, UniformTable) {
  const GoldenStream g = GoldenUniform4();
  ExpectGolden(g.file, g.bytes);
  EXPECT_EQ(RangeDecode(ReadFileBytes(GoldenPath(g.file)), g.Tables(), g.symbols.size()),
            g.symbols);
}

TEST(GoldenTest, SkewedTableWithEscapes) {
  const GoldenStream g = GoldenSkewed();
  ASSERT_TRUE(g.table.Valid());
  ExpectGolden(g.file, g.bytes);
  EXPECT_EQ(RangeDecode(ReadFileBytes(GoldenPath(g.file)), g.Tables(), g.symbols.size()),
            g.symbols);
}

TEST(GoldenTest, BitstreamContainer) {
  const GoldenStream g = GoldenContainer();
  ExpectGolden(g.file, g.bytes);
  const Bitstream back = ParseBitstream(ReadFileBytes(GoldenPath(g.file)));
  EXPECT_EQ(RangeDecode(back.payload, g.Tables(), g.symbols.size()), g.symbols);
}

}  // namespace
}  // namespace easn
