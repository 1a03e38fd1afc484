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
#include <vector>

#include <gtest/gtest.h>

#include "easn/error.h"
#include "easn/grad_suite.h"
#include "easn/norm_layers.h"
#include "easn/ops.h"
#include "test_util.h"

namespace easn {
namespace {

using testing::RandomTensor;

GdnParams SingleChannelGdn(double beta, double gamma) {
  GdnParams p = GdnParams::Init(1);
  p.beta.mutable_data()[0] = beta;
  p.gamma.mutable_data()[0] = gamma;
  return p;
}

GdnParams RandomGdn(int channels, Rng& rng) {
  GdnParams p = GdnParams::Init(channels);
  for (double& b : p.beta.mutable_data()) b = rng.Uniform(0.05, 3.0);
  for (double& g : p.gamma.mutable_data()) g = rng.Uniform(0.0, 2.0);
  return p;
}

void Randomize(EasnParams& p, Rng& rng) {
  auto fill = [&](ConvLayer& c) {
    for (double& v : c.weight.mutable_data()) v = rng.Uniform(-0.6, 0.6);
    for (double& v : c.bias.mutable_data()) v = rng.Uniform(-0.5, 0.5);
  };
  for (ConvLayer& c : p.s_branch) fill(c);
  for (ConvLayer& c : p.m_branch) fill(c);
  if (p.h_branch) fill(*p.h_branch);
  for (double& v : p.beta.mutable_data()) v = rng.Uniform(-1.0, 1.0);
}

TEST(GdnTest, HandValues) {
  Tape tape;
  Tensor x = Tensor::FromData({1, 1, 1, 1}, {2.0});
  EXPECT_NEAR(GdnForward(tape, x, SingleChannelGdn(1, 1)).item(), 2.0 / std::sqrt(5.0),
              1e-15);
  EXPECT_NEAR(GdnForward(tape, x, SingleChannelGdn(1, 1)).item(), 0.894427, 1e-6);
  EXPECT_NEAR(GdnInverseForward(tape, x, SingleChannelGdn(1, 1)).item(), 4.472136, 1e-6);
}

TEST(GdnTest, UnitDenominatorIsIdentityAndZeroMapsToZero) {
  Rng rng(1);
  Tensor x = RandomTensor({2, 3, 4, 4}, rng, -3, 3);
  GdnParams p = GdnParams::Init(3, 0.0);
  Tape tape;
  Tensor y = GdnForward(tape, x, p);
  Tensor yi = GdnInverseForward(tape, x, p);
  for (size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(y.data()[i], x.data()[i]);
    EXPECT_EQ(yi.data()[i], x.data()[i]);
  }
  Tensor z = GdnForward(tape, Tensor::Zeros({1, 3, 2, 2}), RandomGdn(3, rng));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(GdnTest, ChannelMismatchRejected) {
  Tape tape;
  EXPECT_THROW(GdnForward(tape, Tensor::Zeros({1, 2, 2, 2}), GdnParams::Init(3)), Error);
}

TEST(GdnTest, FloorsKeepDenominatorPositive) {
  GdnParams p = GdnParams::Init(2);
  for (double& b : p.beta.mutable_data()) b = -5.0;
  for (double& g : p.gamma.mutable_data()) g = -1.0;
  Tape tape;
  Tensor y = GdnForward(tape, Tensor::Filled({1, 2, 2, 2}, 1e-3), p);
  EXPECT_TRUE(y.AllFinite());
  p.ClampToFloors();
  for (double b : p.beta.data()) EXPECT_EQ(b, kGdnBetaFloor);
  for (double g : p.gamma.data()) EXPECT_EQ(g, 0.0);
}

TEST(ScalarGdnTest, HandValues) {
  EXPECT_EQ(ScalarGdn(3.5, 1, 0), 3.5);
  EXPECT_NEAR(ScalarGdn(1, 1, 1), 0.707107, 1e-6);
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const double x = rng.Uniform(-5, 5), a = rng.Uniform(1e-3, 3), b = rng.Uniform(0, 3);
    EXPECT_EQ(ScalarGdn(-x, a, b), -ScalarGdn(x, a, b));
  }
  EXPECT_THROW(ScalarGdn(1, 1e-7, 1), Error);
}

TEST(FactorizeGdnTest, HandExample) {
  GdnParams p = SingleChannelGdn(4, 8);
  const GdnFactorization f = FactorizeGdn(p);
  EXPECT_DOUBLE_EQ(f.delta[0], 2.0);
  EXPECT_DOUBLE_EQ(f.channel_scale[0], 0.5);
  Tensor x = Tensor::FromData({1, 1, 1, 1}, {1.0});
  const double s = GdnScalingFactor(x, p).item();
  const double s_bar = NormalizedGdnScalingFactor(x, f).item();
  EXPECT_NEAR(s, 1.0 / std::sqrt(12.0), 1e-15);
  EXPECT_NEAR(s_bar, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(s / s_bar, 0.5, 1e-15);
}

TEST(FactorizeGdnTest, UnitBetaKeepsGamma) {
  Rng rng(3);
  GdnParams p = RandomGdn(3, rng);
  for (double& b : p.beta.mutable_data()) b = 1.0;
  const GdnFactorization f = FactorizeGdn(p);
  for (size_t i = 0; i < f.delta.size(); ++i) EXPECT_EQ(f.delta[i], p.gamma.data()[i]);
  for (double c : f.channel_scale) EXPECT_EQ(c, 1.0);
}

TEST(FactorizeGdnTest, IdentityOnRandomParameters) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int c = 1 + static_cast<int>(rng.UniformInt(5));
    GdnParams p = RandomGdn(c, rng);
    Tensor x = RandomTensor({1, c, 3, 3}, rng, -4, 4);
    const GdnFactorization f = FactorizeGdn(p);
    Tensor s = GdnScalingFactor(x, p);
    Tensor s_bar = NormalizedGdnScalingFactor(x, f);
    for (int i = 0; i < c; ++i) {
      for (int y = 0; y < 3; ++y) {
        for (int xx = 0; xx < 3; ++xx) {
          const double lhs = s.at(0, i, y, xx);
          const double rhs = f.channel_scale[i] * s_bar.at(0, i, y, xx);
          EXPECT_LE(testing::RelativeDifference(lhs, rhs), 1e-12);
        }
      }
    }
  }
}

TEST(ScalingFactorTest, SymmetryPointAndOffset) {
  Rng rng(5);
  EasnParams p = MakeEasnParams(Variant::kEasnC, 3, 3, Direction::kDown, rng);
  ZeroBranches(p, 0.0);
  Tape tape;
  Tensor x = RandomTensor({1, 3, 4, 4}, rng);
  for (double v : ScalingFactorSwish(tape, x, p).data()) EXPECT_EQ(v, 0.5);
  ZeroBranches(p, std::log(3.0));
  for (double v : ScalingFactorSwish(tape, x, p).data()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(ScalingFactorTest, OpenUnitIntervalAndMonotone) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    EasnParams p = MakeEasnParams(Variant::kEasnC, 2, 2, Direction::kDown, rng);
    Randomize(p, rng);
    Tensor x = RandomTensor({1, 2, 5, 5}, rng, -3, 3);
    Tape tape;
    Tensor s = ScalingFactorSwish(tape, x, p);
    for (double v : s.data()) {
      EXPECT_GT(v, 0.0);
      EXPECT_LT(v, 1.0);
    }
    // Raising the last bias of F raises [F(x)]_0 uniformly.
    p.s_branch.back().bias.mutable_data()[0] += 0.25;
    Tensor s2 = ScalingFactorSwish(tape, x, p);
    for (int y = 0; y < 5; ++y) {
      for (int xx = 0; xx < 5; ++xx) EXPECT_LT(s2.at(0, 0, y, xx), s.at(0, 0, y, xx));
    }
  }
}

TEST(EasnTest, VariantAWithZeroBranchScalesByOneAndAHalf) {
  Rng rng(7);
  EasnParams p = MakeEasnParams(Variant::kEasnA, 3, 3, Direction::kDown, rng);
  ZeroBranches(p, 0.0);
  Tensor x = RandomTensor({1, 3, 4, 4}, rng);
  Tape tape;
  Tensor y = EasnForward(tape, x, Variant::kEasnA, p);
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], 1.5 * x.data()[i]);
}

TEST(EasnTest, ZeroShiftBranchMatchesVariantC) {
  Rng rng(8);
  EasnParams d = MakeEasnParams(Variant::kEasnD, 3, 3, Direction::kDown, rng);
  Randomize(d, rng);
  for (double& v : d.h_branch->weight.mutable_data()) v = 0.0;
  for (double& v : d.h_branch->bias.mutable_data()) v = 0.0;
  EasnParams c = d;
  c.h_branch.reset();
  Tensor x = RandomTensor({1, 3, 4, 4}, rng);
  Tape tape;
  Tensor yd = EasnForward(tape, x, Variant::kEasnD, d);
  Tensor yc = EasnForward(tape, x, Variant::kEasnC, c);
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(yd.data()[i], yc.data()[i]);
  EXPECT_GT(d.ParamCount(), c.ParamCount());
}

TEST(EasnTest, StructureMismatchRejected) {
  Rng rng(9);
  EasnParams p = MakeEasnParams(Variant::kEasnC, 3, 3, Direction::kDown, rng);
  Tape tape;
  Tensor x = Tensor::Zeros({1, 3, 4, 4});
  EXPECT_THROW(EasnForward(tape, x, Variant::kEasnE, p), Error);
  EXPECT_THROW(EasnForward(tape, x, Variant::kEasnF, p), Error);
  EXPECT_THROW(EasnForward(tape, Tensor::Zeros({1, 2, 4, 4}), Variant::kEasnC, p), Error);
}

// Parameter counts from kernel-size arithmetic of the variant table.
TEST(EasnTest, ParamCountsFollowKernelArithmetic) {
  const int c = 4;
  auto conv = [&](int k) { return static_cast<size_t>(c * c * k * k + c); };
  Rng rng(10);
  auto count = [&](Variant v) {
    return MakeEasnParams(v, c, c, Direction::kDown, rng).ParamCount();
  };
  EXPECT_EQ(count(Variant::kEasnA), c + 2 * conv(1));
  EXPECT_EQ(count(Variant::kEasnB), c + 3 * conv(1));
  EXPECT_EQ(count(Variant::kEasnC), c + 2 * conv(3) + conv(1));
  EXPECT_EQ(count(Variant::kEasnD), c + 2 * conv(3) + 2 * conv(1));
  EXPECT_EQ(count(Variant::kEasnE), c + 2 * conv(3) + conv(5));
  EXPECT_LT(count(Variant::kEasnA), count(Variant::kEasnB));
  EXPECT_LT(count(Variant::kEasnB), count(Variant::kEasnC));
  EXPECT_LT(count(Variant::kEasnC), count(Variant::kEasnE));
}

TEST(EasnTest, VariantNamesRoundTrip) {
  for (Variant v : AllVariants()) EXPECT_EQ(ParseVariant(VariantName(v)), v);
  EXPECT_FALSE(ParseVariant("EASN-H"));
  EXPECT_FALSE(ParseVariant("easn-c"));
}

// Skip fallback: zero branches with beta = 1e3 leave the (resampled) input.
TEST(EasnTest, SkipFallbackEveryVariant) {
  Rng rng(11);
  for (Variant v : {Variant::kEasnA, Variant::kEasnB, Variant::kEasnC, Variant::kEasnD,
                    Variant::kEasnE}) {
    EasnParams p = MakeEasnParams(v, 4, 4, Direction::kDown, rng);
    Randomize(p, rng);
    ZeroBranches(p, 1e3);
    Tensor x = RandomTensor({1, 4, 6, 6}, rng, -2, 2);
    Tape tape;
    Tensor y = EasnForward(tape, x, v, p);
    for (size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-10);
  }
  for (Direction d : {Direction::kDown, Direction::kUp}) {
    for (Variant v : {Variant::kEasnF, Variant::kEasnG}) {
      EasnParams p = MakeEasnParams(v, 4, 4, d, rng);
      Randomize(p, rng);
      ZeroBranches(p, 1e3);
      ConvLayer resample = MakeResampling(4, 4, 5, d, rng, 1.0);
      Tensor u = RandomTensor({1, 4, 6, 6}, rng, -2, 2);
      Tape tape;
      Tensor y = EasnFForward(tape, u, p, resample, {}, v);
      Tensor r = resample.Forward(tape, u);
      ASSERT_EQ(y.shape(), r.shape());
      for (size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(y.data()[i], r.data()[i], 1e-10);
    }
  }
}

TEST(EasnFTest, GeometryAndDeepComposition) {
  Rng rng(12);
  EasnParams front = MakeEasnParams(Variant::kEasnF, 4, 6, Direction::kDown, rng);
  EasnParams back = MakeEasnParams(Variant::kEasnE, 6, 6, Direction::kDown, rng);
  Randomize(front, rng);
  Randomize(back, rng);
  ConvLayer resample = MakeResampling(4, 6, 5, Direction::kDown, rng, 1.0);
  Tensor u = RandomTensor({1, 4, 7, 6}, rng);
  Tape tape;
  Tensor mid = EasnFForward(tape, u, front, resample);
  EXPECT_EQ(mid.shape(), (Shape{1, 6, 4, 3}));
  Tensor deep = EasnDeepForward(tape, u, front, back, resample);
  Tensor composed = EasnForward(tape, mid, Variant::kEasnE, back);
  for (size_t i = 0; i < deep.size(); ++i) EXPECT_EQ(deep.data()[i], composed.data()[i]);

  ZeroBranches(front, 1e3);
  ZeroBranches(back, 1e3);
  Tensor skip = EasnDeepForward(tape, u, front, back, resample);
  Tensor r = resample.Forward(tape, u);
  for (size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(skip.data()[i], r.data()[i], 1e-10);
}

TEST(EasnFTest, UpDirectionDoublesResolution) {
  Rng rng(13);
  EasnParams p = MakeEasnParams(Variant::kEasnF, 4, 2, Direction::kUp, rng);
  ConvLayer resample = MakeResampling(4, 2, 5, Direction::kUp, rng, 1.0);
  Tape tape;
  Tensor y = EasnFForward(tape, Tensor::Zeros({1, 4, 3, 5}), p, resample);
  EXPECT_EQ(y.shape(), (Shape{1, 2, 6, 10}));
}

// GDN scaling is even in x; the swish scaling is not once F is not even.
TEST(SymmetryTest, GdnEvenEasnNot) {
  Rng rng(14);
  GdnParams g = RandomGdn(3, rng);
  EasnParams p = MakeEasnParams(Variant::kEasnC, 3, 3, Direction::kDown, rng);
  Randomize(p, rng);
  Tensor x = RandomTensor({1, 3, 5, 5}, rng, -2, 2);
  Tensor neg = Tensor::FromData(x.shape(), {x.data().begin(), x.data().end()});
  for (double& v : neg.mutable_data()) v = -v;
  Tensor gs = GdnScalingFactor(x, g);
  Tensor gn = GdnScalingFactor(neg, g);
  for (size_t i = 0; i < x.size(); ++i) EXPECT_EQ(gs.data()[i], gn.data()[i]);
  Tape tape;
  Tensor es = ScalingFactorSwish(tape, x, p);
  Tensor en = ScalingFactorSwish(tape, neg, p);
  double max_diff = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(es.data()[i] - en.data()[i]));
  }
  EXPECT_GT(max_diff, 1e-3);
}

class LayerGradientTest : public ::testing::TestWithParam<Variant> {};

TEST_P(LayerGradientTest, PassesOnTwoSeeds) {
  for (uint64_t seed : {1, 2}) {
    const SuiteResult r = CheckLayerGradients(GetParam(), seed);
    EXPECT_TRUE(r.passed()) << r.subject << " seed " << seed << " error "
                            << r.report.max_relative_error;
    EXPECT_LT(r.report.skipped, r.report.elements / 10);
  }
}

INSTANTIATE_TEST_SUITE_P(AllVariants, LayerGradientTest, ::testing::ValuesIn(AllVariants()),
                         [](const auto& info) {
                           std::string name(VariantName(info.param));
                           for (char& ch : name) {
                             if (ch == '-') ch = '_';
                           }
                           return name;
                         });

}  // namespace
}  // namespace easn
