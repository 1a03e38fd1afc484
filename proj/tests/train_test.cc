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
#include "easn/train.h"
#include "easn/weights_io.h"

namespace easn {
namespace {

ModelConfig SmallModel(Variant variant) {
  ModelConfig c;
  c.stages = 2;
  c.base_channels = 4;
  c.latent_channels = 6;
  c.variant = variant;
  return c;
}

TrainConfig ShortRun() {
  TrainConfig t;
  t.batch = 2;
  t.crop = 16;
  t.max_steps = 12;
  t.plateau_patience_epochs = 1;
  return t;
}

TEST(PlateauSchedulerTest, DropsAfterPatienceExceeded) {
  PlateauScheduler s(1.0, 0.5, 2, 3);
  EXPECT_FALSE(s.Observe(10));
  EXPECT_FALSE(s.Observe(10));  // 1 bad
  EXPECT_FALSE(s.Observe(11));  // 2 bad
  EXPECT_TRUE(s.Observe(12));   // 3 bad > patience
  EXPECT_EQ(s.lr(), 0.5);
  EXPECT_FALSE(s.Observe(9));  // improvement resets
  EXPECT_FALSE(s.Observe(9));
  EXPECT_FALSE(s.Observe(9));
  EXPECT_TRUE(s.Observe(9));
  EXPECT_EQ(s.lr(), 0.25);
  EXPECT_FALSE(s.finished());
  for (int i = 0; i < 2; ++i) EXPECT_FALSE(s.Observe(9));
  EXPECT_TRUE(s.Observe(9));
  EXPECT_TRUE(s.finished());
  EXPECT_EQ(s.drops(), 3);
}

TEST(PlateauSchedulerTest, ZeroPatienceDropsOnFirstStall) {
  PlateauScheduler s(1e-3, 0.5, 0, 4);
  EXPECT_FALSE(s.Observe(1.0));
  EXPECT_TRUE(s.Observe(1.0));
  EXPECT_DOUBLE_EQ(s.lr(), 5e-4);
}

TEST(AdamTest, MatchesClosedFormFirstSteps) {
  Tensor p = Tensor::FromData({1, 1, 1, 3}, {1.0, -2.0, 0.5});
  p.set_requires_grad(true);
  Adam adam({p});
  const double g1[] = {0.3, -4.0, 0.0};
  const double g2[] = {0.1, 1.0, 2.0};
  const double lr = 0.01;
  std::vector<double> expected = {1.0, -2.0, 0.5};
  std::vector<double> m(3, 0.0), v(3, 0.0);
  for (int t = 1; t <= 2; ++t) {
    const double* g = t == 1 ? g1 : g2;
    p.ZeroGrad();
    for (int k = 0; k < 3; ++k) p.mutable_grad()[k] = g[k];
    adam.Step(lr);
    for (int k = 0; k < 3; ++k) {
      m[k] = 0.9 * m[k] + 0.1 * g[k];
      v[k] = 0.999 * v[k] + 0.001 * g[k] * g[k];
      const double mh = m[k] / (1 - std::pow(0.9, t));
      const double vh = v[k] / (1 - std::pow(0.999, t));
      expected[k] -= lr * mh / (std::sqrt(vh) + 1e-8);
    }
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(p.data()[k], expected[k], 1e-15) << t << " " << k;
  }
  EXPECT_EQ(adam.steps(), 2);
}

TEST(AdamTest, ParametersWithoutGradientUntouched) {
  Tensor p = Tensor::FromData({1, 1, 1, 1}, {3.0});
  Adam adam({p});
  adam.Step(1.0);
  EXPECT_EQ(p.data()[0], 3.0);
}

TEST(TrainSplitTest, TrainingCount) {
  EXPECT_EQ(TrainingCount(1, 0.125), 1u);
  EXPECT_EQ(TrainingCount(2, 0.125), 1u);
  EXPECT_EQ(TrainingCount(16, 0.125), 14u);
  EXPECT_EQ(TrainingCount(10, 0.0), 9u);
}

TEST(TrainUtilTest, MovingAverage) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  const std::vector<double> m = MovingAverage(v, 2);
  EXPECT_EQ(m, (std::vector<double>{1, 1.5, 2.5, 3.5, 4.5}));
  EXPECT_EQ(MovingAverage(v, 10).back(), 3.0);
}

TEST(TrainUtilTest, SyntheticImagesDeterministic) {
  const auto a = SyntheticImages(3, 20, 12, 4);
  const auto b = SyntheticImages(3, 20, 12, 4);
  ASSERT_EQ(a.size(), 3u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].width, 20);
    EXPECT_EQ(a[i].height, 12);
    EXPECT_EQ(a[i].pixels, b[i].pixels);
  }
  EXPECT_NE(a[0].pixels, a[1].pixels);
  EXPECT_NE(SyntheticImages(1, 20, 12, 5)[0].pixels, a[0].pixels);
}

TEST(TrainUtilTest, CenterCrop) {
  Image im;
  im.width = 4;
  im.height = 4;
  im.channels = 3;
  im.pixels.resize(48);
  for (size_t i = 0; i < im.pixels.size(); ++i) im.pixels[i] = static_cast<uint8_t>(i);
  Tensor t = CenterCrop(im, 2);
  ASSERT_EQ(t.shape(), (Shape{1, 3, 2, 2}));
  EXPECT_DOUBLE_EQ(t.at(0, 0, 0, 0), im.at(1, 1, 0) / 255.0);
  EXPECT_DOUBLE_EQ(t.at(0, 2, 1, 1), im.at(2, 2, 2) / 255.0);
  EXPECT_THROW(CenterCrop(im, 5), Error);
}

TEST(TrainTest, SmokeRunReducesLossAndLogs) {
  const auto images = SyntheticImages(8, 24, 24, 3);
  TrainConfig tc = ShortRun();
  tc.max_steps = 30;
  int callbacks = 0;
  const TrainResult r = Train(images, SmallModel(Variant::kEasnC), tc,
                              [&](const EpochLog&) { ++callbacks; });
  ASSERT_EQ(r.log.steps.size(), 30u);
  EXPECT_EQ(callbacks, static_cast<int>(r.log.epochs.size()));
  // 7 training images in batches of 2: 4 steps per epoch.
  EXPECT_EQ(r.log.epochs.front().step, 4);
  EXPECT_EQ(r.log.epochs.back().step, 30);
  for (const StepLog& s : r.log.steps) {
    EXPECT_TRUE(std::isfinite(s.loss));
    EXPECT_NEAR(s.loss, s.rate_bpp + tc.lambda * s.distortion, 1e-9 * s.loss);
  }
  const double first = (r.log.steps[0].loss + r.log.steps[1].loss + r.log.steps[2].loss) / 3;
  const double last = (r.log.steps[27].loss + r.log.steps[28].loss + r.log.steps[29].loss) / 3;
  EXPECT_LT(last, first);
}

TEST(TrainTest, SameSeedSameWeights) {
  const auto images = SyntheticImages(4, 16, 16, 9);
  const TrainConfig tc = ShortRun();
  const TrainResult a = Train(images, SmallModel(Variant::kEasnDeep), tc);
  const TrainResult b = Train(images, SmallModel(Variant::kEasnDeep), tc);
  EXPECT_EQ(SerializeWeights(a.model, tc.lambda), SerializeWeights(b.model, tc.lambda));
  TrainConfig other = tc;
  other.seed = 2;
  const TrainResult c = Train(images, SmallModel(Variant::kEasnDeep), other);
  EXPECT_NE(SerializeWeights(a.model, tc.lambda), SerializeWeights(c.model, tc.lambda));
}

TEST(TrainTest, SingleImageTrainsAndValidates) {
  const auto images = SyntheticImages(1, 16, 16, 2);
  const TrainResult r = Train(images, SmallModel(Variant::kGdn), ShortRun());
  EXPECT_FALSE(r.log.epochs.empty());
}

TEST(TrainTest, DivergenceAbortsWithNumericError) {
  const auto images = SyntheticImages(4, 16, 16, 1);
  TrainConfig tc = ShortRun();
  tc.lr_init = 1e300;
  try {
    Train(images, SmallModel(Variant::kEasnC), tc);
    FAIL() << "training survived lr 1e300";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric) << e.what();
  }
}

TEST(TrainTest, RejectsBadSetup) {
  const auto images = SyntheticImages(2, 16, 16, 1);
  TrainConfig tc = ShortRun();
  tc.crop = 10;  // not a multiple of 4
  EXPECT_THROW(Train(images, SmallModel(Variant::kGdn), tc), Error);
  tc = ShortRun();
  tc.crop = 32;
  EXPECT_THROW(Train(images, SmallModel(Variant::kGdn), tc), Error);
  EXPECT_THROW(Train({}, SmallModel(Variant::kGdn), ShortRun()), Error);
  tc = ShortRun();
  tc.lr_factor = 1.0;
  EXPECT_THROW(tc.Validate(), Error);
}

}  // namespace
}  // namespace easn
