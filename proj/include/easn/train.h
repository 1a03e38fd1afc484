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

#ifndef EASN_TRAIN_H_
#define EASN_TRAIN_H_

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "easn/image_io.h"
#include "easn/model.h"

namespace easn {

struct TrainConfig {
  double lambda = 0.01;
  double lr_init = 1e-3;
  int batch = 8;
  int crop = 32;
  int plateau_patience_epochs = 10;
  double lr_factor = 0.5;
  int max_lr_drops = 4;
  int max_steps = 2000;  // 0: run until the schedule stops
  // Trailing share of the image list held out for validation.
  double validation_fraction = 0.125;
  uint64_t seed = 1;

  void Validate() const;
};

// Full-scale training protocol (256px crops, six lambdas). Not the default.
struct FullScaleTrainProtocol {
  static constexpr double kLambdas[] = {0.005, 0.010, 0.020, 0.035, 0.080, 0.180};
  static constexpr double kLrInit = 1e-4;
  static constexpr int kBatch = 16;
  static constexpr int kCrop = 256;
  static constexpr double kLrFactor = 0.5;
  static constexpr int kPatienceEpochs = 10;
  static constexpr int kMaxLrDrops = 4;
};

class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  explicit Adam(std::vector<Tensor> params);

  // Applies one update from the accumulated gradients. Parameters without a
  // gradient are left untouched.
  void Step(double lr);
  int64_t steps() const { return t_; }

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  int64_t t_ = 0;
};

// Halves (by `factor`) the learning rate when the monitored loss has not
// improved for more than `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr_init, double factor, int patience, int max_drops);

  // Returns true when the learning rate was reduced by this observation.
  bool Observe(double loss);
  double lr() const { return lr_; }
  int drops() const { return drops_; }
  bool finished() const { return drops_ >= max_drops_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int max_drops_;
  double best_;
  int bad_epochs_ = 0;
  int drops_ = 0;
};

struct StepLog {
  int step = 0;  // 1-based
  double loss = 0.0;
  double rate_bpp = 0.0;
  double distortion = 0.0;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  int step = 0;   // steps completed at the end of the epoch
  double train_loss = 0.0;  // mean over the epoch's steps
  double val_loss = 0.0;
  double val_bpp = 0.0;   // estimated rate with rounded latents
  double val_psnr = 0.0;  // on the clamped [0,1] reconstruction
  double lr = 0.0;  // rate used during the epoch
};

struct TrainLog {
  std::vector<StepLog> steps;
  std::vector<EpochLog> epochs;
};

struct TrainResult {
  Model model;
  TrainLog log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains from `images`; the trailing validation_fraction of the list (at
// least one image when there are two or more) is held out and evaluated on
// center crops after every epoch. Aborts with ErrorCode::kNumeric on a
// non-finite loss or gradient.
TrainResult Train(std::span<const Image> images, const ModelConfig& mc,
                  const TrainConfig& tc, const EpochCallback& on_epoch = {});

// Number of leading images used for training; the rest validate. With one
// image it is used for both.
size_t TrainingCount(size_t total, double validation_fraction);

// Center crop as a (1, 3, crop, crop) tensor.
Tensor CenterCrop(const Image& image, int crop);

// Deterministic test pictures: smooth ramps, filled shapes, stripes and a
// little noise.
std::vector<Image> SyntheticImages(int count, int width, int height, uint64_t seed);

// Trailing moving average with window `window`.
std::vector<double> MovingAverage(std::span<const double> values, int window);

}  // namespace easn

#endif  // EASN_TRAIN_H_
