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

#include "easn/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "easn/error.h"
#include "easn/rng.h"

namespace easn {
namespace {

// Seed streams derived from TrainConfig::seed.
enum SeedStream : uint64_t {
  kShuffleStream = 1,
  kAugmentStream = 2,
  kNoiseStream = 3,
};

void CopyCrop(const Image& image, int top, int left, int crop, bool flip,
              const Shape& s, int n, std::span<double> dst) {
  for (int c = 0; c < 3; ++c) {
    const int src = image.channels == 1 ? 0 : c;
    for (int y = 0; y < crop; ++y) {
      for (int x = 0; x < crop; ++x) {
        const int sx = flip ? left + crop - 1 - x : left + x;
        dst[Offset(s, n, c, y, x)] = image.at(top + y, sx, src) / 255.0;
      }
    }
  }
}

Tensor StackCenterCrops(std::span<const Image> images, std::span<const size_t> indices,
                        int crop) {
  const Shape s{static_cast<int>(indices.size()), 3, crop, crop};
  Tensor t = Tensor::Zeros(s);
  auto d = t.mutable_data();
  for (size_t i = 0; i < indices.size(); ++i) {
    const Image& im = images[indices[i]];
    CopyCrop(im, (im.height - crop) / 2, (im.width - crop) / 2, crop, false, s,
             static_cast<int>(i), d);
  }
  return t;
}

bool GradientsFinite(const std::vector<NamedTensor>& params, std::string* bad) {
  for (const NamedTensor& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        *bad = p.name;
        return false;
      }
    }
  }
  return true;
}

}  // namespace

void TrainConfig::Validate() const {
  EASN_REQUIRE(std::isfinite(lambda) && lambda >= 0.0, "lambda must be >= 0, got {}", lambda);
  EASN_REQUIRE(std::isfinite(lr_init) && lr_init > 0.0, "lr_init must be > 0, got {}", lr_init);
  EASN_REQUIRE(batch >= 1, "batch must be >= 1, got {}", batch);
  EASN_REQUIRE(crop >= 1, "crop must be >= 1, got {}", crop);
  EASN_REQUIRE(plateau_patience_epochs >= 0, "plateau_patience_epochs must be >= 0");
  EASN_REQUIRE(lr_factor > 0.0 && lr_factor < 1.0, "lr_factor must be in (0,1), got {}",
               lr_factor);
  EASN_REQUIRE(max_lr_drops >= 1, "max_lr_drops must be >= 1");
  EASN_REQUIRE(max_steps >= 0, "max_steps must be >= 0");
  EASN_REQUIRE(validation_fraction >= 0.0 && validation_fraction < 1.0,
               "validation_fraction must be in [0,1), got {}", validation_fraction);
}

Adam::Adam(std::vector<Tensor> params) : params_(std::move(params)) {
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::Step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t k = 0; k < w.size(); ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
      const double m_hat = m[k] / c1;
      const double v_hat = v[k] / c2;
      w[k] -= lr * m_hat / (std::sqrt(v_hat) + kEpsilon);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr_init, double factor, int patience,
                                   int max_drops)
    : lr_(lr_init),
      factor_(factor),
      patience_(patience),
      max_drops_(max_drops),
      best_(std::numeric_limits<double>::infinity()) {}

bool PlateauScheduler::Observe(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_epochs_ = 0;
    return false;
  }
  if (++bad_epochs_ <= patience_) return false;
  lr_ *= factor_;
  ++drops_;
  bad_epochs_ = 0;
  return true;
}

size_t TrainingCount(size_t total, double validation_fraction) {
  if (total < 2) return total;
  const size_t val_count = std::clamp<size_t>(
      static_cast<size_t>(std::floor(validation_fraction * static_cast<double>(total))), 1,
      total - 1);
  return total - val_count;
}

Tensor CenterCrop(const Image& image, int crop) {
  EASN_REQUIRE(image.width >= crop && image.height >= crop,
               "image {}x{} smaller than crop {}", image.width, image.height, crop);
  const size_t index = 0;
  return StackCenterCrops(std::span<const Image>(&image, 1),
                          std::span<const size_t>(&index, 1), crop);
}

TrainResult Train(std::span<const Image> images, const ModelConfig& mc,
                  const TrainConfig& tc, const EpochCallback& on_epoch) {
  mc.Validate();
  tc.Validate();
  EASN_REQUIRE(!images.empty(), "training set is empty");
  EASN_REQUIRE(tc.crop % mc.Granularity() == 0, "crop {} must be a multiple of {}",
               tc.crop, mc.Granularity());
  for (size_t i = 0; i < images.size(); ++i) {
    EASN_REQUIRE(images[i].width >= tc.crop && images[i].height >= tc.crop,
                 "training image {} is {}x{}, smaller than crop {}", i, images[i].width,
                 images[i].height, tc.crop);
  }

  // The last images form the validation slice. A single image serves both.
  const size_t total = images.size();
  const size_t train_count = TrainingCount(total, tc.validation_fraction);
  std::vector<size_t> train_ids(train_count);
  std::iota(train_ids.begin(), train_ids.end(), 0);
  std::vector<size_t> val_ids;
  for (size_t i = train_count; i < total; ++i) val_ids.push_back(i);
  if (val_ids.empty()) val_ids.push_back(0);
  const Tensor val_batch = StackCenterCrops(images, val_ids, tc.crop);

  TrainResult result{Model(mc), {}};
  Model& model = result.model;
  const std::vector<NamedTensor> named = model.Parameters();
  std::vector<Tensor> params;
  for (const NamedTensor& p : named) params.push_back(p.tensor);
  model.SetRequiresGrad(true);
  Adam adam(params);
  PlateauScheduler scheduler(tc.lr_init, tc.lr_factor, tc.plateau_patience_epochs,
                             tc.max_lr_drops);

  Rng shuffle_rng(DeriveSeed(tc.seed, kShuffleStream));
  Rng augment_rng(DeriveSeed(tc.seed, kAugmentStream));
  const uint64_t noise_base = DeriveSeed(tc.seed, kNoiseStream);

  int step = 0;
  for (int epoch = 1;; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (size_t i = train_ids.size(); i > 1; --i) {
      std::swap(train_ids[i - 1], train_ids[shuffle_rng.UniformInt(i)]);
    }
    const double lr = scheduler.lr();
    double loss_sum = 0.0;
    int epoch_steps = 0;
    bool step_limit = false;
    for (size_t start = 0; start < train_ids.size(); start += tc.batch) {
      if (tc.max_steps > 0 && step >= tc.max_steps) {
        step_limit = true;
        break;
      }
      const size_t count = std::min<size_t>(tc.batch, train_ids.size() - start);
      const Shape s{static_cast<int>(count), 3, tc.crop, tc.crop};
      Tensor x = Tensor::Zeros(s);
      auto d = x.mutable_data();
      for (size_t b = 0; b < count; ++b) {
        const Image& im = images[train_ids[start + b]];
        const int top = static_cast<int>(augment_rng.UniformInt(im.height - tc.crop + 1));
        const int left = static_cast<int>(augment_rng.UniformInt(im.width - tc.crop + 1));
        const bool flip = augment_rng.Uniform01() < 0.5;
        CopyCrop(im, top, left, tc.crop, flip, s, static_cast<int>(b), d);
      }

      ++step;
      Tape tape;
      const RdTerms terms = TrainingForward(tape, model, x, tc.lambda,
                                            DeriveSeed(noise_base, step));
      const double loss = terms.total.item();
      if (!std::isfinite(loss)) {
        Fail(ErrorCode::kNumeric,
             "non-finite loss at step {} (epoch {}, lr {}): rate {} bpp, distortion {}",
             step, epoch, lr, terms.rate_bpp.item(), terms.distortion.item());
      }
      for (const Tensor& p : params) p.ZeroGrad();
      tape.Backward(terms.total);
      std::string bad;
      if (!GradientsFinite(named, &bad)) {
        Fail(ErrorCode::kNumeric, "non-finite gradient in {} at step {} (epoch {}, loss {})",
             bad, step, epoch, loss);
      }
      adam.Step(lr);
      model.ClampParameters();

      result.log.steps.push_back(
          {step, loss, terms.rate_bpp.item(), terms.distortion.item()});
      loss_sum += loss;
      ++epoch_steps;
    }
    if (epoch_steps == 0) break;

    model.SetRequiresGrad(false);
    Tape val_tape;
    const RdTerms val = EvaluationForward(val_tape, model, val_batch, tc.lambda);
    model.SetRequiresGrad(true);
    const double val_loss = val.total.item();
    if (!std::isfinite(val_loss)) {
      Fail(ErrorCode::kNumeric, "non-finite validation loss after step {} (epoch {})", step,
           epoch);
    }
    const double mse = val.distortion.item();
    EpochLog entry;
    entry.epoch = epoch;
    entry.step = step;
    entry.train_loss = loss_sum / epoch_steps;
    entry.val_loss = val_loss;
    entry.val_bpp = val.rate_bpp.item();
    entry.val_psnr = mse > 0.0 ? std::min(100.0, 10.0 * std::log10(255.0 * 255.0 / mse)) : 100.0;
    entry.lr = lr;
    result.log.epochs.push_back(entry);
    if (on_epoch) on_epoch(entry);

    scheduler.Observe(val_loss);
    if (scheduler.finished() || step_limit) break;
    if (tc.max_steps > 0 && step >= tc.max_steps) break;
  }
  model.SetRequiresGrad(false);
  for (const Tensor& p : params) p.ClearGrad();
  return result;
}

std::vector<Image> SyntheticImages(int count, int width, int height, uint64_t seed) {
  EASN_REQUIRE(count >= 0 && width >= 1 && height >= 1, "bad synthetic image request");
  std::vector<Image> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    Rng rng(DeriveSeed(seed, static_cast<uint64_t>(i)));
    std::vector<double> plane(static_cast<size_t>(width) * height * 3);
    auto px = [&](int y, int x, int c) -> double& {
      return plane[(static_cast<size_t>(y) * width + x) * 3 + c];
    };
    // Linear ramp background.
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
      base[c] = rng.Uniform(40, 215);
      gx[c] = rng.Uniform(-60, 60) / width;
      gy[c] = rng.Uniform(-60, 60) / height;
    }
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        for (int c = 0; c < 3; ++c) px(y, x, c) = base[c] + gx[c] * x + gy[c] * y;
      }
    }
    const int shapes = 2 + static_cast<int>(rng.UniformInt(4));
    for (int k = 0; k < shapes; ++k) {
      const int kind = static_cast<int>(rng.UniformInt(3));
      const double cx = rng.Uniform(0, width);
      const double cy = rng.Uniform(0, height);
      const double r = rng.Uniform(0.1, 0.4) * std::min(width, height);
      const double period = rng.Uniform(3, 9);
      double color[3];
      for (double& v : color) v = rng.Uniform(0, 255);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double dx = x - cx;
          const double dy = y - cy;
          bool inside = false;
          switch (kind) {
            case 0:  // disc
              inside = dx * dx + dy * dy <= r * r;
              break;
            case 1:  // rectangle
              inside = std::abs(dx) <= r && std::abs(dy) <= 0.6 * r;
              break;
            default:  // striped square
              inside = std::abs(dx) <= r && std::abs(dy) <= r &&
                       std::fmod(std::abs(dx + dy), 2 * period) < period;
              break;
          }
          if (!inside) continue;
          for (int c = 0; c < 3; ++c) px(y, x, c) = color[c];
        }
      }
    }
    Image im;
    im.width = width;
    im.height = height;
    im.channels = 3;
    im.pixels.resize(plane.size());
    for (size_t k = 0; k < plane.size(); ++k) {
      const double v = plane[k] + rng.Uniform(-4, 4);
      im.pixels[k] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
    out.push_back(std::move(im));
  }
  return out;
}

std::vector<double> MovingAverage(std::span<const double> values, int window) {
  EASN_REQUIRE(window >= 1, "window must be >= 1");
  std::vector<double> out(values.size());
  double sum = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<size_t>(window)) sum -= values[i - window];
    out[i] = sum / static_cast<double>(std::min<size_t>(i + 1, window));
  }
  return out;
}

}  // namespace easn
