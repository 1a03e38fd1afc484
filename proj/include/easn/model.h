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

#ifndef EASN_MODEL_H_
#define EASN_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "easn/entropy.h"
#include "easn/grad_check.h"
#include "easn/norm_layers.h"
#include "easn/tape.h"
#include "easn/tensor.h"

namespace easn {

struct ModelConfig {
  int stages = 3;        // stride-2 resampling stages per transform
  int base_channels = 8;  // N
  int latent_channels = 16;  // M
  int kernel = 5;         // resampling kernel size
  Variant variant = Variant::kEasnC;
  double gdn_gamma_init = kDefaultGdnGammaInit;
  uint64_t seed = 1;

  // Image sides must be multiples of this.
  int Granularity() const { return 1 << stages; }
  void Validate() const;
};

// Channel widths for full-scale models with a hyperprior-sized budget, kept
// for documentation and config presets: (N, M) = (128, 192) for the two
// lowest lambdas, (192, 320) above.
struct ChannelPreset {
  double lambda;
  int base_channels;
  int latent_channels;
};
std::vector<ChannelPreset> FullScaleChannelPresets();

// One resolution stage of a transform.
struct Stage {
  Variant norm = Variant::kGdn;
  ConvLayer resample;
  std::optional<GdnParams> gdn;
  std::optional<EasnParams> easn;  // EASN-A..G, or the EASN-F front of DEEP
  std::optional<EasnParams> back;  // EASN-E back of DEEP
};

// Read-only tap on the first encoder normalization layer: "first" for
// single-scaling variants, "front" and "back" for EASN-DEEP.
using TapSink = std::map<std::string, Tensor>;

class Model {
 public:
  // Initializes every parameter from config.seed.
  explicit Model(const ModelConfig& config);

  // Parameters are tensor handles; a copy would alias them.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }

  // x: (B, 3, H, W) with H, W multiples of Granularity().
  Tensor Analysis(Tape& tape, const Tensor& x, TapSink* taps = nullptr) const;
  Tensor Synthesis(Tape& tape, const Tensor& y_hat) const;

  FactorizedPrior& prior() { return prior_; }
  const FactorizedPrior& prior() const { return prior_; }

  // Fixed serialization order: analysis stages, synthesis stages, prior.
  std::vector<NamedTensor> Parameters() const;
  size_t ParamCount() const;
  // Parameter count of the normalization layers only.
  size_t NormParamCount() const;

  void SetRequiresGrad(bool value);
  // Re-applies GDN floors after an optimizer step.
  void ClampParameters();

  std::vector<std::string> TapNames() const;

  const std::vector<Stage>& analysis_stages() const { return analysis_; }
  const std::vector<Stage>& synthesis_stages() const { return synthesis_; }
  std::vector<Stage>& mutable_analysis_stages() { return analysis_; }
  std::vector<Stage>& mutable_synthesis_stages() { return synthesis_; }

 private:
  Tensor RunStage(Tape& tape, const Stage& stage, const Tensor& x,
                  Direction direction, TapSink* taps) const;

  ModelConfig config_;
  std::vector<Stage> analysis_;
  std::vector<Stage> synthesis_;
  FactorizedPrior prior_;
};

struct RdTerms {
  Tensor total;       // rate_bpp + lambda * 255^2 * mse
  Tensor rate_bpp;
  Tensor distortion;  // 255^2 * mse
};

// p: likelihood of the (noisy or quantized) latent. pixel_count counts the
// whole batch.
RdTerms RdLoss(Tape& tape, const Tensor& x, const Tensor& x_hat,
               const Tensor& p, double lambda, double pixel_count);

// Noisy-latent training forward pass with the given noise seed.
RdTerms TrainingForward(Tape& tape, const Model& model, const Tensor& x,
                        double lambda, uint64_t noise_seed);

// Rounded-latent forward pass used for validation.
RdTerms EvaluationForward(Tape& tape, const Model& model, const Tensor& x,
                          double lambda);

// Replicate-pads an image tensor on the bottom and right to multiples of
// `granularity`.
Tensor ReplicatePad(const Tensor& x, int granularity);
Tensor Crop(const Tensor& x, int height, int width);

}  // namespace easn

#endif  // EASN_MODEL_H_
