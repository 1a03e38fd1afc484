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

#include "easn/model.h"

#include <algorithm>

#include "easn/error.h"
#include "easn/ops.h"
#include "easn/rng.h"

namespace easn {
namespace {

constexpr int kImageChannels = 3;
constexpr double kPixelPeak = 255.0;

Tensor Clamp01(const Tensor& x) {
  Tensor out = x.Clone();
  for (double& v : out.mutable_data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

void AppendConv(std::vector<NamedTensor>& out, const std::string& prefix,
                const ConvLayer& conv) {
  out.push_back({prefix + ".weight", conv.weight});
  out.push_back({prefix + ".bias", conv.bias});
}

}  // namespace

void ModelConfig::Validate() const {
  EASN_REQUIRE(stages >= 1 && stages <= 8, "stages must be in [1, 8], got {}", stages);
  EASN_REQUIRE(base_channels >= 1, "base channels must be >= 1, got {}", base_channels);
  EASN_REQUIRE(latent_channels >= 1, "latent channels must be >= 1, got {}",
               latent_channels);
  EASN_REQUIRE(kernel >= 1 && kernel % 2 == 1, "kernel must be odd, got {}", kernel);
  EASN_REQUIRE(variant != Variant::kGdnInverse,
               "GDN-INVERSE is a layer, not a model variant; use GDN");
  EASN_REQUIRE(gdn_gamma_init >= 0.0, "GDN gamma init must be >= 0");
}

std::vector<ChannelPreset> FullScaleChannelPresets() {
  return {{0.005, 128, 192}, {0.010, 128, 192}, {0.020, 192, 320},
          {0.035, 192, 320}, {0.080, 192, 320}, {0.180, 192, 320}};
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.Validate();
  Rng rng(DeriveSeed(config_.seed, 0));
  const int s = config_.stages;
  const int n = config_.base_channels;
  const int m = config_.latent_channels;
  const Variant v = config_.variant;

  auto make_stage = [&](int in, int out, Direction direction) {
    Stage stage;
    stage.resample = MakeResampling(in, out, config_.kernel, direction, rng, 1.0);
    if (IncludesResampling(v)) {
      stage.norm = v;
      const Variant front = v == Variant::kEasnDeep ? Variant::kEasnF : v;
      stage.easn = MakeEasnParams(front, in, out, direction, rng);
      if (v == Variant::kEasnDeep) {
        stage.back = MakeEasnParams(Variant::kEasnE, out, out, direction, rng);
      }
      return stage;
    }
    const int channels = direction == Direction::kDown ? out : in;
    if (IsGdn(v)) {
      stage.norm = direction == Direction::kDown ? Variant::kGdn : Variant::kGdnInverse;
      stage.gdn = GdnParams::Init(channels, config_.gdn_gamma_init);
    } else {
      stage.norm = v;
      stage.easn = MakeEasnParams(v, channels, channels, direction, rng);
    }
    return stage;
  };

  for (int i = 0; i < s; ++i) {
    analysis_.push_back(make_stage(i == 0 ? kImageChannels : n, i == s - 1 ? m : n,
                                   Direction::kDown));
  }
  for (int i = 0; i < s; ++i) {
    synthesis_.push_back(make_stage(i == 0 ? m : n, i == s - 1 ? kImageChannels : n,
                                    Direction::kUp));
  }
  prior_ = FactorizedPrior::Init(m);
}

Tensor Model::RunStage(Tape& tape, const Stage& stage, const Tensor& x,
                       Direction direction, TapSink* taps) const {
  auto tap_to = [taps](const char* name) -> FeatureTap {
    if (taps == nullptr) return {};
    return [taps, name](const Tensor& t) { (*taps)[name] = t; };
  };
  switch (stage.norm) {
    case Variant::kEasnF:
    case Variant::kEasnG:
      return EasnFForward(tape, x, *stage.easn, stage.resample, tap_to("first"),
                          stage.norm);
    case Variant::kEasnDeep:
      return EasnDeepForward(tape, x, *stage.easn, *stage.back, stage.resample,
                             tap_to("front"), tap_to("back"));
    default:
      break;
  }
  auto normalize = [&](const Tensor& h) {
    switch (stage.norm) {
      case Variant::kGdn:
        if (taps) (*taps)["first"] = h;
        return GdnForward(tape, h, *stage.gdn);
      case Variant::kGdnInverse:
        return GdnInverseForward(tape, h, *stage.gdn);
      default:
        return EasnForward(tape, h, stage.norm, *stage.easn, tap_to("first"));
    }
  };
  if (direction == Direction::kDown) {
    return normalize(stage.resample.Forward(tape, x));
  }
  return stage.resample.Forward(tape, normalize(x));
}

Tensor Model::Analysis(Tape& tape, const Tensor& x, TapSink* taps) const {
  const Shape& s = x.shape();
  EASN_REQUIRE(s.c == kImageChannels, "analysis expects {} channels, got {}",
               kImageChannels, s.c);
  const int g = config_.Granularity();
  EASN_REQUIRE(s.h % g == 0 && s.w % g == 0,
               "image {}x{} must be padded to multiples of {} (needs {} more rows, "
               "{} more columns)",
               s.h, s.w, g, (g - s.h % g) % g, (g - s.w % g) % g);
  Tensor h = x;
  for (size_t i = 0; i < analysis_.size(); ++i) {
    h = RunStage(tape, analysis_[i], h, Direction::kDown, i == 0 ? taps : nullptr);
  }
  return h;
}

Tensor Model::Synthesis(Tape& tape, const Tensor& y_hat) const {
  EASN_REQUIRE(y_hat.shape().c == config_.latent_channels,
               "synthesis expects {} latent channels, got {}",
               config_.latent_channels, y_hat.shape().c);
  Tensor h = y_hat;
  for (const Stage& stage : synthesis_) {
    h = RunStage(tape, stage, h, Direction::kUp, nullptr);
  }
  return h;
}

std::vector<NamedTensor> Model::Parameters() const {
  std::vector<NamedTensor> out;
  auto add_stages = [&](const std::vector<Stage>& stages, const char* name) {
    for (size_t i = 0; i < stages.size(); ++i) {
      const Stage& st = stages[i];
      const std::string base = fmt::format("{}.{}", name, i);
      AppendConv(out, base + ".resample", st.resample);
      if (st.gdn) {
        out.push_back({base + ".gdn.beta", st.gdn->beta});
        out.push_back({base + ".gdn.gamma", st.gdn->gamma});
      }
      if (st.easn) {
        for (auto& p : st.easn->Parameters(base + ".easn")) out.push_back(std::move(p));
      }
      if (st.back) {
        for (auto& p : st.back->Parameters(base + ".back")) out.push_back(std::move(p));
      }
    }
  };
  add_stages(analysis_, "ga");
  add_stages(synthesis_, "gs");
  for (auto& p : prior_.Parameters("prior")) out.push_back(std::move(p));
  return out;
}

size_t Model::ParamCount() const {
  size_t count = 0;
  for (const NamedTensor& p : Parameters()) count += p.tensor.size();
  return count;
}

size_t Model::NormParamCount() const {
  size_t count = 0;
  for (const auto* stages : {&analysis_, &synthesis_}) {
    for (const Stage& st : *stages) {
      if (st.gdn) count += st.gdn->ParamCount();
      if (st.easn) count += st.easn->ParamCount();
      if (st.back) count += st.back->ParamCount();
    }
  }
  return count;
}

void Model::SetRequiresGrad(bool value) {
  for (NamedTensor& p : Parameters()) p.tensor.set_requires_grad(value);
}

void Model::ClampParameters() {
  for (auto* stages : {&analysis_, &synthesis_}) {
    for (Stage& st : *stages) {
      if (st.gdn) st.gdn->ClampToFloors();
    }
  }
}

std::vector<std::string> Model::TapNames() const {
  if (config_.variant == Variant::kEasnDeep) return {"front", "back"};
  return {"first"};
}

RdTerms RdLoss(Tape& tape, const Tensor& x, const Tensor& x_hat, const Tensor& p,
               double lambda, double pixel_count) {
  EASN_REQUIRE(pixel_count > 0, "pixel count must be positive");
  EASN_REQUIRE(lambda >= 0, "lambda must be non-negative, got {}", lambda);
  RdTerms terms;
  terms.rate_bpp = ops::Scale(tape, RateBits(tape, p), 1.0 / pixel_count);
  terms.distortion = ops::Scale(tape, ops::MeanSquaredError(tape, x, x_hat),
                                kPixelPeak * kPixelPeak);
  terms.total = ops::Add(tape, terms.rate_bpp, ops::Scale(tape, terms.distortion, lambda));
  return terms;
}

RdTerms TrainingForward(Tape& tape, const Model& model, const Tensor& x,
                        double lambda, uint64_t noise_seed) {
  const Tensor y = model.Analysis(tape, x);
  const Tensor y_tilde = AddUniformNoise(tape, y, noise_seed);
  const Tensor p = Likelihood(tape, model.prior(), y_tilde);
  const Tensor x_hat = model.Synthesis(tape, y_tilde);
  const Shape& s = x.shape();
  return RdLoss(tape, x, x_hat, p, lambda, static_cast<double>(s.n) * s.h * s.w);
}

RdTerms EvaluationForward(Tape& tape, const Model& model, const Tensor& x,
                          double lambda) {
  const Tensor y_hat = QuantizeRound(model.Analysis(tape, x));
  const Tensor p = Likelihood(tape, model.prior(), y_hat);
  const Tensor x_hat = Clamp01(model.Synthesis(tape, y_hat));
  const Shape& s = x.shape();
  return RdLoss(tape, x, x_hat, p, lambda, static_cast<double>(s.n) * s.h * s.w);
}

Tensor ReplicatePad(const Tensor& x, int granularity) {
  EASN_REQUIRE(granularity >= 1, "granularity must be positive");
  const Shape& s = x.shape();
  const int h = (s.h + granularity - 1) / granularity * granularity;
  const int w = (s.w + granularity - 1) / granularity * granularity;
  if (h == s.h && w == s.w) return x;
  const Shape os{s.n, s.c, h, w};
  Tensor out = Tensor::Zeros(os);
  auto in = x.data();
  auto d = out.mutable_data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < h; ++y) {
        const int sy = std::min(y, s.h - 1);
        for (int xx = 0; xx < w; ++xx) {
          d[Offset(os, n, c, y, xx)] = in[Offset(s, n, c, sy, std::min(xx, s.w - 1))];
        }
      }
    }
  }
  return out;
}

Tensor Crop(const Tensor& x, int height, int width) {
  const Shape& s = x.shape();
  EASN_REQUIRE(height >= 1 && width >= 1 && height <= s.h && width <= s.w,
               "cannot crop {} to {}x{}", s.ToString(), height, width);
  const Shape os{s.n, s.c, height, width};
  Tensor out = Tensor::Zeros(os);
  auto in = x.data();
  auto d = out.mutable_data();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      for (int y = 0; y < height; ++y) {
        for (int xx = 0; xx < width; ++xx) {
          d[Offset(os, n, c, y, xx)] = in[Offset(s, n, c, y, xx)];
        }
      }
    }
  }
  return out;
}

}  // namespace easn
