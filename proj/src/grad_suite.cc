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

#include "easn/grad_suite.h"

#include <fmt/format.h>

#include "easn/entropy.h"
#include "easn/model.h"
#include "easn/ops.h"
#include "easn/rng.h"

namespace easn {
namespace {

constexpr int kChannels = 4;
constexpr int kSide = 6;

Tensor RandomTensor(const Shape& s, Rng& rng, double lo, double hi, bool requires_grad) {
  std::vector<double> d(s.size());
  for (double& v : d) v = rng.Uniform(lo, hi);
  return Tensor::FromData(s, std::move(d), requires_grad);
}

void Randomize(Tensor t, Rng& rng, double lo, double hi) {
  for (double& v : t.mutable_data()) v = rng.Uniform(lo, hi);
}

// Moves parameters off their init values (zero biases, zero beta) so that
// every gradient is generic.
void RandomizeEasn(const EasnParams& p, Rng& rng) {
  Randomize(p.beta, rng, -1.0, 1.0);
  auto conv = [&](const ConvLayer& c) {
    const Shape& w = c.weight.shape();
    const double bound = 1.5 / std::sqrt(static_cast<double>(w.c * w.h * w.w));
    Randomize(c.weight, rng, -bound, bound);
    Randomize(c.bias, rng, -0.3, 0.3);
  };
  for (const ConvLayer& c : p.s_branch) conv(c);
  for (const ConvLayer& c : p.m_branch) conv(c);
  if (p.h_branch) conv(*p.h_branch);
}

void RandomizeGdn(const GdnParams& p, Rng& rng) {
  Randomize(p.beta, rng, 0.5, 1.5);
  Randomize(p.gamma, rng, 0.05, 0.3);
}

// Checks sum(w * f(x)) over x and `params`.
GradCheckReport CheckWeightedSum(const std::function<Tensor(Tape&, const Tensor&)>& f,
                                 std::vector<NamedTensor> params, Rng& rng, double eps,
                                 const std::string& prefix) {
  Tensor x = RandomTensor({1, kChannels, kSide, kSide}, rng, -1.5, 1.5, true);
  Tape probe;
  const Shape out_shape = f(probe, x).shape();
  const Tensor w = RandomTensor(out_shape, rng, -1.0, 1.0, false);
  LossFn loss = [&](Tape& tape) {
    return ops::Sum(tape, ops::Mul(tape, f(tape, x), w));
  };
  params.insert(params.begin(), NamedTensor{"input", x});
  GradCheckReport report = GradCheck(loss, params, eps);
  for (GradCheckGroup& g : report.groups) g.name = prefix + g.name;
  return report;
}

std::vector<const Stage*> StagePointers(const Model& model) {
  std::vector<const Stage*> out;
  for (const Stage& s : model.analysis_stages()) out.push_back(&s);
  for (const Stage& s : model.synthesis_stages()) out.push_back(&s);
  return out;
}

void Merge(GradCheckReport& into, const GradCheckReport& from) {
  into.groups.insert(into.groups.end(), from.groups.begin(), from.groups.end());
  into.max_relative_error = std::max(into.max_relative_error, from.max_relative_error);
  into.elements += from.elements;
  into.skipped += from.skipped;
}

}  // namespace

SuiteResult CheckLayerGradients(Variant variant, uint64_t seed, double eps) {
  SuiteResult result{std::string(VariantName(variant)), seed, {}};
  Rng rng(DeriveSeed(seed, 100 + static_cast<uint64_t>(variant)));
  if (IsGdn(variant)) {
    const GdnParams p = GdnParams::Init(kChannels);
    RandomizeGdn(p, rng);
    const bool inverse = variant == Variant::kGdnInverse;
    result.report = CheckWeightedSum(
        [&](Tape& tape, const Tensor& x) {
          return inverse ? GdnInverseForward(tape, x, p) : GdnForward(tape, x, p);
        },
        {{"beta", p.beta}, {"gamma", p.gamma}}, rng, eps, "");
    return result;
  }
  if (!IncludesResampling(variant)) {
    const EasnParams p = MakeEasnParams(variant, kChannels, kChannels, Direction::kDown, rng);
    RandomizeEasn(p, rng);
    result.report = CheckWeightedSum(
        [&](Tape& tape, const Tensor& x) { return EasnForward(tape, x, variant, p); },
        p.Parameters("easn"), rng, eps, "");
    return result;
  }
  for (Direction dir : {Direction::kDown, Direction::kUp}) {
    const std::string prefix = dir == Direction::kDown ? "down." : "up.";
    const ConvLayer resample = MakeResampling(kChannels, kChannels, 5, dir, rng, 1.0);
    Randomize(resample.bias, rng, -0.3, 0.3);
    std::vector<NamedTensor> params = {{"resample.weight", resample.weight},
                                       {"resample.bias", resample.bias}};
    if (variant == Variant::kEasnDeep) {
      const EasnParams front =
          MakeEasnParams(Variant::kEasnF, kChannels, kChannels, dir, rng);
      const EasnParams back =
          MakeEasnParams(Variant::kEasnE, kChannels, kChannels, dir, rng);
      RandomizeEasn(front, rng);
      RandomizeEasn(back, rng);
      for (auto& p : front.Parameters("front")) params.push_back(p);
      for (auto& p : back.Parameters("back")) params.push_back(p);
      Merge(result.report,
            CheckWeightedSum(
                [&](Tape& tape, const Tensor& u) {
                  return EasnDeepForward(tape, u, front, back, resample);
                },
                params, rng, eps, prefix));
    } else {
      const EasnParams p = MakeEasnParams(variant, kChannels, kChannels, dir, rng);
      RandomizeEasn(p, rng);
      for (auto& np : p.Parameters("easn")) params.push_back(np);
      Merge(result.report,
            CheckWeightedSum(
                [&](Tape& tape, const Tensor& u) {
                  return EasnFForward(tape, u, p, resample, {}, variant);
                },
                params, rng, eps, prefix));
    }
  }
  return result;
}

SuiteResult CheckPriorGradients(uint64_t seed, double eps) {
  SuiteResult result{"prior-likelihood", seed, {}};
  Rng rng(DeriveSeed(seed, 200));
  FactorizedPrior prior = FactorizedPrior::Init(kChannels);
  Randomize(prior.loc, rng, -0.5, 0.5);
  Randomize(prior.raw_scale, rng, -0.5, 1.0);
  for (NamedTensor p : prior.Parameters("prior")) p.tensor.set_requires_grad(true);
  Tensor v = RandomTensor({1, kChannels, kSide, kSide}, rng, -3.0, 3.0, true);
  LossFn loss = [&](Tape& tape) { return RateBits(tape, Likelihood(tape, prior, v)); };
  std::vector<NamedTensor> params = prior.Parameters("prior");
  params.insert(params.begin(), NamedTensor{"latent", v});
  result.report = GradCheck(loss, params, eps);
  return result;
}

SuiteResult CheckRdLossGradients(Variant variant, uint64_t seed, double eps) {
  SuiteResult result{fmt::format("rd_loss/{}", VariantName(variant)), seed, {}};
  ModelConfig config;
  config.stages = 2;
  config.base_channels = 4;
  config.latent_channels = 8;
  config.variant = variant;
  config.seed = DeriveSeed(seed, 300);
  Model model(config);
  model.SetRequiresGrad(true);
  Rng rng(DeriveSeed(seed, 301));
  // Freshly initialized EASN branches are nearly silent and off-diagonal GDN
  // gammas sit on their floor, where max(gamma, 0) has a kink.
  for (const Stage* stage : StagePointers(model)) {
    if (stage->gdn) RandomizeGdn(*stage->gdn, rng);
    if (stage->easn) RandomizeEasn(*stage->easn, rng);
    if (stage->back) RandomizeEasn(*stage->back, rng);
  }
  Tensor x = RandomTensor({1, 3, 8, 8}, rng, 0.0, 1.0, true);
  const uint64_t noise_seed = DeriveSeed(seed, 302);
  LossFn loss = [&](Tape& tape) {
    return TrainingForward(tape, model, x, 0.01, noise_seed).total;
  };
  std::vector<NamedTensor> params = model.Parameters();
  params.insert(params.begin(), NamedTensor{"input", x});
  result.report = GradCheck(loss, params, eps);
  return result;
}

}  // namespace easn
