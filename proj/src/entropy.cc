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

#include "easn/entropy.h"

#include <cmath>
#include <limits>

#include "easn/error.h"
#include "easn/ops.h"
#include "easn/rng.h"

namespace easn {

FactorizedPrior FactorizedPrior::Init(int channels) {
  EASN_REQUIRE(channels > 0, "prior needs at least one channel");
  // softplus(raw) = 1  <=>  raw = log(e - 1)
  const double unit_scale_raw = std::log(std::exp(1.0) - 1.0);
  return {Tensor::Zeros({1, channels, 1, 1}, true),
          Tensor::Filled({1, channels, 1, 1}, unit_scale_raw, true)};
}

double FactorizedPrior::scale(int channel) const {
  return ops::StableSoftplus(raw_scale.data()[channel]) + ops::kScaleFloor;
}

double FactorizedPrior::Cdf(int channel, double t) const {
  return ops::StableSigmoid((t - loc.data()[channel]) / scale(channel));
}

double FactorizedPrior::BinProbability(int channel, double v) const {
  // Same tail-side evaluation as the training op.
  const double s = scale(channel);
  const double t = v - loc.data()[channel];
  const double upper = (t + 0.5) / s;
  const double lower = (t - 0.5) / s;
  const double sign = (upper + lower) > 0 ? -1.0 : 1.0;
  return std::abs(ops::StableSigmoid(sign * upper) -
                  ops::StableSigmoid(sign * lower));
}

std::vector<NamedTensor> FactorizedPrior::Parameters(
    const std::string& prefix) const {
  return {{prefix + ".loc", loc}, {prefix + ".raw_scale", raw_scale}};
}

Tensor UniformNoise(const Shape& shape, uint64_t seed) {
  Rng rng(seed);
  std::vector<double> noise(shape.size());
  for (double& u : noise) u = rng.Uniform01() - 0.5;
  return Tensor::FromData(shape, std::move(noise));
}

Tensor AddUniformNoise(Tape& tape, const Tensor& y, uint64_t seed) {
  return ops::Add(tape, y, UniformNoise(y.shape(), seed));
}

int32_t RoundHalfAwayFromZero(double v) {
  EASN_REQUIRE(std::isfinite(v), "cannot quantize non-finite value {}", v);
  const double r = std::round(v);  // halfway cases away from zero
  EASN_REQUIRE(r >= std::numeric_limits<int32_t>::min() &&
                   r <= std::numeric_limits<int32_t>::max(),
               "value {} outside the representable symbol range", v);
  return static_cast<int32_t>(r);
}

Tensor QuantizeRound(const Tensor& y) {
  Tensor out = Tensor::Zeros(y.shape());
  auto in = y.data();
  auto q = out.mutable_data();
  for (size_t i = 0; i < in.size(); ++i) q[i] = RoundHalfAwayFromZero(in[i]);
  return out;
}

Tensor Likelihood(Tape& tape, const FactorizedPrior& prior, const Tensor& v) {
  return ops::LogisticBinProbability(tape, v, prior.loc, prior.raw_scale,
                                     kLikelihoodFloor);
}

Tensor RateBits(Tape& tape, const Tensor& p) { return ops::SumNegLog2(tape, p); }

}  // namespace easn
