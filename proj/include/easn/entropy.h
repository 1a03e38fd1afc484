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

#ifndef EASN_ENTROPY_H_
#define EASN_ENTROPY_H_

#include <cstdint>
#include <vector>

#include "easn/grad_check.h"
#include "easn/tape.h"
#include "easn/tensor.h"

namespace easn {

inline constexpr double kLikelihoodFloor = 1e-9;

// Per-channel logistic density. CDF_c(t) = sigmoid((t - loc_c) / s_c) with
// s_c = softplus(raw_scale_c) + 1e-6.
struct FactorizedPrior {
  Tensor loc;        // (1, M, 1, 1)
  Tensor raw_scale;  // (1, M, 1, 1)

  // loc = 0, scale = 1.
  static FactorizedPrior Init(int channels);

  int channels() const { return loc.shape().c; }
  double scale(int channel) const;
  double Cdf(int channel, double t) const;
  // CDF(v + 0.5) - CDF(v - 0.5) without the floor.
  double BinProbability(int channel, double v) const;
  std::vector<NamedTensor> Parameters(const std::string& prefix) const;
};

// y + U(-0.5, 0.5), deterministic given the seed.
Tensor AddUniformNoise(Tape& tape, const Tensor& y, uint64_t seed);

// The noise tensor AddUniformNoise(y, seed) adds.
Tensor UniformNoise(const Shape& shape, uint64_t seed);

// Round half away from zero. Rejects values outside the 32-bit range.
Tensor QuantizeRound(const Tensor& y);
int32_t RoundHalfAwayFromZero(double v);

// Floored bin probabilities of v under the prior.
Tensor Likelihood(Tape& tape, const FactorizedPrior& prior, const Tensor& v);

// -sum(log2 p) in bits.
Tensor RateBits(Tape& tape, const Tensor& p);

}  // namespace easn

#endif  // EASN_ENTROPY_H_
