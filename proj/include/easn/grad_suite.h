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

#ifndef EASN_GRAD_SUITE_H_
#define EASN_GRAD_SUITE_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "easn/grad_check.h"
#include "easn/norm_layers.h"

namespace easn {

inline constexpr double kGradCheckEps = 1e-4;
inline constexpr double kGradCheckTolerance = 1e-4;

struct SuiteResult {
  std::string subject;  // layer or loss under test
  uint64_t seed = 0;
  GradCheckReport report;

  bool passed(double tolerance = kGradCheckTolerance) const {
    return report.max_relative_error <= tolerance;
  }
};

// One normalization layer on a random 1x4x6x6 input with randomized
// parameters; loss = sum(w * layer(x)) for random w. Resampling variants are
// checked in both directions.
SuiteResult CheckLayerGradients(Variant variant, uint64_t seed,
                                double eps = kGradCheckEps);

// Rate of a random 1x4x6x6 latent under a randomized factorized prior.
SuiteResult CheckPriorGradients(uint64_t seed, double eps = kGradCheckEps);

// Noisy-latent rd_loss of a tiny model (2 stages, N=4, M=8) on an 8x8
// image, against every model parameter and the input.
SuiteResult CheckRdLossGradients(Variant variant, uint64_t seed,
                                 double eps = kGradCheckEps);

}  // namespace easn

#endif  // EASN_GRAD_SUITE_H_
