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

#ifndef EASN_GRAD_CHECK_H_
#define EASN_GRAD_CHECK_H_

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "easn/tape.h"
#include "easn/tensor.h"

namespace easn {

// Builds a scalar loss on the given tape from the current parameter values.
using LossFn = std::function<Tensor(Tape&)>;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckGroup {
  std::string name;
  size_t elements = 0;
  // Elements whose stencil [t - eps, t + eps] changes the branch of a
  // piecewise op (see ops::RegionTrace). Their central difference does not
  // estimate the derivative, so they are left out of the error.
  size_t skipped = 0;
  double max_relative_error = 0.0;
  // Element with the largest error.
  size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_relative_error = 0.0;
  size_t elements = 0;
  size_t skipped = 0;
};

// Compares reverse-mode gradients of `loss` against central differences
// (f(t + eps) - f(t - eps)) / (2 eps), element by element. The per-element
// error is |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
//
// Elements whose stencil crosses a kink are counted in `skipped` instead.
//
// Rejects eps outside [1e-6, 1e-2] and losses that are not reproducible
// between two evaluations at the same point. Parameter gradients are
// overwritten.
GradCheckReport GradCheck(const LossFn& loss, std::span<NamedTensor> params,
                          double eps);

double GradCheck(const LossFn& loss, std::span<Tensor> params, double eps);

}  // namespace easn

#endif  // EASN_GRAD_CHECK_H_
