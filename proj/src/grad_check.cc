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

#include "easn/grad_check.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "easn/error.h"
#include "easn/ops.h"

namespace easn {
namespace {

struct Evaluation {
  double value;
  uint64_t region;
};

Evaluation Evaluate(const LossFn& loss) {
  ops::RegionTrace trace;
  Tape tape;
  Tensor value = loss(tape);
  EASN_REQUIRE(value.size() == 1, "grad check loss must be scalar, got {}",
               value.shape().ToString());
  return {value.item(), trace.digest()};
}

constexpr size_t kNone = static_cast<size_t>(-1);

bool BitEqual(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

GradCheckReport GradCheck(const LossFn& loss, std::span<NamedTensor> params,
                          double eps) {
  EASN_REQUIRE(eps >= 1e-6 && eps <= 1e-2, "grad check eps {} outside [1e-6, 1e-2]",
               eps);

  std::vector<bool> previous(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    previous[i] = params[i].tensor.requires_grad();
    params[i].tensor.set_requires_grad(true);
    params[i].tensor.ClearGrad();
  }

  std::vector<std::vector<double>> analytic(params.size());
  {
    Tape tape;
    Tensor value = loss(tape);
    EASN_REQUIRE(value.size() == 1, "grad check loss must be scalar, got {}",
                 value.shape().ToString());
    if (value.requires_grad()) tape.Backward(value);
    for (size_t i = 0; i < params.size(); ++i) {
      Tensor& t = params[i].tensor;
      if (t.has_grad()) {
        analytic[i].assign(t.grad().begin(), t.grad().end());
      } else {
        analytic[i].assign(t.size(), 0.0);
      }
    }
  }

  // Finite differences do not need the tape.
  for (NamedTensor& p : params) p.tensor.set_requires_grad(false);

  const Evaluation reference = Evaluate(loss);
  const Evaluation again = Evaluate(loss);
  EASN_REQUIRE(BitEqual(reference.value, again.value) && reference.region == again.region,
               "grad check loss is not deterministic (unseeded randomness?)");

  GradCheckReport report;
  for (size_t i = 0; i < params.size(); ++i) {
    GradCheckGroup group{params[i].name, params[i].tensor.size()};
    group.worst_index = kNone;
    auto data = params[i].tensor.mutable_data();
    for (size_t k = 0; k < data.size(); ++k) {
      const double saved = data[k];
      data[k] = saved + eps;
      const Evaluation plus = Evaluate(loss);
      data[k] = saved - eps;
      const Evaluation minus = Evaluate(loss);
      data[k] = saved;
      if (plus.region != reference.region || minus.region != reference.region) {
        ++group.skipped;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * eps);
      const double a = analytic[i][k];
      const double err =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      if (err > group.max_relative_error || group.worst_index == kNone) {
        group.max_relative_error = err;
        group.worst_index = k;
        group.worst_analytic = a;
        group.worst_numeric = numeric;
      }
    }
    if (group.worst_index == kNone) group.worst_index = 0;
    report.max_relative_error =
        std::max(report.max_relative_error, group.max_relative_error);
    report.elements += group.elements;
    report.skipped += group.skipped;
    report.groups.push_back(std::move(group));
  }

  for (size_t i = 0; i < params.size(); ++i) {
    params[i].tensor.set_requires_grad(previous[i]);
  }
  return report;
}

double GradCheck(const LossFn& loss, std::span<Tensor> params, double eps) {
  std::vector<NamedTensor> named;
  named.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    named.push_back({fmt::format("param{}", i), params[i]});
  }
  return GradCheck(loss, named, eps).max_relative_error;
}

}  // namespace easn
