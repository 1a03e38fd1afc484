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

#include "easn/tape.h"

#include "easn/error.h"

namespace easn {

void Tape::Record(std::vector<Tensor> inputs, Tensor output,
                  BackwardFn backward) {
  EASN_ENSURE(output.defined(), "recording an undefined output");
  nodes_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void Tape::Backward(const Tensor& loss) {
  EASN_REQUIRE(loss.defined() && loss.size() == 1,
               "backward needs a scalar loss, got {}",
               loss.defined() ? loss.shape().ToString() : "undefined");
  EASN_REQUIRE(loss.requires_grad(), "loss does not depend on any parameter");

  // Interior gradients are per-call scratch.
  for (Node& node : nodes_) node.output.ZeroGrad();

  Tensor seed = loss;
  seed.mutable_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
  }
}

bool AnyRequiresGrad(std::initializer_list<const Tensor*> inputs) {
  for (const Tensor* t : inputs) {
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

}  // namespace easn
