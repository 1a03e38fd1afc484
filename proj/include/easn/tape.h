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

#ifndef EASN_TAPE_H_
#define EASN_TAPE_H_

#include <functional>
#include <vector>

#include "easn/tensor.h"

namespace easn {

// Records differentiable operations in execution order and replays their
// local backward rules in reverse.
//
// An op is recorded only when at least one input requires a gradient. The
// backward rule reads the output's gradient and accumulates into the
// gradients of inputs that require one. Leaf gradients accumulate across
// Backward() calls; gradients of recorded outputs are reset at the start of
// every call.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void Record(std::vector<Tensor> inputs, Tensor output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule once, newest
  // first. `loss` must be a scalar produced on this tape (or a leaf).
  void Backward(const Tensor& loss);

  size_t size() const { return nodes_.size(); }
  void Clear() { nodes_.clear(); }

 private:
  struct Node {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
};

// True when any of `inputs` needs a gradient, i.e. the op must be recorded.
bool AnyRequiresGrad(std::initializer_list<const Tensor*> inputs);

}  // namespace easn

#endif  // EASN_TAPE_H_
