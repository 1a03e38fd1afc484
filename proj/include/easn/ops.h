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

#ifndef EASN_OPS_H_
#define EASN_OPS_H_

#include <cstdint>

#include "easn/tape.h"
#include "easn/tensor.h"

// Differentiable tensor operations. Every op returns a fresh tensor and, when
// any input requires a gradient, records its backward rule on `tape`.
namespace easn::ops {

struct ConvOptions {
  int stride = 1;
  int pad = 0;             // zero padding on every side
  int output_padding = 0;  // transposed conv only, extra rows/cols at the end
};

int ConvOutputSize(int in, int kernel, int stride, int pad);
int ConvTransposeOutputSize(int in, int kernel, int stride, int pad,
                            int output_padding);

// weight: (C_out, C_in, k, k); bias: (1, C_out, 1, 1) or undefined.
Tensor Conv2d(Tape& tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias, ConvOptions options);

// Adjoint of Conv2d. weight: (C_in, C_out, k, k), the same layout as the
// Conv2d whose input-gradient this computes; bias: (1, C_out, 1, 1).
Tensor ConvTranspose2d(Tape& tape, const Tensor& x, const Tensor& weight,
                       const Tensor& bias, ConvOptions options);

Tensor LeakyRelu(Tape& tape, const Tensor& x, double negative_slope);
Tensor Sigmoid(Tape& tape, const Tensor& x);
Tensor Softplus(Tape& tape, const Tensor& x);
Tensor Square(Tape& tape, const Tensor& x);
Tensor Sqrt(Tape& tape, const Tensor& x);
Tensor Rsqrt(Tape& tape, const Tensor& x);
Tensor Scale(Tape& tape, const Tensor& x, double factor);
Tensor Neg(Tape& tape, const Tensor& x);

// max(x, floor) with the gradient passed through wherever x >= floor, so that
// parameters sitting exactly on their floor keep receiving updates.
Tensor ClampMin(Tape& tape, const Tensor& x, double floor);

Tensor Add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b);

// x + v broadcast over batch and space; v: (1, C, 1, 1).
Tensor AddChannel(Tape& tape, const Tensor& x, const Tensor& v);

Tensor Sum(Tape& tape, const Tensor& x);
Tensor Mean(Tape& tape, const Tensor& x);
Tensor MeanSquaredError(Tape& tape, const Tensor& a, const Tensor& b);

// Probability of the unit bin centred on v under a per-channel logistic
// density with location `loc` and scale softplus(raw_scale) + kScaleFloor,
// floored at `floor`. loc, raw_scale: (1, C, 1, 1).
inline constexpr double kScaleFloor = 1e-6;
Tensor LogisticBinProbability(Tape& tape, const Tensor& v, const Tensor& loc,
                              const Tensor& raw_scale, double floor);

// -sum(log2 p). Every p must lie in (0, 1].
Tensor SumNegLog2(Tape& tape, const Tensor& p);

// Piecewise-defined ops (LeakyRelu, ClampMin, the likelihood floor) report
// the branch taken by every element to the innermost live RegionTrace of the
// calling thread. Two evaluations with equal digests went through the same
// smooth piece of the function.
class RegionTrace {
 public:
  RegionTrace();
  ~RegionTrace();
  RegionTrace(const RegionTrace&) = delete;
  RegionTrace& operator=(const RegionTrace&) = delete;

  uint64_t digest() const { return digest_; }

  // No-op without a live trace.
  static void Note(bool branch);

 private:
  uint64_t digest_ = 0xcbf29ce484222325ULL;
  RegionTrace* previous_;
};

// Non-recording helpers.
double StableSigmoid(double x);
double StableSoftplus(double x);

}  // namespace easn::ops

#endif  // EASN_OPS_H_
