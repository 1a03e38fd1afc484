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

#ifndef EASN_NORM_LAYERS_H_
#define EASN_NORM_LAYERS_H_

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "easn/grad_check.h"
#include "easn/ops.h"
#include "easn/rng.h"
#include "easn/tape.h"
#include "easn/tensor.h"

namespace easn {

enum class Variant {
  kGdn,
  kGdnInverse,
  kEasnA,
  kEasnB,
  kEasnC,
  kEasnD,
  kEasnE,
  kEasnF,
  kEasnG,
  kEasnDeep,
};

// Config-file spelling: "GDN", "GDN-INVERSE", "EASN-A" ... "EASN-G",
// "EASN-DEEP".
std::string_view VariantName(Variant variant);
std::optional<Variant> ParseVariant(std::string_view name);
std::vector<Variant> AllVariants();

bool IsGdn(Variant variant);
// Variants that contain the stride-2 resampling conv (EASN-F, -G, -DEEP).
bool IncludesResampling(Variant variant);

enum class Direction { kDown, kUp };

inline constexpr double kLeakySlope = 0.01;
inline constexpr double kGdnBetaFloor = 1e-6;
inline constexpr double kGdnGammaFloor = 0.0;
inline constexpr double kDefaultGdnGammaInit = 0.1;
inline constexpr double kEasnInitScale = 0.1;

// A conv or transposed conv with its weights.
struct ConvLayer {
  Tensor weight;
  Tensor bias;
  ops::ConvOptions options;
  bool transposed = false;

  int kernel() const { return weight.shape().h; }
  int in_channels() const;
  int out_channels() const;
  size_t ParamCount() const { return weight.size() + bias.size(); }

  Tensor Forward(Tape& tape, const Tensor& x) const;
};

// Same-size conv (odd kernel, stride 1) or stride-2 resampling conv with a
// uniform fan-in initialization of half-width gain * sqrt(6 / fan_in).
ConvLayer MakeConv(int in_channels, int out_channels, int kernel, Rng& rng,
                   double gain);
ConvLayer MakeResampling(int in_channels, int out_channels, int kernel,
                         Direction direction, Rng& rng, double gain);

// ---------------------------------------------------------------------------
// GDN

struct GdnParams {
  Tensor beta;   // (1, C, 1, 1) raw storage
  Tensor gamma;  // (C, C, 1, 1) raw storage, gamma(i, j) at [i][j]

  // beta = 1, gamma = gamma_init * I.
  static GdnParams Init(int channels, double gamma_init = kDefaultGdnGammaInit);

  int channels() const { return beta.shape().c; }
  size_t ParamCount() const { return beta.size() + gamma.size(); }
  // Re-applies beta >= 1e-6 and gamma >= 0 to the raw storage.
  void ClampToFloors();
};

// x_i / sqrt(beta_i + sum_j gamma_ij x_j^2)
Tensor GdnForward(Tape& tape, const Tensor& x, const GdnParams& p);
// x_i * sqrt(beta_i + sum_j gamma_ij x_j^2)
Tensor GdnInverseForward(Tape& tape, const Tensor& x, const GdnParams& p);

// Scalar reference form x / sqrt(a + b x^2).
double ScalarGdn(double x, double a, double b);

// Rewrites s(x) = 1/sqrt(beta_i + sum_j gamma_ij x_j^2) as
// channel_scale_i * 1/sqrt(1 + sum_j delta_ij x_j^2).
struct GdnFactorization {
  int channels = 0;
  std::vector<double> delta;          // C x C, row i = output channel
  std::vector<double> channel_scale;  // 1 / sqrt(beta_i)
};
GdnFactorization FactorizeGdn(const GdnParams& p);

// Untaped evaluations of the two sides of the factorization.
Tensor GdnScalingFactor(const Tensor& x, const GdnParams& p);
Tensor NormalizedGdnScalingFactor(const Tensor& x, const GdnFactorization& f);

// ---------------------------------------------------------------------------
// EASN

struct EasnParams {
  Tensor beta;                     // (1, C_out, 1, 1), unconstrained
  std::vector<ConvLayer> s_branch;  // F(.) with leaky ReLU between convs
  std::vector<ConvLayer> m_branch;  // empty: identity mapping
  std::optional<ConvLayer> h_branch;

  int out_channels() const { return beta.shape().c; }
  size_t ParamCount() const;
  std::vector<NamedTensor> Parameters(const std::string& prefix) const;
};

// Kernel sizes of each branch for a variant. For EASN-F/-G the first conv of
// the scaling and mapping branches is the stride-2 resampling one.
struct EasnStructure {
  std::vector<int> s_kernels;
  std::vector<int> m_kernels;  // empty: identity
  std::optional<int> h_kernel;
  bool resampling_branches = false;
};
EasnStructure StructureOf(Variant variant);

// Branch weights use kEasnInitScale-scaled fan-in init, biases and beta zero.
// For non-resampling variants in_channels must equal out_channels.
EasnParams MakeEasnParams(Variant variant, int in_channels, int out_channels,
                          Direction direction, Rng& rng);

// Read-only observer of the input that feeds the scaling branch.
using FeatureTap = std::function<void(const Tensor&)>;

// sigmoid(-beta_i - [F(x)]_i), i.e. 1 / (1 + e^beta_i e^[F(x)]_i).
Tensor ScalingFactorSwish(Tape& tape, const Tensor& x, const EasnParams& p);

// m(x) * s(x) + h(x) + x for EASN-A..E.
Tensor EasnForward(Tape& tape, const Tensor& x, Variant variant,
                   const EasnParams& p, const FeatureTap& tap = {});

// resample(u) + m(u) * s(u) with branches reading the pre-resampling u.
// `variant` is EASN-F (default) or EASN-G.
Tensor EasnFForward(Tape& tape, const Tensor& u, const EasnParams& p,
                    const ConvLayer& resample, const FeatureTap& tap = {},
                    Variant variant = Variant::kEasnF);

// EASN-E(EASN-F(u)).
Tensor EasnDeepForward(Tape& tape, const Tensor& u, const EasnParams& front,
                       const EasnParams& back, const ConvLayer& resample,
                       const FeatureTap& front_tap = {},
                       const FeatureTap& back_tap = {});

// Zeroes every branch weight and bias and sets beta to `beta`; the layer
// then reduces to its skip path.
void ZeroBranches(EasnParams& p, double beta);

}  // namespace easn

#endif  // EASN_NORM_LAYERS_H_
