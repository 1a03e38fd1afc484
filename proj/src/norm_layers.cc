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

#include "easn/norm_layers.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "easn/error.h"

namespace easn {
namespace {

struct VariantEntry {
  Variant variant;
  std::string_view name;
};

constexpr std::array<VariantEntry, 10> kVariants{{
    {Variant::kGdn, "GDN"},
    {Variant::kGdnInverse, "GDN-INVERSE"},
    {Variant::kEasnA, "EASN-A"},
    {Variant::kEasnB, "EASN-B"},
    {Variant::kEasnC, "EASN-C"},
    {Variant::kEasnD, "EASN-D"},
    {Variant::kEasnE, "EASN-E"},
    {Variant::kEasnF, "EASN-F"},
    {Variant::kEasnG, "EASN-G"},
    {Variant::kEasnDeep, "EASN-DEEP"},
}};

Tensor RandomUniform(const Shape& shape, double bound, Rng& rng) {
  std::vector<double> data(shape.size());
  for (double& v : data) v = rng.Uniform(-bound, bound);
  return Tensor::FromData(shape, std::move(data), true);
}

Tensor RunBranch(Tape& tape, const Tensor& x,
                 const std::vector<ConvLayer>& branch) {
  Tensor h = x;
  for (size_t i = 0; i < branch.size(); ++i) {
    if (i > 0) h = ops::LeakyRelu(tape, h, kLeakySlope);
    h = branch[i].Forward(tape, h);
  }
  return h;
}

void CheckBranch(const std::vector<ConvLayer>& branch,
                 const std::vector<int>& kernels, bool resampling,
                 const char* name, Variant variant) {
  EASN_REQUIRE(branch.size() == kernels.size(),
               "{}: {} branch has {} convs, variant expects {}",
               VariantName(variant), name, branch.size(), kernels.size());
  for (size_t i = 0; i < branch.size(); ++i) {
    EASN_REQUIRE(branch[i].kernel() == kernels[i],
                 "{}: {} branch conv {} is {}x{}, variant expects {}x{}",
                 VariantName(variant), name, i, branch[i].kernel(),
                 branch[i].kernel(), kernels[i], kernels[i]);
    const bool strided = branch[i].options.stride != 1;
    EASN_REQUIRE(strided == (resampling && i == 0),
                 "{}: {} branch conv {} has unexpected stride {}",
                 VariantName(variant), name, i, branch[i].options.stride);
  }
}

void CheckStructure(Variant variant, const EasnParams& p) {
  const EasnStructure s = StructureOf(variant);
  CheckBranch(p.s_branch, s.s_kernels, s.resampling_branches, "scaling", variant);
  CheckBranch(p.m_branch, s.m_kernels, s.resampling_branches, "mapping", variant);
  EASN_REQUIRE(p.h_branch.has_value() == s.h_kernel.has_value(),
               "{}: shift branch presence does not match the variant",
               VariantName(variant));
  if (s.h_kernel) {
    EASN_REQUIRE(p.h_branch->kernel() == *s.h_kernel,
                 "{}: shift conv is {}x{}, variant expects {}x{}",
                 VariantName(variant), p.h_branch->kernel(),
                 p.h_branch->kernel(), *s.h_kernel, *s.h_kernel);
  }
}

}  // namespace

std::string_view VariantName(Variant variant) {
  for (const auto& e : kVariants) {
    if (e.variant == variant) return e.name;
  }
  return "?";
}

std::optional<Variant> ParseVariant(std::string_view name) {
  for (const auto& e : kVariants) {
    if (e.name == name) return e.variant;
  }
  return std::nullopt;
}

std::vector<Variant> AllVariants() {
  std::vector<Variant> out;
  for (const auto& e : kVariants) out.push_back(e.variant);
  return out;
}

bool IsGdn(Variant variant) {
  return variant == Variant::kGdn || variant == Variant::kGdnInverse;
}

bool IncludesResampling(Variant variant) {
  return variant == Variant::kEasnF || variant == Variant::kEasnG ||
         variant == Variant::kEasnDeep;
}

int ConvLayer::in_channels() const {
  return transposed ? weight.shape().n : weight.shape().c;
}

int ConvLayer::out_channels() const {
  return transposed ? weight.shape().c : weight.shape().n;
}

Tensor ConvLayer::Forward(Tape& tape, const Tensor& x) const {
  return transposed ? ops::ConvTranspose2d(tape, x, weight, bias, options)
                    : ops::Conv2d(tape, x, weight, bias, options);
}

ConvLayer MakeConv(int in_channels, int out_channels, int kernel, Rng& rng,
                   double gain) {
  EASN_REQUIRE(kernel % 2 == 1, "same-size conv needs an odd kernel, got {}",
               kernel);
  const double bound = gain * std::sqrt(6.0 / (in_channels * kernel * kernel));
  ConvLayer layer;
  layer.weight = RandomUniform({out_channels, in_channels, kernel, kernel}, bound, rng);
  layer.bias = Tensor::Zeros({1, out_channels, 1, 1}, true);
  layer.options = {1, kernel / 2, 0};
  return layer;
}

ConvLayer MakeResampling(int in_channels, int out_channels, int kernel,
                         Direction direction, Rng& rng, double gain) {
  EASN_REQUIRE(kernel % 2 == 1, "resampling conv needs an odd kernel, got {}",
               kernel);
  const double bound = gain * std::sqrt(6.0 / (in_channels * kernel * kernel));
  ConvLayer layer;
  if (direction == Direction::kDown) {
    layer.weight = RandomUniform({out_channels, in_channels, kernel, kernel}, bound, rng);
    layer.options = {2, kernel / 2, 0};
  } else {
    layer.weight = RandomUniform({in_channels, out_channels, kernel, kernel}, bound, rng);
    layer.options = {2, kernel / 2, 1};
    layer.transposed = true;
  }
  layer.bias = Tensor::Zeros({1, out_channels, 1, 1}, true);
  return layer;
}

// ---------------------------------------------------------------------------
// GDN

GdnParams GdnParams::Init(int channels, double gamma_init) {
  EASN_REQUIRE(channels > 0, "GDN needs at least one channel");
  GdnParams p;
  p.beta = Tensor::Filled({1, channels, 1, 1}, 1.0, true);
  p.gamma = Tensor::Zeros({channels, channels, 1, 1}, true);
  auto g = p.gamma.mutable_data();
  for (int i = 0; i < channels; ++i) g[static_cast<size_t>(i) * channels + i] = gamma_init;
  return p;
}

void GdnParams::ClampToFloors() {
  for (double& b : beta.mutable_data()) b = std::max(b, kGdnBetaFloor);
  for (double& g : gamma.mutable_data()) g = std::max(g, kGdnGammaFloor);
}

namespace {

// beta_i + sum_j gamma_ij x_j^2 with effective (floored) parameters.
Tensor GdnDenominator(Tape& tape, const Tensor& x, const GdnParams& p) {
  EASN_REQUIRE(x.shape().c == p.channels(),
               "GDN: input has {} channels, parameters have {}", x.shape().c,
               p.channels());
  const Tensor beta = ops::ClampMin(tape, p.beta, kGdnBetaFloor);
  const Tensor gamma = ops::ClampMin(tape, p.gamma, kGdnGammaFloor);
  return ops::Conv2d(tape, ops::Square(tape, x), gamma, beta, {});
}

}  // namespace

Tensor GdnForward(Tape& tape, const Tensor& x, const GdnParams& p) {
  return ops::Mul(tape, x, ops::Rsqrt(tape, GdnDenominator(tape, x, p)));
}

Tensor GdnInverseForward(Tape& tape, const Tensor& x, const GdnParams& p) {
  return ops::Mul(tape, x, ops::Sqrt(tape, GdnDenominator(tape, x, p)));
}

double ScalarGdn(double x, double a, double b) {
  EASN_REQUIRE(a >= kGdnBetaFloor, "scalar GDN: a = {} below floor {}", a,
               kGdnBetaFloor);
  EASN_REQUIRE(b >= 0.0, "scalar GDN: b = {} is negative", b);
  return x / std::sqrt(a + b * x * x);
}

GdnFactorization FactorizeGdn(const GdnParams& p) {
  const int c = p.channels();
  GdnFactorization f;
  f.channels = c;
  f.delta.resize(static_cast<size_t>(c) * c);
  f.channel_scale.resize(c);
  auto beta = p.beta.data();
  auto gamma = p.gamma.data();
  for (int i = 0; i < c; ++i) {
    const double b = std::max(beta[i], kGdnBetaFloor);
    f.channel_scale[i] = 1.0 / std::sqrt(b);
    for (int j = 0; j < c; ++j) {
      const size_t ij = static_cast<size_t>(i) * c + j;
      f.delta[ij] = std::max(gamma[ij], kGdnGammaFloor) / b;
    }
  }
  return f;
}

Tensor GdnScalingFactor(const Tensor& x, const GdnParams& p) {
  const Shape& s = x.shape();
  EASN_REQUIRE(s.c == p.channels(), "GDN: input has {} channels, parameters have {}",
               s.c, p.channels());
  Tensor out = Tensor::Zeros(s);
  auto in = x.data();
  auto y = out.mutable_data();
  auto beta = p.beta.data();
  auto gamma = p.gamma.data();
  for (int n = 0; n < s.n; ++n) {
    for (size_t q = 0; q < s.plane(); ++q) {
      for (int i = 0; i < s.c; ++i) {
        double denom = std::max(beta[i], kGdnBetaFloor);
        for (int j = 0; j < s.c; ++j) {
          const double v = in[Offset(s, n, j, 0, 0) + q];
          denom += std::max(gamma[static_cast<size_t>(i) * s.c + j], kGdnGammaFloor) * v * v;
        }
        y[Offset(s, n, i, 0, 0) + q] = 1.0 / std::sqrt(denom);
      }
    }
  }
  return out;
}

Tensor NormalizedGdnScalingFactor(const Tensor& x, const GdnFactorization& f) {
  const Shape& s = x.shape();
  EASN_REQUIRE(s.c == f.channels, "input has {} channels, factorization has {}",
               s.c, f.channels);
  Tensor out = Tensor::Zeros(s);
  auto in = x.data();
  auto y = out.mutable_data();
  for (int n = 0; n < s.n; ++n) {
    for (size_t q = 0; q < s.plane(); ++q) {
      for (int i = 0; i < s.c; ++i) {
        double denom = 1.0;
        for (int j = 0; j < s.c; ++j) {
          const double v = in[Offset(s, n, j, 0, 0) + q];
          denom += f.delta[static_cast<size_t>(i) * s.c + j] * v * v;
        }
        y[Offset(s, n, i, 0, 0) + q] = 1.0 / std::sqrt(denom);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// EASN

size_t EasnParams::ParamCount() const {
  size_t count = beta.size();
  for (const ConvLayer& c : s_branch) count += c.ParamCount();
  for (const ConvLayer& c : m_branch) count += c.ParamCount();
  if (h_branch) count += h_branch->ParamCount();
  return count;
}

std::vector<NamedTensor> EasnParams::Parameters(const std::string& prefix) const {
  std::vector<NamedTensor> out;
  out.push_back({prefix + ".beta", beta});
  auto add_branch = [&](const std::vector<ConvLayer>& branch, const char* name) {
    for (size_t i = 0; i < branch.size(); ++i) {
      const std::string base = fmt::format("{}.{}{}", prefix, name, i);
      out.push_back({base + ".weight", branch[i].weight});
      out.push_back({base + ".bias", branch[i].bias});
    }
  };
  add_branch(s_branch, "s");
  add_branch(m_branch, "m");
  if (h_branch) {
    out.push_back({prefix + ".h0.weight", h_branch->weight});
    out.push_back({prefix + ".h0.bias", h_branch->bias});
  }
  return out;
}

EasnStructure StructureOf(Variant variant) {
  switch (variant) {
    case Variant::kEasnA:
      return {{1, 1}, {}, std::nullopt, false};
    case Variant::kEasnB:
      return {{1, 1}, {1}, std::nullopt, false};
    case Variant::kEasnC:
      return {{3, 3}, {1}, std::nullopt, false};
    case Variant::kEasnD:
      return {{3, 3}, {1}, 1, false};
    case Variant::kEasnE:
      return {{3, 3}, {5}, std::nullopt, false};
    case Variant::kEasnF:
      // 5x5 stride-2 first conv: the same 5x5 footprint as the resampling
      // conv followed by 1x1 layers.
      return {{5, 1}, {5}, std::nullopt, true};
    case Variant::kEasnG:
      return {{5, 1, 3, 3}, {5, 5}, std::nullopt, true};
    default:
      Fail(ErrorCode::kInvalidArgument, "{} has no EASN branch structure",
           VariantName(variant));
  }
}

EasnParams MakeEasnParams(Variant variant, int in_channels, int out_channels,
                          Direction direction, Rng& rng) {
  const EasnStructure s = StructureOf(variant);
  EASN_REQUIRE(s.resampling_branches || in_channels == out_channels,
               "{} keeps the channel count, got {} -> {}", VariantName(variant),
               in_channels, out_channels);
  auto make_branch = [&](const std::vector<int>& kernels) {
    std::vector<ConvLayer> branch;
    for (size_t i = 0; i < kernels.size(); ++i) {
      if (s.resampling_branches && i == 0) {
        branch.push_back(MakeResampling(in_channels, out_channels, kernels[i],
                                        direction, rng, kEasnInitScale));
      } else {
        branch.push_back(MakeConv(i == 0 ? in_channels : out_channels,
                                  out_channels, kernels[i], rng, kEasnInitScale));
      }
    }
    return branch;
  };
  EasnParams p;
  p.beta = Tensor::Zeros({1, out_channels, 1, 1}, true);
  p.s_branch = make_branch(s.s_kernels);
  p.m_branch = make_branch(s.m_kernels);
  if (s.h_kernel) {
    p.h_branch = MakeConv(in_channels, out_channels, *s.h_kernel, rng, kEasnInitScale);
  }
  return p;
}

Tensor ScalingFactorSwish(Tape& tape, const Tensor& x, const EasnParams& p) {
  EASN_REQUIRE(!p.s_branch.empty(), "scaling branch has no convolutions");
  const Tensor f = RunBranch(tape, x, p.s_branch);
  EASN_REQUIRE(f.shape().c == p.out_channels(),
               "scaling branch produces {} channels, beta has {}", f.shape().c,
               p.out_channels());
  return ops::Sigmoid(tape, ops::Neg(tape, ops::AddChannel(tape, f, p.beta)));
}

Tensor EasnForward(Tape& tape, const Tensor& x, Variant variant,
                   const EasnParams& p, const FeatureTap& tap) {
  EASN_REQUIRE(variant >= Variant::kEasnA && variant <= Variant::kEasnE,
               "EASN forward does not handle {}", VariantName(variant));
  CheckStructure(variant, p);
  EASN_REQUIRE(x.shape().c == p.out_channels(),
               "{}: input has {} channels, parameters have {}",
               VariantName(variant), x.shape().c, p.out_channels());
  if (tap) tap(x);
  const Tensor scale = ScalingFactorSwish(tape, x, p);
  const Tensor mapped = p.m_branch.empty() ? x : RunBranch(tape, x, p.m_branch);
  Tensor out = ops::Add(tape, ops::Mul(tape, mapped, scale), x);
  if (p.h_branch) out = ops::Add(tape, out, p.h_branch->Forward(tape, x));
  return out;
}

Tensor EasnFForward(Tape& tape, const Tensor& u, const EasnParams& p,
                    const ConvLayer& resample, const FeatureTap& tap,
                    Variant variant) {
  EASN_REQUIRE(variant == Variant::kEasnF || variant == Variant::kEasnG,
               "pre-resampling EASN does not handle {}", VariantName(variant));
  CheckStructure(variant, p);
  EASN_REQUIRE(resample.options.stride == 2,
               "resampling conv must have stride 2, got {}", resample.options.stride);
  EASN_REQUIRE(resample.transposed == p.s_branch.front().transposed,
               "resampling direction differs from the branch direction");
  if (tap) tap(u);
  const Tensor x = resample.Forward(tape, u);
  const Tensor scale = ScalingFactorSwish(tape, u, p);
  const Tensor mapped = RunBranch(tape, u, p.m_branch);
  EASN_ENSURE(scale.shape() == x.shape() && mapped.shape() == x.shape(),
              "branch resolution {} / {} differs from resampled input {}",
              scale.shape().ToString(), mapped.shape().ToString(),
              x.shape().ToString());
  return ops::Add(tape, ops::Mul(tape, mapped, scale), x);
}

Tensor EasnDeepForward(Tape& tape, const Tensor& u, const EasnParams& front,
                       const EasnParams& back, const ConvLayer& resample,
                       const FeatureTap& front_tap, const FeatureTap& back_tap) {
  const Tensor mid = EasnFForward(tape, u, front, resample, front_tap);
  return EasnForward(tape, mid, Variant::kEasnE, back, back_tap);
}

void ZeroBranches(EasnParams& p, double beta) {
  auto zero = [](ConvLayer& c) {
    for (double& v : c.weight.mutable_data()) v = 0.0;
    for (double& v : c.bias.mutable_data()) v = 0.0;
  };
  for (ConvLayer& c : p.s_branch) zero(c);
  for (ConvLayer& c : p.m_branch) zero(c);
  if (p.h_branch) zero(*p.h_branch);
  for (double& v : p.beta.mutable_data()) v = beta;
}

}  // namespace easn
