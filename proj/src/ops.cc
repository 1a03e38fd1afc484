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

#include "easn/ops.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "easn/error.h"

namespace easn::ops {
namespace {

// Geometry shared by Conv2d and ConvTranspose2d. "big" is the conv input (or
// transposed-conv output), "small" the conv output (or transposed-conv
// input). The weight is indexed (small channel, big channel, ky, kx) and
// small(o) reads big(o * stride - pad + k).
struct ConvGeometry {
  int batch;
  int big_c, big_h, big_w;
  int small_c, small_h, small_w;
  int kernel, stride, pad;
};

// Range [lo, hi] of small indices o with 0 <= o*stride - pad + k < big.
void ValidRange(int k, int stride, int pad, int big, int small, int* lo,
                int* hi) {
  const int lower = pad - k;
  *lo = lower <= 0 ? 0 : (lower + stride - 1) / stride;
  const int upper = big - 1 + pad - k;
  *hi = upper < 0 ? -1 : std::min(upper / stride, small - 1);
}

template <typename Visit>
void ForEachTap(const ConvGeometry& g, Visit visit) {
  for (int ky = 0; ky < g.kernel; ++ky) {
    int y_lo, y_hi;
    ValidRange(ky, g.stride, g.pad, g.big_h, g.small_h, &y_lo, &y_hi);
    if (y_lo > y_hi) continue;
    for (int kx = 0; kx < g.kernel; ++kx) {
      int x_lo, x_hi;
      ValidRange(kx, g.stride, g.pad, g.big_w, g.small_w, &x_lo, &x_hi);
      if (x_lo > x_hi) continue;
      visit(ky, kx, y_lo, y_hi, x_lo, x_hi);
    }
  }
}

// small += correlate(big, weight)
void Correlate(const ConvGeometry& g, const double* big, const double* weight,
               double* small) {
  const size_t big_plane = static_cast<size_t>(g.big_h) * g.big_w;
  const size_t small_plane = static_cast<size_t>(g.small_h) * g.small_w;
  const size_t kk = static_cast<size_t>(g.kernel) * g.kernel;
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.small_c; ++oc) {
      double* out = small + (static_cast<size_t>(n) * g.small_c + oc) * small_plane;
      for (int ic = 0; ic < g.big_c; ++ic) {
        const double* in = big + (static_cast<size_t>(n) * g.big_c + ic) * big_plane;
        const double* w = weight + (static_cast<size_t>(oc) * g.big_c + ic) * kk;
        ForEachTap(g, [&](int ky, int kx, int y_lo, int y_hi, int x_lo, int x_hi) {
          const double wv = w[ky * g.kernel + kx];
          for (int oy = y_lo; oy <= y_hi; ++oy) {
            const double* row = in + static_cast<size_t>(oy * g.stride - g.pad + ky) * g.big_w;
            double* orow = out + static_cast<size_t>(oy) * g.small_w;
            for (int ox = x_lo; ox <= x_hi; ++ox) {
              orow[ox] += wv * row[ox * g.stride - g.pad + kx];
            }
          }
        });
      }
    }
  }
}

// big += scatter(small, weight), the adjoint of Correlate in `big`.
void Scatter(const ConvGeometry& g, const double* small, const double* weight,
             double* big) {
  const size_t big_plane = static_cast<size_t>(g.big_h) * g.big_w;
  const size_t small_plane = static_cast<size_t>(g.small_h) * g.small_w;
  const size_t kk = static_cast<size_t>(g.kernel) * g.kernel;
  for (int n = 0; n < g.batch; ++n) {
    for (int ic = 0; ic < g.big_c; ++ic) {
      double* out = big + (static_cast<size_t>(n) * g.big_c + ic) * big_plane;
      for (int oc = 0; oc < g.small_c; ++oc) {
        const double* in = small + (static_cast<size_t>(n) * g.small_c + oc) * small_plane;
        const double* w = weight + (static_cast<size_t>(oc) * g.big_c + ic) * kk;
        ForEachTap(g, [&](int ky, int kx, int y_lo, int y_hi, int x_lo, int x_hi) {
          const double wv = w[ky * g.kernel + kx];
          for (int oy = y_lo; oy <= y_hi; ++oy) {
            double* row = out + static_cast<size_t>(oy * g.stride - g.pad + ky) * g.big_w;
            const double* irow = in + static_cast<size_t>(oy) * g.small_w;
            for (int ox = x_lo; ox <= x_hi; ++ox) {
              row[ox * g.stride - g.pad + kx] += wv * irow[ox];
            }
          }
        });
      }
    }
  }
}

// grad_weight += d/dweight <small_grad, correlate(big, weight)>
void WeightGradient(const ConvGeometry& g, const double* big,
                    const double* small_grad, double* grad_weight) {
  const size_t big_plane = static_cast<size_t>(g.big_h) * g.big_w;
  const size_t small_plane = static_cast<size_t>(g.small_h) * g.small_w;
  const size_t kk = static_cast<size_t>(g.kernel) * g.kernel;
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.small_c; ++oc) {
      const double* gout = small_grad + (static_cast<size_t>(n) * g.small_c + oc) * small_plane;
      for (int ic = 0; ic < g.big_c; ++ic) {
        const double* in = big + (static_cast<size_t>(n) * g.big_c + ic) * big_plane;
        double* gw = grad_weight + (static_cast<size_t>(oc) * g.big_c + ic) * kk;
        ForEachTap(g, [&](int ky, int kx, int y_lo, int y_hi, int x_lo, int x_hi) {
          double acc = 0.0;
          for (int oy = y_lo; oy <= y_hi; ++oy) {
            const double* row = in + static_cast<size_t>(oy * g.stride - g.pad + ky) * g.big_w;
            const double* grow = gout + static_cast<size_t>(oy) * g.small_w;
            for (int ox = x_lo; ox <= x_hi; ++ox) {
              acc += grow[ox] * row[ox * g.stride - g.pad + kx];
            }
          }
          gw[ky * g.kernel + kx] += acc;
        });
      }
    }
  }
}

void AddBias(const Shape& s, std::span<const double> bias, std::span<double> out) {
  const size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      double* p = out.data() + (static_cast<size_t>(n) * s.c + c) * plane;
      const double b = bias[c];
      for (size_t i = 0; i < plane; ++i) p[i] += b;
    }
  }
}

void BiasGradient(const Shape& s, std::span<const double> grad_out,
                  std::span<double> grad_bias) {
  const size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const double* p = grad_out.data() + (static_cast<size_t>(n) * s.c + c) * plane;
      double acc = 0.0;
      for (size_t i = 0; i < plane; ++i) acc += p[i];
      grad_bias[c] += acc;
    }
  }
}

void CheckKernel(const Tensor& weight, const Tensor& bias, int bias_channels) {
  const Shape& ws = weight.shape();
  EASN_REQUIRE(ws.h == ws.w, "kernel must be square, got {}", ws.ToString());
  if (bias.defined()) {
    const Shape& bs = bias.shape();
    EASN_REQUIRE(bs == (Shape{1, bias_channels, 1, 1}),
                 "bias shape {} does not match {} output channels",
                 bs.ToString(), bias_channels);
  }
}

// Elementwise op y = f(x) with dy/dx = df(x, y).
template <typename F, typename DF>
Tensor Unary(Tape& tape, const Tensor& x, F f, DF df) {
  Tensor out = Tensor::Zeros(x.shape());
  auto in = x.data();
  auto y = out.mutable_data();
  for (size_t i = 0; i < in.size(); ++i) y[i] = f(in[i]);
  if (AnyRequiresGrad({&x})) {
    out.set_requires_grad(true);
    tape.Record({x}, out, [x, out, df]() mutable {
      auto g = out.grad();
      auto in = x.data();
      auto y = out.data();
      auto gx = x.mutable_grad();
      for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], y[i]);
    });
  }
  return out;
}

// Neumaier summation for the scalar reductions: losses are differenced at
// the 1e-4 scale by the gradient checker, so their rounding matters.
class CompensatedSum {
 public:
  void Add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      c_ += (sum_ - t) + v;
    } else {
      c_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  EASN_REQUIRE(a.shape() == b.shape(), "{}: shape mismatch {} vs {}", op,
               a.shape().ToString(), b.shape().ToString());
}

thread_local RegionTrace* active_trace = nullptr;

}  // namespace

RegionTrace::RegionTrace() : previous_(active_trace) { active_trace = this; }

RegionTrace::~RegionTrace() { active_trace = previous_; }

void RegionTrace::Note(bool branch) {
  RegionTrace* t = active_trace;
  if (t == nullptr) return;
  t->digest_ = (t->digest_ ^ (branch ? 0x2u : 0x1u)) * 0x100000001b3ULL;
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double StableSoftplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

int ConvOutputSize(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

int ConvTransposeOutputSize(int in, int kernel, int stride, int pad,
                            int output_padding) {
  return (in - 1) * stride - 2 * pad + kernel + output_padding;
}

Tensor Conv2d(Tape& tape, const Tensor& x, const Tensor& weight,
              const Tensor& bias, ConvOptions options) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  EASN_REQUIRE(options.stride > 0, "conv2d: stride must be positive, got {}",
               options.stride);
  EASN_REQUIRE(options.pad >= 0, "conv2d: negative padding {}", options.pad);
  EASN_REQUIRE(options.output_padding == 0,
               "conv2d: output_padding applies to transposed conv only");
  EASN_REQUIRE(xs.c == ws.c, "conv2d: input has {} channels, kernel expects {}",
               xs.c, ws.c);
  CheckKernel(weight, bias, ws.n);
  const int k = ws.h;
  EASN_REQUIRE(k <= xs.h + 2 * options.pad && k <= xs.w + 2 * options.pad,
               "conv2d: kernel {} larger than padded input {}", k,
               xs.ToString());

  const Shape os{xs.n, ws.n, ConvOutputSize(xs.h, k, options.stride, options.pad),
                 ConvOutputSize(xs.w, k, options.stride, options.pad)};
  const ConvGeometry g{xs.n, xs.c, xs.h, xs.w, os.c, os.h, os.w,
                       k, options.stride, options.pad};
  Tensor out = Tensor::Zeros(os);
  if (bias.defined()) AddBias(os, bias.data(), out.mutable_data());
  Correlate(g, x.data().data(), weight.data().data(), out.mutable_data().data());

  if (AnyRequiresGrad({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape.Record({x, weight, bias}, out, [g, x, weight, bias, out]() mutable {
      const double* gout = out.grad().data();
      if (x.requires_grad()) {
        Scatter(g, gout, weight.data().data(), x.mutable_grad().data());
      }
      if (weight.requires_grad()) {
        WeightGradient(g, x.data().data(), gout, weight.mutable_grad().data());
      }
      if (bias.defined() && bias.requires_grad()) {
        BiasGradient(out.shape(), out.grad(), bias.mutable_grad());
      }
    });
  }
  return out;
}

Tensor ConvTranspose2d(Tape& tape, const Tensor& x, const Tensor& weight,
                       const Tensor& bias, ConvOptions options) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  EASN_REQUIRE(options.stride > 0,
               "conv_transpose2d: stride must be positive, got {}",
               options.stride);
  EASN_REQUIRE(options.pad >= 0, "conv_transpose2d: negative padding {}",
               options.pad);
  EASN_REQUIRE(options.output_padding >= 0 &&
                   options.output_padding < options.stride,
               "conv_transpose2d: output_padding {} must be in [0, stride)",
               options.output_padding);
  EASN_REQUIRE(xs.c == ws.n,
               "conv_transpose2d: input has {} channels, kernel expects {}",
               xs.c, ws.n);
  CheckKernel(weight, bias, ws.c);
  const int k = ws.h;
  const Shape os{xs.n, ws.c,
                 ConvTransposeOutputSize(xs.h, k, options.stride, options.pad,
                                         options.output_padding),
                 ConvTransposeOutputSize(xs.w, k, options.stride, options.pad,
                                         options.output_padding)};
  EASN_REQUIRE(os.h > 0 && os.w > 0,
               "conv_transpose2d: empty output for input {} kernel {}",
               xs.ToString(), k);

  const ConvGeometry g{xs.n, os.c, os.h, os.w, xs.c, xs.h, xs.w,
                       k, options.stride, options.pad};
  Tensor out = Tensor::Zeros(os);
  if (bias.defined()) AddBias(os, bias.data(), out.mutable_data());
  Scatter(g, x.data().data(), weight.data().data(), out.mutable_data().data());

  if (AnyRequiresGrad({&x, &weight, &bias})) {
    out.set_requires_grad(true);
    tape.Record({x, weight, bias}, out, [g, x, weight, bias, out]() mutable {
      const double* gout = out.grad().data();
      if (x.requires_grad()) {
        Correlate(g, gout, weight.data().data(), x.mutable_grad().data());
      }
      if (weight.requires_grad()) {
        WeightGradient(g, gout, x.data().data(), weight.mutable_grad().data());
      }
      if (bias.defined() && bias.requires_grad()) {
        BiasGradient(out.shape(), out.grad(), bias.mutable_grad());
      }
    });
  }
  return out;
}

Tensor LeakyRelu(Tape& tape, const Tensor& x, double negative_slope) {
  EASN_REQUIRE(negative_slope > 0.0 && negative_slope < 1.0,
               "leaky_relu: slope {} outside (0, 1)", negative_slope);
  return Unary(
      tape, x,
      [negative_slope](double v) {
        RegionTrace::Note(v >= 0);
        return v >= 0 ? v : negative_slope * v;
      },
      [negative_slope](double v, double) { return v >= 0 ? 1.0 : negative_slope; });
}

Tensor Sigmoid(Tape& tape, const Tensor& x) {
  return Unary(tape, x, StableSigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor Softplus(Tape& tape, const Tensor& x) {
  return Unary(tape, x, StableSoftplus,
               [](double v, double) { return StableSigmoid(v); });
}

Tensor Square(Tape& tape, const Tensor& x) {
  return Unary(tape, x, [](double v) { return v * v; },
               [](double v, double) { return 2.0 * v; });
}

Tensor Sqrt(Tape& tape, const Tensor& x) {
  for (double v : x.data()) {
    EASN_ENSURE(v > 0.0, "sqrt of non-positive value {}", v);
  }
  return Unary(tape, x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return 0.5 / y; });
}

Tensor Rsqrt(Tape& tape, const Tensor& x) {
  for (double v : x.data()) {
    EASN_ENSURE(v > 0.0, "rsqrt of non-positive value {}", v);
  }
  return Unary(tape, x, [](double v) { return 1.0 / std::sqrt(v); },
               [](double v, double y) { return -0.5 * y / v; });
}

Tensor Scale(Tape& tape, const Tensor& x, double factor) {
  return Unary(tape, x, [factor](double v) { return factor * v; },
               [factor](double, double) { return factor; });
}

Tensor Neg(Tape& tape, const Tensor& x) { return Scale(tape, x, -1.0); }

Tensor ClampMin(Tape& tape, const Tensor& x, double floor) {
  return Unary(tape, x,
               [floor](double v) {
                 RegionTrace::Note(v >= floor);
                 return std::max(v, floor);
               },
               [floor](double v, double) { return v >= floor ? 1.0 : 0.0; });
}

Tensor Add(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "add");
  Tensor out = Tensor::Zeros(a.shape());
  auto y = out.mutable_data();
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < y.size(); ++i) y[i] = da[i] + db[i];
  if (AnyRequiresGrad({&a, &b})) {
    out.set_requires_grad(true);
    tape.Record({a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor Sub(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "sub");
  Tensor out = Tensor::Zeros(a.shape());
  auto y = out.mutable_data();
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < y.size(); ++i) y[i] = da[i] - db[i];
  if (AnyRequiresGrad({&a, &b})) {
    out.set_requires_grad(true);
    tape.Record({a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor Mul(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mul");
  Tensor out = Tensor::Zeros(a.shape());
  auto y = out.mutable_data();
  auto da = a.data();
  auto db = b.data();
  for (size_t i = 0; i < y.size(); ++i) y[i] = da[i] * db[i];
  if (AnyRequiresGrad({&a, &b})) {
    out.set_requires_grad(true);
    tape.Record({a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        auto db = b.data();
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * db[i];
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        auto da = a.data();
        for (size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * da[i];
      }
    });
  }
  return out;
}

Tensor AddChannel(Tape& tape, const Tensor& x, const Tensor& v) {
  const Shape& xs = x.shape();
  EASN_REQUIRE(v.shape() == (Shape{1, xs.c, 1, 1}),
               "add_channel: vector shape {} does not match {} channels",
               v.shape().ToString(), xs.c);
  Tensor out = x.Clone();
  AddBias(xs, v.data(), out.mutable_data());
  if (AnyRequiresGrad({&x, &v})) {
    out.set_requires_grad(true);
    tape.Record({x, v}, out, [x, v, out]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.mutable_grad();
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (v.requires_grad()) BiasGradient(out.shape(), g, v.mutable_grad());
    });
  }
  return out;
}

Tensor Sum(Tape& tape, const Tensor& x) {
  CompensatedSum total;
  for (double v : x.data()) total.Add(v);
  Tensor out = Tensor::Scalar(total.value());
  if (AnyRequiresGrad({&x})) {
    out.set_requires_grad(true);
    tape.Record({x}, out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (double& gx : x.mutable_grad()) gx += g;
    });
  }
  return out;
}

Tensor Mean(Tape& tape, const Tensor& x) {
  return Scale(tape, Sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor MeanSquaredError(Tape& tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "mse");
  auto da = a.data();
  auto db = b.data();
  CompensatedSum total;
  for (size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    total.Add(d * d);
  }
  const double inv_count = 1.0 / static_cast<double>(da.size());
  Tensor out = Tensor::Scalar(total.value() * inv_count);
  if (AnyRequiresGrad({&a, &b})) {
    out.set_requires_grad(true);
    tape.Record({a, b}, out, [a, b, out, inv_count]() mutable {
      const double g = out.grad()[0] * 2.0 * inv_count;
      auto da = a.data();
      auto db = b.data();
      if (a.requires_grad()) {
        auto ga = a.mutable_grad();
        for (size_t i = 0; i < da.size(); ++i) ga[i] += g * (da[i] - db[i]);
      }
      if (b.requires_grad()) {
        auto gb = b.mutable_grad();
        for (size_t i = 0; i < da.size(); ++i) gb[i] -= g * (da[i] - db[i]);
      }
    });
  }
  return out;
}

Tensor LogisticBinProbability(Tape& tape, const Tensor& v, const Tensor& loc,
                              const Tensor& raw_scale, double floor) {
  const Shape& vs = v.shape();
  const Shape channel_shape{1, vs.c, 1, 1};
  EASN_REQUIRE(loc.shape() == channel_shape && raw_scale.shape() == channel_shape,
               "likelihood: prior has {} / {} parameters, latent has {} channels",
               loc.shape().ToString(), raw_scale.shape().ToString(), vs.c);

  const size_t plane = vs.plane();
  std::vector<double> scale(vs.c);
  for (int c = 0; c < vs.c; ++c) {
    scale[c] = StableSoftplus(raw_scale.data()[c]) + kScaleFloor;
  }
  Tensor out = Tensor::Zeros(vs);
  // Per element: d p / d upper-argument and d p / d lower-argument pieces.
  std::vector<double> d_upper(vs.size());
  std::vector<double> d_lower(vs.size());
  std::vector<double> upper_arg(vs.size());
  std::vector<double> lower_arg(vs.size());
  auto in = v.data();
  auto p = out.mutable_data();
  for (int n = 0; n < vs.n; ++n) {
    for (int c = 0; c < vs.c; ++c) {
      const size_t base = (static_cast<size_t>(n) * vs.c + c) * plane;
      const double mu = loc.data()[c];
      const double s = scale[c];
      for (size_t i = base; i < base + plane; ++i) {
        const double t = in[i] - mu;
        const double upper = (t + 0.5) / s;
        const double lower = (t - 0.5) / s;
        // Evaluate in the tail where both sigmoids are small.
        const double sign = (upper + lower) > 0 ? -1.0 : 1.0;
        const double su = StableSigmoid(sign * upper);
        const double sl = StableSigmoid(sign * lower);
        const double raw = std::abs(su - sl);
        RegionTrace::Note(raw >= floor);
        p[i] = std::max(raw, floor);
        d_upper[i] = su * (1.0 - su);
        d_lower[i] = sl * (1.0 - sl);
        upper_arg[i] = upper;
        lower_arg[i] = lower;
      }
    }
  }

  if (AnyRequiresGrad({&v, &loc, &raw_scale})) {
    out.set_requires_grad(true);
    tape.Record(
        {v, loc, raw_scale}, out,
        [v, loc, raw_scale, out, scale, floor, plane,
         d_upper = std::move(d_upper), d_lower = std::move(d_lower),
         upper_arg = std::move(upper_arg),
         lower_arg = std::move(lower_arg)]() mutable {
          const Shape& vs = v.shape();
          auto g = out.grad();
          auto p = out.data();
          std::span<double> gv, gloc, graw;
          if (v.requires_grad()) gv = v.mutable_grad();
          if (loc.requires_grad()) gloc = loc.mutable_grad();
          if (raw_scale.requires_grad()) graw = raw_scale.mutable_grad();
          for (int n = 0; n < vs.n; ++n) {
            for (int c = 0; c < vs.c; ++c) {
              const size_t base = (static_cast<size_t>(n) * vs.c + c) * plane;
              const double s = scale[c];
              const double dscale_draw = StableSigmoid(raw_scale.data()[c]);
              for (size_t i = base; i < base + plane; ++i) {
                // The floor only lets through gradients that raise p.
                if (p[i] <= floor && g[i] >= 0.0) continue;
                const double dp_dv = (d_upper[i] - d_lower[i]) / s;
                if (!gv.empty()) gv[i] += g[i] * dp_dv;
                if (!gloc.empty()) gloc[c] -= g[i] * dp_dv;
                if (!graw.empty()) {
                  const double dp_ds =
                      -(d_upper[i] * upper_arg[i] - d_lower[i] * lower_arg[i]) / s;
                  graw[c] += g[i] * dp_ds * dscale_draw;
                }
              }
            }
          }
        });
  }
  return out;
}

Tensor SumNegLog2(Tape& tape, const Tensor& p) {
  CompensatedSum bits;
  for (double v : p.data()) {
    if (!std::isfinite(v)) Fail(ErrorCode::kNumeric, "rate: non-finite probability {}", v);
    EASN_ENSURE(v > 0.0 && v <= 1.0, "rate: probability {} outside (0, 1]", v);
    bits.Add(-std::log2(v));
  }
  Tensor out = Tensor::Scalar(bits.value());
  if (AnyRequiresGrad({&p})) {
    out.set_requires_grad(true);
    tape.Record({p}, out, [p, out]() mutable {
      const double g = out.grad()[0];
      auto in = p.data();
      auto gp = p.mutable_grad();
      for (size_t i = 0; i < in.size(); ++i) {
        gp[i] -= g / (in[i] * std::numbers::ln2);
      }
    });
  }
  return out;
}

}  // namespace easn::ops
