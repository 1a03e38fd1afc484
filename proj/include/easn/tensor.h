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

#ifndef EASN_TENSOR_H_
#define EASN_TENSOR_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace easn {

// NCHW extents. A scalar is 1x1x1x1.
struct Shape {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  size_t size() const {
    return static_cast<size_t>(n) * c * h * w;
  }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  bool valid() const { return n > 0 && c > 0 && h > 0 && w > 0; }
  std::string ToString() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

inline constexpr Shape kScalarShape{1, 1, 1, 1};

// Dense 4-D array of doubles with an optional gradient buffer.
//
// Tensor is a reference-counted handle: copies alias the same storage. Ops
// never modify their inputs; only optimizers and initializers write through
// mutable_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor Zeros(const Shape& shape, bool requires_grad = false);
  static Tensor Filled(const Shape& shape, double value,
                       bool requires_grad = false);
  static Tensor FromData(const Shape& shape, std::vector<double> data,
                         bool requires_grad = false);
  static Tensor Scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  size_t size() const { return shape().size(); }

  std::span<const double> data() const;
  std::span<double> mutable_data();

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  // Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  // Allocates a zeroed gradient on first use.
  // Gradient writes go through const handles: backward rules capture their
  // inputs by value.
  std::span<double> mutable_grad() const;
  void ZeroGrad() const;
  void ClearGrad() const;

  double at(int n, int c, int h, int w) const;
  double item() const;
  bool AllFinite() const;

  // Deep copy of the data; the copy starts without gradient.
  Tensor Clone(bool requires_grad = false) const;

  // True when both handles refer to the same storage.
  bool SameAs(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Impl> impl_;
};

inline size_t Offset(const Shape& s, int n, int c, int h, int w) {
  return ((static_cast<size_t>(n) * s.c + c) * s.h + h) * s.w + w;
}

double Dot(std::span<const double> a, std::span<const double> b);

}  // namespace easn

#endif  // EASN_TENSOR_H_
