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

#include "easn/tensor.h"

#include <algorithm>
#include <cmath>

#include "easn/error.h"

namespace easn {

std::string Shape::ToString() const {
  return fmt::format("{}x{}x{}x{}", n, c, h, w);
}

Tensor Tensor::Zeros(const Shape& shape, bool requires_grad) {
  return Filled(shape, 0.0, requires_grad);
}

Tensor Tensor::Filled(const Shape& shape, double value, bool requires_grad) {
  EASN_REQUIRE(shape.valid(), "invalid tensor shape {}", shape.ToString());
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  impl->data.assign(shape.size(), value);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::FromData(const Shape& shape, std::vector<double> data,
                        bool requires_grad) {
  EASN_REQUIRE(shape.valid(), "invalid tensor shape {}", shape.ToString());
  EASN_REQUIRE(data.size() == shape.size(),
               "data length {} does not match shape {}", data.size(),
               shape.ToString());
  auto impl = std::make_shared<Impl>();
  impl->shape = shape;
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::Scalar(double value, bool requires_grad) {
  return Filled(kScalarShape, value, requires_grad);
}

const Shape& Tensor::shape() const {
  EASN_ENSURE(impl_, "use of undefined tensor");
  return impl_->shape;
}

std::span<const double> Tensor::data() const {
  EASN_ENSURE(impl_, "use of undefined tensor");
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  EASN_ENSURE(impl_, "use of undefined tensor");
  return impl_->data;
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  EASN_ENSURE(impl_, "use of undefined tensor");
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  EASN_ENSURE(impl_, "use of undefined tensor");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() const {
  EASN_ENSURE(impl_, "use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::ZeroGrad() const {
  if (impl_ && !impl_->grad.empty()) {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
  }
}

void Tensor::ClearGrad() const {
  if (impl_) {
    impl_->grad.clear();
    impl_->grad.shrink_to_fit();
  }
}

double Tensor::at(int n, int c, int h, int w) const {
  const Shape& s = shape();
  EASN_REQUIRE(n >= 0 && n < s.n && c >= 0 && c < s.c && h >= 0 && h < s.h &&
                   w >= 0 && w < s.w,
               "index ({},{},{},{}) out of range for {}", n, c, h, w,
               s.ToString());
  return impl_->data[Offset(s, n, c, h, w)];
}

double Tensor::item() const {
  EASN_REQUIRE(size() == 1, "item() on non-scalar tensor {}",
               shape().ToString());
  return impl_->data[0];
}

bool Tensor::AllFinite() const {
  for (double v : data()) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::Clone(bool requires_grad) const {
  return FromData(shape(), std::vector<double>(data().begin(), data().end()),
                  requires_grad);
}

double Dot(std::span<const double> a, std::span<const double> b) {
  EASN_REQUIRE(a.size() == b.size(), "dot of lengths {} and {}", a.size(),
               b.size());
  double sum = 0.0;
  for (size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

}  // namespace easn
