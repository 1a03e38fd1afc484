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

#ifndef EASN_TESTS_TEST_UTIL_H_
#define EASN_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "easn/image_io.h"
#include "easn/rng.h"
#include "easn/tensor.h"

namespace easn::testing {

inline Tensor RandomTensor(const Shape& shape, Rng& rng, double lo = -1.0,
                           double hi = 1.0, bool requires_grad = false) {
  std::vector<double> data(shape.size());
  for (double& v : data) v = rng.Uniform(lo, hi);
  return Tensor::FromData(shape, std::move(data), requires_grad);
}

inline Image RandomImage(int width, int height, Rng& rng) {
  Image image{width, height, 3, {}};
  image.pixels.resize(image.size());
  for (uint8_t& p : image.pixels) p = static_cast<uint8_t>(rng.UniformInt(256));
  return image;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScopedTempDir {
 public:
  ScopedTempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("easn-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScopedTempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScopedTempDir(const ScopedTempDir&) = delete;
  ScopedTempDir& operator=(const ScopedTempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline double RelativeDifference(double a, double b) {
  return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b)));
}

}  // namespace easn::testing

#endif  // EASN_TESTS_TEST_UTIL_H_
