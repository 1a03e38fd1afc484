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

#ifndef EASN_ERROR_H_
#define EASN_ERROR_H_

#include <stdexcept>
#include <string>

#include <fmt/format.h>

namespace easn {

enum class ErrorCode {
  kInvalidArgument,  // rejected input: shapes, ranges, config values
  kIo,               // file missing, unreadable or unwritable
  kDecode,           // malformed, truncated or foreign bitstream
  kModelMismatch,    // bitstream model-id differs from the loaded weights
  kNumeric,          // NaN/Inf during training or evaluation
  kContract,         // internal invariant violated
};

const char* ErrorCodeName(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

template <typename... Args>
[[noreturn]] void Fail(ErrorCode code, fmt::format_string<Args...> format,
                       Args&&... args) {
  throw Error(code, fmt::format(format, std::forward<Args>(args)...));
}

}  // namespace easn

#define EASN_REQUIRE(cond, ...)                                \
  do {                                                         \
    if (!(cond)) ::easn::Fail(::easn::ErrorCode::kInvalidArgument, __VA_ARGS__); \
  } while (0)

#define EASN_ENSURE(cond, ...)                                 \
  do {                                                         \
    if (!(cond)) ::easn::Fail(::easn::ErrorCode::kContract, __VA_ARGS__); \
  } while (0)

#endif  // EASN_ERROR_H_
