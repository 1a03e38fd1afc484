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

#ifndef EASN_BITSTREAM_H_
#define EASN_BITSTREAM_H_

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "easn/symbol_table.h"

namespace easn {

using ModelId = std::array<uint8_t, 8>;

// On-disk compressed image, all integers little-endian:
//
//   magic "EASN" | version u8 = 1 | model id 8 bytes | height u16 |
//   width u16 | channels u16 | channels x (min i16, max i16) |
//   payload length u32 | payload
struct Bitstream {
  static constexpr std::array<uint8_t, 4> kMagic{'E', 'A', 'S', 'N'};
  static constexpr uint8_t kVersion = 1;

  ModelId model_id{};
  uint16_t height = 0;
  uint16_t width = 0;
  std::vector<ChannelRange> ranges;  // one per latent channel
  std::vector<uint8_t> payload;
};

size_t BitstreamHeaderBytes(size_t channels);

std::vector<uint8_t> SerializeBitstream(const Bitstream& stream);

// Throws ErrorCode::kDecode on bad magic, version, truncation or trailing
// bytes.
Bitstream ParseBitstream(std::span<const uint8_t> bytes);

}  // namespace easn

#endif  // EASN_BITSTREAM_H_
