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

#ifndef EASN_RANGE_CODER_H_
#define EASN_RANGE_CODER_H_

#include <cstdint>
#include <span>
#include <vector>

#include "easn/symbol_table.h"

namespace easn {

// 32-bit range coder with byte-wise renormalization and carry propagation.
// Frequencies are 16-bit (total 65536). The stream ends with a 4-byte flush
// of the low end; the decoder consumes exactly the bytes the encoder wrote.
class RangeEncoder {
 public:
  // Narrows the interval to [cum, cum + freq) out of 65536.
  void Encode(uint32_t cum, uint32_t freq);
  void EncodeSymbol(int32_t symbol, const SymbolTable& table);
  std::vector<uint8_t> Finish();

 private:
  void ShiftLow();

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t pending_ = 1;
  // The first byte of the carry chain is always zero and is not stored.
  bool skip_leading_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const uint8_t> bytes);

  // Returns the slot whose [cdf[s], cdf[s+1]) holds the next value.
  size_t DecodeSlot(std::span<const uint32_t> cdf);
  uint32_t DecodeRaw16();
  int32_t DecodeSymbol(const SymbolTable& table);

  bool exhausted() const { return pos_ == bytes_.size(); }

 private:
  uint8_t NextByte();
  void Normalize();

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
  uint32_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
};

// tables[i] codes symbols[i].
std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 std::span<const SymbolTable* const> tables);

// Throws ErrorCode::kDecode on truncated, overlong or inconsistent input.
std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 std::span<const SymbolTable* const> tables,
                                 size_t count);

// Sum of -log2(freq / 65536) over the sequence, escapes included.
double IdealCodeLengthBits(std::span<const int32_t> symbols,
                           std::span<const SymbolTable* const> tables);

}  // namespace easn

#endif  // EASN_RANGE_CODER_H_
