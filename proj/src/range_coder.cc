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

#include "easn/range_coder.h"

#include <algorithm>

#include "easn/error.h"

namespace easn {
namespace {

constexpr uint32_t kTop = 1u << 24;

uint32_t ZigZag(int32_t v) {
  return (static_cast<uint32_t>(v) << 1) ^ static_cast<uint32_t>(v >> 31);
}

int32_t UnZigZag(uint32_t v) {
  return static_cast<int32_t>((v >> 1) ^ (~(v & 1) + 1));
}

}  // namespace

void RangeEncoder::ShiftLow() {
  if (static_cast<uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
    const uint8_t carry = static_cast<uint8_t>(low_ >> 32);
    uint8_t byte = cache_;
    do {
      if (skip_leading_) {
        skip_leading_ = false;
      } else {
        out_.push_back(static_cast<uint8_t>(byte + carry));
      }
      byte = 0xFF;
    } while (--pending_ != 0);
    cache_ = static_cast<uint8_t>(low_ >> 24);
  }
  ++pending_;
  low_ = (low_ & 0x00FFFFFFu) << 8;
}

void RangeEncoder::Encode(uint32_t cum, uint32_t freq) {
  EASN_ENSURE(freq > 0 && cum + freq <= kCdfTotal,
              "invalid frequency interval [{}, {})", cum, cum + freq);
  const uint32_t r = range_ >> kCdfPrecisionBits;
  low_ += static_cast<uint64_t>(r) * cum;
  range_ = r * freq;
  while (range_ < kTop) {
    range_ <<= 8;
    ShiftLow();
  }
}

void RangeEncoder::EncodeSymbol(int32_t symbol, const SymbolTable& table) {
  if (table.InRange(symbol)) {
    const size_t slot = static_cast<size_t>(symbol - table.symbol_min);
    Encode(table.cdf[slot], table.frequency(slot));
    return;
  }
  const size_t esc = table.escape_slot();
  Encode(table.cdf[esc], table.frequency(esc));
  const uint32_t raw = ZigZag(symbol);
  Encode(raw >> 16, 1);
  Encode(raw & 0xFFFFu, 1);
}

std::vector<uint8_t> RangeEncoder::Finish() {
  for (int i = 0; i < 5; ++i) ShiftLow();
  std::vector<uint8_t> result = std::move(out_);
  *this = RangeEncoder();
  return result;
}

RangeDecoder::RangeDecoder(std::span<const uint8_t> bytes) : bytes_(bytes) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | NextByte();
}

uint8_t RangeDecoder::NextByte() {
  if (pos_ >= bytes_.size()) {
    Fail(ErrorCode::kDecode, "range decoder: stream truncated at byte {}", pos_);
  }
  return bytes_[pos_++];
}

void RangeDecoder::Normalize() {
  while (range_ < kTop) {
    code_ = (code_ << 8) | NextByte();
    range_ <<= 8;
  }
}

size_t RangeDecoder::DecodeSlot(std::span<const uint32_t> cdf) {
  const uint32_t r = range_ >> kCdfPrecisionBits;
  const uint32_t value = code_ / r;
  if (value >= kCdfTotal) {
    Fail(ErrorCode::kDecode, "range decoder: corrupt stream at byte {}", pos_);
  }
  // First entry greater than value, minus one.
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), value);
  const size_t slot = static_cast<size_t>(it - cdf.begin()) - 1;
  code_ -= r * cdf[slot];
  range_ = r * (cdf[slot + 1] - cdf[slot]);
  Normalize();
  return slot;
}

uint32_t RangeDecoder::DecodeRaw16() {
  const uint32_t r = range_ >> kCdfPrecisionBits;
  const uint32_t value = code_ / r;
  if (value >= kCdfTotal) {
    Fail(ErrorCode::kDecode, "range decoder: corrupt stream at byte {}", pos_);
  }
  code_ -= r * value;
  range_ = r;
  Normalize();
  return value;
}

int32_t RangeDecoder::DecodeSymbol(const SymbolTable& table) {
  const size_t slot = DecodeSlot(table.cdf);
  if (slot != table.escape_slot()) {
    return table.symbol_min + static_cast<int32_t>(slot);
  }
  const uint32_t hi = DecodeRaw16();
  const uint32_t lo = DecodeRaw16();
  return UnZigZag((hi << 16) | lo);
}

std::vector<uint8_t> RangeEncode(std::span<const int32_t> symbols,
                                 std::span<const SymbolTable* const> tables) {
  EASN_REQUIRE(symbols.size() == tables.size(),
               "{} symbols but {} tables", symbols.size(), tables.size());
  RangeEncoder encoder;
  for (size_t i = 0; i < symbols.size(); ++i) {
    encoder.EncodeSymbol(symbols[i], *tables[i]);
  }
  return encoder.Finish();
}

std::vector<int32_t> RangeDecode(std::span<const uint8_t> bytes,
                                 std::span<const SymbolTable* const> tables,
                                 size_t count) {
  EASN_REQUIRE(tables.size() == count, "{} tables for {} symbols",
               tables.size(), count);
  std::vector<int32_t> symbols;
  if (count == 0 && bytes.empty()) return symbols;
  symbols.reserve(count);
  RangeDecoder decoder(bytes);
  for (size_t i = 0; i < count; ++i) {
    symbols.push_back(decoder.DecodeSymbol(*tables[i]));
  }
  if (!decoder.exhausted()) {
    Fail(ErrorCode::kDecode,
         "range decoder: {} trailing bytes (tables or count do not match)",
         bytes.size());
  }
  return symbols;
}

double IdealCodeLengthBits(std::span<const int32_t> symbols,
                           std::span<const SymbolTable* const> tables) {
  EASN_REQUIRE(symbols.size() == tables.size(),
               "{} symbols but {} tables", symbols.size(), tables.size());
  double bits = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i) {
    bits += tables[i]->CodeLengthBits(symbols[i]);
  }
  return bits;
}

}  // namespace easn
