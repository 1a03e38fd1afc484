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

#ifndef EASN_SYMBOL_TABLE_H_
#define EASN_SYMBOL_TABLE_H_

#include <cstdint>
#include <span>
#include <vector>

#include "easn/entropy.h"
#include "easn/tensor.h"

namespace easn {

inline constexpr int kCdfPrecisionBits = 16;
inline constexpr uint32_t kCdfTotal = 1u << kCdfPrecisionBits;
// Symbols added on both sides of the observed range.
inline constexpr int kTableMargin = 1;
// Largest observed span a table covers; anything outside is escaped.
inline constexpr int kMaxTableSpan = 4096;
// Observed ranges are stored as int16 in the bitstream header.
inline constexpr int kMaxAbsSymbolRange = 32000;

struct ChannelRange {
  int32_t min = 0;
  int32_t max = 0;
  friend bool operator==(const ChannelRange&, const ChannelRange&) = default;
};

// Integer CDF of one latent channel over [symbol_min, symbol_max] plus a
// trailing escape slot. cdf has (symbol_max - symbol_min + 3) entries:
// cdf[0] = 0, cdf.back() = 65536, and every slot has frequency >= 1.
struct SymbolTable {
  int channel = 0;
  int32_t symbol_min = 0;
  int32_t symbol_max = 0;
  std::vector<uint32_t> cdf;

  size_t slots() const { return cdf.size() - 1; }
  size_t escape_slot() const { return slots() - 1; }
  bool InRange(int32_t symbol) const {
    return symbol >= symbol_min && symbol <= symbol_max;
  }
  uint32_t frequency(size_t slot) const { return cdf[slot + 1] - cdf[slot]; }
  // Ideal code length of one symbol in bits, escapes included.
  double CodeLengthBits(int32_t symbol) const;
  bool Valid() const;
};

// Per-channel min/max of y_hat, clamped to the codable window.
std::vector<ChannelRange> ObservedRanges(const FactorizedPrior& prior,
                                         const Tensor& y_hat);

// Table over [observed.min - margin, observed.max + margin]. The prior PMF
// is scaled to 65536 with one guaranteed count per slot and the remainder
// distributed by largest remainder (ties to the lower slot).
SymbolTable BuildSymbolTable(const FactorizedPrior& prior, int channel,
                             ChannelRange observed);

// Integer frequencies from a probability vector with the same rounding rule.
std::vector<uint32_t> QuantizeToCdf(std::span<const double> pmf);

std::vector<SymbolTable> BuildSymbolTables(const FactorizedPrior& prior,
                                           const Tensor& y_hat);
std::vector<SymbolTable> BuildSymbolTables(const FactorizedPrior& prior,
                                           std::span<const ChannelRange> ranges);

}  // namespace easn

#endif  // EASN_SYMBOL_TABLE_H_
