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

#include "easn/symbol_table.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "easn/error.h"

namespace easn {

double SymbolTable::CodeLengthBits(int32_t symbol) const {
  const double total = kCdfTotal;
  if (InRange(symbol)) {
    return -std::log2(frequency(static_cast<size_t>(symbol - symbol_min)) / total);
  }
  // Escape slot followed by two raw 16-bit halves.
  return -std::log2(frequency(escape_slot()) / total) + 32.0;
}

bool SymbolTable::Valid() const {
  if (symbol_max < symbol_min) return false;
  if (cdf.size() != static_cast<size_t>(symbol_max - symbol_min) + 3) return false;
  if (cdf.front() != 0 || cdf.back() != kCdfTotal) return false;
  for (size_t i = 0; i + 1 < cdf.size(); ++i) {
    if (cdf[i + 1] <= cdf[i]) return false;
  }
  return true;
}

std::vector<ChannelRange> ObservedRanges(const FactorizedPrior& prior,
                                         const Tensor& y_hat) {
  const Shape& s = y_hat.shape();
  EASN_REQUIRE(s.c == prior.channels(),
               "latent has {} channels, prior has {}", s.c, prior.channels());
  std::vector<ChannelRange> ranges(s.c);
  auto data = y_hat.data();
  for (int c = 0; c < s.c; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int n = 0; n < s.n; ++n) {
      const size_t base = Offset(s, n, c, 0, 0);
      for (size_t i = base; i < base + s.plane(); ++i) {
        EASN_REQUIRE(std::isfinite(data[i]), "non-finite latent value");
        lo = std::min(lo, data[i]);
        hi = std::max(hi, data[i]);
      }
    }
    // Keep the span codable; outliers beyond it are escaped.
    const double center = std::clamp(std::round(prior.loc.data()[c]),
                                     -double{kMaxAbsSymbolRange},
                                     double{kMaxAbsSymbolRange});
    const double half = kMaxTableSpan / 2;
    lo = std::clamp(lo, std::max(center - half, -double{kMaxAbsSymbolRange}),
                    double{kMaxAbsSymbolRange});
    hi = std::clamp(hi, -double{kMaxAbsSymbolRange},
                    std::min(center + half - 1, double{kMaxAbsSymbolRange}));
    if (hi < lo) hi = lo;
    ranges[c] = {static_cast<int32_t>(lo), static_cast<int32_t>(hi)};
  }
  return ranges;
}

std::vector<uint32_t> QuantizeToCdf(std::span<const double> pmf) {
  const size_t slots = pmf.size();
  EASN_REQUIRE(slots > 0 && slots <= kCdfTotal, "cannot quantize {} slots", slots);
  double mass = 0.0;
  for (double p : pmf) {
    EASN_REQUIRE(p >= 0.0 && std::isfinite(p), "invalid probability {}", p);
    mass += p;
  }
  const uint32_t spare = kCdfTotal - static_cast<uint32_t>(slots);
  std::vector<uint32_t> freq(slots, 1);
  std::vector<double> remainder(slots, 0.0);
  uint32_t assigned = 0;
  if (mass > 0.0) {
    for (size_t i = 0; i < slots; ++i) {
      const double ideal = pmf[i] / mass * spare;
      const double whole = std::floor(ideal);
      freq[i] += static_cast<uint32_t>(whole);
      assigned += static_cast<uint32_t>(whole);
      remainder[i] = ideal - whole;
    }
  }
  // Floating-point sums may overshoot by a count; take it back from the
  // largest slot.
  while (assigned > spare) {
    auto it = std::max_element(freq.begin(), freq.end());
    --*it;
    --assigned;
  }
  std::vector<size_t> order(slots);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return remainder[a] > remainder[b];
  });
  for (size_t k = 0; assigned < spare; k = (k + 1) % slots) {
    ++freq[order[k]];
    ++assigned;
  }
  std::vector<uint32_t> cdf(slots + 1, 0);
  for (size_t i = 0; i < slots; ++i) cdf[i + 1] = cdf[i] + freq[i];
  EASN_ENSURE(cdf.back() == kCdfTotal, "cdf total {} != {}", cdf.back(), kCdfTotal);
  return cdf;
}

SymbolTable BuildSymbolTable(const FactorizedPrior& prior, int channel,
                             ChannelRange observed) {
  EASN_REQUIRE(channel >= 0 && channel < prior.channels(),
               "channel {} outside prior with {} channels", channel,
               prior.channels());
  EASN_REQUIRE(observed.min <= observed.max &&
                   observed.max - observed.min < kMaxTableSpan,
               "channel {} range [{}, {}] is not codable", channel,
               observed.min, observed.max);
  SymbolTable table;
  table.channel = channel;
  table.symbol_min = observed.min - kTableMargin;
  table.symbol_max = observed.max + kTableMargin;
  const size_t symbols = static_cast<size_t>(table.symbol_max - table.symbol_min) + 1;
  std::vector<double> pmf(symbols + 1);
  double covered = 0.0;
  for (size_t i = 0; i < symbols; ++i) {
    pmf[i] = prior.BinProbability(channel, table.symbol_min + static_cast<double>(i));
    covered += pmf[i];
  }
  // Tail mass on both sides goes to the escape slot.
  pmf[symbols] = std::max(0.0, 1.0 - covered);
  table.cdf = QuantizeToCdf(pmf);
  return table;
}

std::vector<SymbolTable> BuildSymbolTables(const FactorizedPrior& prior,
                                           std::span<const ChannelRange> ranges) {
  EASN_REQUIRE(static_cast<int>(ranges.size()) == prior.channels(),
               "{} channel ranges for a prior with {} channels", ranges.size(),
               prior.channels());
  std::vector<SymbolTable> tables;
  tables.reserve(ranges.size());
  for (size_t c = 0; c < ranges.size(); ++c) {
    tables.push_back(BuildSymbolTable(prior, static_cast<int>(c), ranges[c]));
  }
  return tables;
}

std::vector<SymbolTable> BuildSymbolTables(const FactorizedPrior& prior,
                                           const Tensor& y_hat) {
  const std::vector<ChannelRange> ranges = ObservedRanges(prior, y_hat);
  return BuildSymbolTables(prior, ranges);
}

}  // namespace easn
