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

#include "easn/bitstream.h"

#include <algorithm>
#include <limits>

#include "easn/error.h"

namespace easn {
namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) {
    U8(static_cast<uint8_t>(v));
    U8(static_cast<uint8_t>(v >> 8));
  }
  void I16(int16_t v) { U16(static_cast<uint16_t>(v)); }
  void U32(uint32_t v) {
    U16(static_cast<uint16_t>(v));
    U16(static_cast<uint16_t>(v >> 16));
  }
  void Bytes(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<uint8_t> Take() { return std::move(out_); }

 private:
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t U8() {
    Need(1);
    return bytes_[pos_++];
  }
  uint16_t U16() {
    const uint16_t lo = U8();
    return static_cast<uint16_t>(lo | (U8() << 8));
  }
  int16_t I16() { return static_cast<int16_t>(U16()); }
  uint32_t U32() {
    const uint32_t lo = U16();
    return lo | (static_cast<uint32_t>(U16()) << 16);
  }
  std::span<const uint8_t> Bytes(size_t n) {
    Need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void Need(size_t n) {
    if (bytes_.size() - pos_ < n) {
      Fail(ErrorCode::kDecode, "bitstream truncated: need {} bytes at offset {}, {} left",
           n, pos_, bytes_.size() - pos_);
    }
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

size_t BitstreamHeaderBytes(size_t channels) {
  return 4 + 1 + 8 + 2 + 2 + 2 + 4 * channels + 4;
}

std::vector<uint8_t> SerializeBitstream(const Bitstream& stream) {
  EASN_REQUIRE(stream.ranges.size() <= std::numeric_limits<uint16_t>::max(),
               "too many channels: {}", stream.ranges.size());
  EASN_REQUIRE(stream.payload.size() <= std::numeric_limits<uint32_t>::max(),
               "payload too large: {} bytes", stream.payload.size());
  Writer w;
  w.Bytes(Bitstream::kMagic);
  w.U8(Bitstream::kVersion);
  w.Bytes(stream.model_id);
  w.U16(stream.height);
  w.U16(stream.width);
  w.U16(static_cast<uint16_t>(stream.ranges.size()));
  for (const ChannelRange& r : stream.ranges) {
    EASN_REQUIRE(r.min >= std::numeric_limits<int16_t>::min() &&
                     r.max <= std::numeric_limits<int16_t>::max() && r.min <= r.max,
                 "channel range [{}, {}] does not fit the header", r.min, r.max);
    w.I16(static_cast<int16_t>(r.min));
    w.I16(static_cast<int16_t>(r.max));
  }
  w.U32(static_cast<uint32_t>(stream.payload.size()));
  w.Bytes(stream.payload);
  return w.Take();
}

Bitstream ParseBitstream(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.Bytes(4);
  if (!std::equal(magic.begin(), magic.end(), Bitstream::kMagic.begin())) {
    Fail(ErrorCode::kDecode, "not an EASN bitstream (bad magic)");
  }
  const uint8_t version = r.U8();
  if (version != Bitstream::kVersion) {
    Fail(ErrorCode::kDecode, "unsupported bitstream version {}", version);
  }
  Bitstream stream;
  auto id = r.Bytes(stream.model_id.size());
  std::copy(id.begin(), id.end(), stream.model_id.begin());
  stream.height = r.U16();
  stream.width = r.U16();
  const uint16_t channels = r.U16();
  stream.ranges.resize(channels);
  for (ChannelRange& range : stream.ranges) {
    range.min = r.I16();
    range.max = r.I16();
    if (range.min > range.max) {
      Fail(ErrorCode::kDecode, "bitstream channel range [{}, {}] is empty",
           range.min, range.max);
    }
  }
  const uint32_t length = r.U32();
  auto payload = r.Bytes(length);
  stream.payload.assign(payload.begin(), payload.end());
  if (r.remaining() != 0) {
    Fail(ErrorCode::kDecode, "{} unexpected bytes after the payload", r.remaining());
  }
  return stream;
}

}  // namespace easn
