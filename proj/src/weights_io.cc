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

#include "easn/weights_io.h"

#include <openssl/evp.h>

#include <bit>
#include <cstring>

#include "easn/error.h"
#include "easn/image_io.h"

namespace easn {
namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) {
    for (int i = 0; i < 2; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void F64(double v) { U64(std::bit_cast<uint64_t>(v)); }
  void Str(const std::string& s) {
    U16(static_cast<uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
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
    uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(U8() << (8 * i));
    return v;
  }
  uint32_t U32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(U8()) << (8 * i);
    return v;
  }
  uint64_t U64() {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(U8()) << (8 * i);
    return v;
  }
  double F64() { return std::bit_cast<double>(U64()); }
  std::string Str() {
    const uint16_t n = U16();
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
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
      Fail(ErrorCode::kDecode, "weights file truncated at offset {}", pos_);
    }
  }

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<uint8_t> SerializeWeightsPayload(const Model& model, double lambda) {
  const ModelConfig& c = model.config();
  Writer w;
  w.U32(static_cast<uint32_t>(c.stages));
  w.U32(static_cast<uint32_t>(c.base_channels));
  w.U32(static_cast<uint32_t>(c.latent_channels));
  w.U32(static_cast<uint32_t>(c.kernel));
  w.Str(std::string(VariantName(c.variant)));
  w.F64(c.gdn_gamma_init);
  w.U64(c.seed);
  w.F64(lambda);
  const std::vector<NamedTensor> params = model.Parameters();
  w.U32(static_cast<uint32_t>(params.size()));
  for (const NamedTensor& p : params) {
    w.Str(p.name);
    const Shape& s = p.tensor.shape();
    for (int d : {s.n, s.c, s.h, s.w}) w.U32(static_cast<uint32_t>(d));
    for (double v : p.tensor.data()) w.F64(v);
  }
  return w.Take();
}

ModelId ComputeModelId(std::span<const uint8_t> payload) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(payload.data(), payload.size(), digest, &length, EVP_sha256(),
                 nullptr) != 1) {
    Fail(ErrorCode::kContract, "SHA-256 failed");
  }
  ModelId id;
  std::memcpy(id.data(), digest, id.size());
  return id;
}

ModelId ComputeModelId(const Model& model, double lambda) {
  return ComputeModelId(SerializeWeightsPayload(model, lambda));
}

std::string ModelIdHex(const ModelId& id) {
  std::string out;
  for (uint8_t b : id) out += fmt::format("{:02x}", b);
  return out;
}

std::vector<uint8_t> SerializeWeights(const Model& model, double lambda) {
  const std::vector<uint8_t> payload = SerializeWeightsPayload(model, lambda);
  Writer w;
  w.Bytes(WeightsFile::kMagic);
  w.U8(WeightsFile::kVersion);
  w.Bytes(ComputeModelId(payload));
  w.U64(payload.size());
  w.Bytes(payload);
  return w.Take();
}

LoadedModel ParseWeights(std::span<const uint8_t> bytes) {
  Reader header(bytes);
  auto magic = header.Bytes(4);
  if (!std::equal(magic.begin(), magic.end(), WeightsFile::kMagic.begin())) {
    Fail(ErrorCode::kDecode, "not an EASN weights file (bad magic)");
  }
  const uint8_t version = header.U8();
  if (version != WeightsFile::kVersion) {
    Fail(ErrorCode::kDecode, "unsupported weights version {}", version);
  }
  ModelId stored;
  auto id = header.Bytes(stored.size());
  std::copy(id.begin(), id.end(), stored.begin());
  const uint64_t length = header.U64();
  if (length != header.remaining()) {
    Fail(ErrorCode::kDecode, "weights payload length {} does not match file ({} bytes)",
         length, header.remaining());
  }
  auto payload = header.Bytes(length);
  if (ComputeModelId(payload) != stored) {
    Fail(ErrorCode::kDecode, "weights payload hash mismatch (corrupt file)");
  }

  Reader r(payload);
  ModelConfig config;
  config.stages = static_cast<int>(r.U32());
  config.base_channels = static_cast<int>(r.U32());
  config.latent_channels = static_cast<int>(r.U32());
  config.kernel = static_cast<int>(r.U32());
  const std::string variant = r.Str();
  const auto parsed = ParseVariant(variant);
  if (!parsed) Fail(ErrorCode::kDecode, "unknown variant '{}' in weights file", variant);
  config.variant = *parsed;
  config.gdn_gamma_init = r.F64();
  config.seed = r.U64();
  const double lambda = r.F64();

  try {
    config.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kDecode, "weights file has an invalid model config: {}", e.what());
  }
  Model model(config);
  model.SetRequiresGrad(false);
  std::vector<NamedTensor> params = model.Parameters();
  const uint32_t count = r.U32();
  if (count != params.size()) {
    Fail(ErrorCode::kDecode, "weights file has {} tensors, model expects {}", count,
         params.size());
  }
  for (NamedTensor& p : params) {
    const std::string name = r.Str();
    Shape s;
    s.n = static_cast<int>(r.U32());
    s.c = static_cast<int>(r.U32());
    s.h = static_cast<int>(r.U32());
    s.w = static_cast<int>(r.U32());
    if (name != p.name || s != p.tensor.shape()) {
      Fail(ErrorCode::kDecode, "weights tensor '{}' {} does not match expected '{}' {}",
           name, s.ToString(), p.name, p.tensor.shape().ToString());
    }
    for (double& v : p.tensor.mutable_data()) v = r.F64();
  }
  if (r.remaining() != 0) Fail(ErrorCode::kDecode, "trailing bytes in weights payload");
  return {std::move(model), lambda, stored};
}

void SaveWeights(const std::filesystem::path& path, const Model& model, double lambda) {
  WriteFileAtomic(path, SerializeWeights(model, lambda));
}

LoadedModel LoadWeights(const std::filesystem::path& path) {
  return ParseWeights(ReadFileBytes(path));
}

}  // namespace easn
