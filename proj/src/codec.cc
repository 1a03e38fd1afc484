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

#include "easn/codec.h"

#include <algorithm>
#include <limits>

#include "easn/error.h"
#include "easn/range_coder.h"
#include "easn/symbol_table.h"
#include "easn/weights_io.h"

namespace easn {
namespace {

std::vector<const SymbolTable*> PositionTables(const std::vector<SymbolTable>& tables,
                                               const Shape& latent) {
  std::vector<const SymbolTable*> out;
  out.reserve(latent.size());
  for (int n = 0; n < latent.n; ++n) {
    for (int c = 0; c < latent.c; ++c) {
      for (size_t i = 0; i < latent.plane(); ++i) out.push_back(&tables[c]);
    }
  }
  return out;
}

}  // namespace

Tensor QuantizedLatent(const Model& model, const Image& image) {
  const Tensor x = ReplicatePad(ImageToTensor(image), model.config().Granularity());
  Tape tape;
  return QuantizeRound(model.Analysis(tape, x));
}

Tensor DecodeLatent(const Model& model, const Tensor& y_hat, int height, int width) {
  Tape tape;
  Tensor x_hat = model.Synthesis(tape, y_hat);
  for (double& v : x_hat.mutable_data()) v = std::clamp(v, 0.0, 1.0);
  return Crop(x_hat, height, width);
}

CompressedImage CompressImage(const Model& model, const ModelId& id, const Image& image) {
  EASN_REQUIRE(image.width >= 1 && image.height >= 1 &&
                   image.width <= std::numeric_limits<uint16_t>::max() &&
                   image.height <= std::numeric_limits<uint16_t>::max(),
               "image size {}x{} not supported", image.width, image.height);
  CompressedImage out;
  out.y_hat = QuantizedLatent(model, image);
  const FactorizedPrior& prior = model.prior();

  out.stream.model_id = id;
  out.stream.height = static_cast<uint16_t>(image.height);
  out.stream.width = static_cast<uint16_t>(image.width);
  out.stream.ranges = ObservedRanges(prior, out.y_hat);
  const std::vector<SymbolTable> tables = BuildSymbolTables(prior, out.stream.ranges);
  const std::vector<const SymbolTable*> per_position =
      PositionTables(tables, out.y_hat.shape());

  std::vector<int32_t> symbols;
  symbols.reserve(out.y_hat.size());
  for (double v : out.y_hat.data()) symbols.push_back(static_cast<int32_t>(v));
  out.stream.payload = RangeEncode(symbols, per_position);
  out.bytes = SerializeBitstream(out.stream);
  out.table_bits = IdealCodeLengthBits(symbols, per_position);

  Tape tape;
  out.estimated_bits = RateBits(tape, Likelihood(tape, prior, out.y_hat)).item();
  return out;
}

Image DecompressImage(const Model& model, const ModelId& id,
                      std::span<const uint8_t> bytes) {
  const Bitstream stream = ParseBitstream(bytes);
  if (stream.model_id != id) {
    Fail(ErrorCode::kModelMismatch,
         "bitstream was written by model {}, loaded weights are {}",
         ModelIdHex(stream.model_id), ModelIdHex(id));
  }
  const ModelConfig& config = model.config();
  if (static_cast<int>(stream.ranges.size()) != config.latent_channels) {
    Fail(ErrorCode::kDecode, "bitstream has {} channels, model has {}",
         stream.ranges.size(), config.latent_channels);
  }
  if (stream.height == 0 || stream.width == 0) {
    Fail(ErrorCode::kDecode, "bitstream declares an empty image");
  }
  for (const ChannelRange& r : stream.ranges) {
    if (r.max - r.min >= kMaxTableSpan) {
      Fail(ErrorCode::kDecode, "bitstream channel range [{}, {}] too wide", r.min, r.max);
    }
  }
  const int g = config.Granularity();
  const Shape latent{1, config.latent_channels, (stream.height + g - 1) / g,
                     (stream.width + g - 1) / g};
  const std::vector<SymbolTable> tables = BuildSymbolTables(model.prior(), stream.ranges);
  const std::vector<int32_t> symbols =
      RangeDecode(stream.payload, PositionTables(tables, latent), latent.size());

  std::vector<double> values(symbols.begin(), symbols.end());
  const Tensor y_hat = Tensor::FromData(latent, std::move(values));
  return TensorToImage(DecodeLatent(model, y_hat, stream.height, stream.width));
}

Image ReconstructInMemory(const Model& model, const Image& image) {
  return TensorToImage(
      DecodeLatent(model, QuantizedLatent(model, image), image.height, image.width));
}

void CompressFile(const Model& model, const ModelId& id,
                  const std::filesystem::path& image_path,
                  const std::filesystem::path& out_path) {
  const CompressedImage compressed = CompressImage(model, id, ReadImage(image_path));
  WriteFileAtomic(out_path, compressed.bytes);
}

void DecompressFile(const Model& model, const ModelId& id,
                    const std::filesystem::path& stream_path,
                    const std::filesystem::path& out_path) {
  const Image image = DecompressImage(model, id, ReadFileBytes(stream_path));
  WriteImage(out_path, image);
}

}  // namespace easn
