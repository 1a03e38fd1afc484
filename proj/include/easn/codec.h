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

#ifndef EASN_CODEC_H_
#define EASN_CODEC_H_

#include <filesystem>
#include <span>
#include <vector>

#include "easn/bitstream.h"
#include "easn/image_io.h"
#include "easn/model.h"

namespace easn {

struct CompressedImage {
  Bitstream stream;
  std::vector<uint8_t> bytes;  // serialized stream, header included
  Tensor y_hat;                // quantized latent, (1, M, h, w)
  // -sum(log2 p(y_hat)) under the continuous prior (floored likelihood).
  double estimated_bits = 0.0;
  // Sum of -log2(freq / 65536) under the integer tables.
  double table_bits = 0.0;
};

// Replicate-pads to the model granularity, quantizes the latent by rounding
// and range-codes it channel by channel in raster order.
CompressedImage CompressImage(const Model& model, const ModelId& id,
                              const Image& image);

// Inverse of CompressImage. Refuses streams for another model id
// (ErrorCode::kModelMismatch); malformed streams raise ErrorCode::kDecode.
Image DecompressImage(const Model& model, const ModelId& id,
                      std::span<const uint8_t> bytes);

// The decoder output computed without a bitstream: round, synthesize, clamp,
// crop, 8-bit.
Image ReconstructInMemory(const Model& model, const Image& image);

// Tensor forms without the 8-bit conversion.
Tensor QuantizedLatent(const Model& model, const Image& image);
Tensor DecodeLatent(const Model& model, const Tensor& y_hat, int height, int width);

void CompressFile(const Model& model, const ModelId& id,
                  const std::filesystem::path& image_path,
                  const std::filesystem::path& out_path);
void DecompressFile(const Model& model, const ModelId& id,
                    const std::filesystem::path& stream_path,
                    const std::filesystem::path& out_path);

}  // namespace easn

#endif  // EASN_CODEC_H_
