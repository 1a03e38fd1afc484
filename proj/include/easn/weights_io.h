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

#ifndef EASN_WEIGHTS_IO_H_
#define EASN_WEIGHTS_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "easn/bitstream.h"
#include "easn/model.h"

namespace easn {

// Weights file, little-endian:
//
//   magic "EASW" | version u8 = 1 | model id 8 bytes | payload length u64 |
//   payload
//
// The payload holds the model config, the training lambda and every
// parameter in Model::Parameters() order (name, shape, float64 data). The
// model id is the first 8 bytes of SHA-256(payload).
struct WeightsFile {
  static constexpr std::array<uint8_t, 4> kMagic{'E', 'A', 'S', 'W'};
  static constexpr uint8_t kVersion = 1;
};

struct LoadedModel {
  Model model;
  double lambda = 0.0;
  ModelId id{};
};

std::vector<uint8_t> SerializeWeightsPayload(const Model& model, double lambda);
std::vector<uint8_t> SerializeWeights(const Model& model, double lambda);
LoadedModel ParseWeights(std::span<const uint8_t> bytes);

ModelId ComputeModelId(std::span<const uint8_t> payload);
ModelId ComputeModelId(const Model& model, double lambda);
std::string ModelIdHex(const ModelId& id);

void SaveWeights(const std::filesystem::path& path, const Model& model,
                 double lambda);
LoadedModel LoadWeights(const std::filesystem::path& path);

}  // namespace easn

#endif  // EASN_WEIGHTS_IO_H_
