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

#ifndef EASN_CONFIG_H_
#define EASN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "easn/analysis.h"
#include "easn/model.h"
#include "easn/train.h"

namespace easn {

// Generated training set used instead of an image directory.
struct SyntheticSource {
  int count = 64;
  int width = 32;
  int height = 32;
  uint64_t seed = 1;
};

// INI file with sections [model], [train], [paths], [synthetic], [analysis]
// and [ablate]. Every key is optional except the data source; unknown
// sections and keys are errors. Relative paths are resolved against the
// directory of the config file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path dataset;  // image directory
  std::optional<SyntheticSource> synthetic;
  std::filesystem::path output = ".";
  std::optional<Rect> flat_region;
  std::vector<Variant> ablate_variants;

  // Sets both the model and the training seed.
  void SetSeed(uint64_t seed);
  void Validate() const;
};

RunConfig ParseRunConfig(const std::string& text,
                         const std::filesystem::path& base_dir = ".");
RunConfig LoadRunConfig(const std::filesystem::path& path);

// Loads the dataset directory or generates the synthetic set.
std::vector<Image> LoadTrainingImages(const RunConfig& config);

// Comma separated variant names, e.g. "GDN, EASN-C".
std::vector<Variant> ParseVariantList(const std::string& text);

}  // namespace easn

#endif  // EASN_CONFIG_H_
