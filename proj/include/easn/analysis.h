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

#ifndef EASN_ANALYSIS_H_
#define EASN_ANALYSIS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "easn/image_io.h"
#include "easn/model.h"

namespace easn {

inline constexpr double kPsnrCapDb = 100.0;

struct RDPoint {
  std::string model;
  double lambda = 0.0;
  double bpp = 0.0;
  double psnr_db = 0.0;
};

// 10 log10(255^2 / mse) for mse on the 8-bit scale, capped at kPsnrCapDb.
double PsnrFromMse(double mse);
double MeanSquaredError(const Image& a, const Image& b);
double Psnr(const Image& a, const Image& b);

double Bpp(uint64_t file_bytes, int width, int height);
double FileBpp(const std::filesystem::path& path, int width, int height);

// Single-channel float map.
struct HfMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // row-major
  std::string source;

  double at(int y, int x) const { return values[static_cast<size_t>(y) * width + x]; }
};

// Channel mean of x - mean3x3(x) for batch item `n`; the 3x3 mean filter
// replicates border samples.
HfMap HighFreqMap(const Tensor& x, int n = 0);

// log(1 + |grad|) of the channel-mean 8-bit intensity, central differences
// with replicated borders.
HfMap LogGradientMap(const Image& image);

// Runs the encoder on the (replicate-padded) image and returns the input of
// the selected scaling branch. Unknown selectors raise kInvalidArgument with
// the valid tap list.
Tensor CaptureScalingFeatures(const Model& model, const Image& image,
                              const std::string& selector);

struct Rect {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;
};

// Mean |value| over `region`, clipped to the map.
double MeanAbsInRegion(const HfMap& map, const Rect& region);

struct PgmNormalization {
  double min = 0.0;
  double max = 0.0;
  bool constant = false;
};

// Min-max normalization to 0..255; a constant map becomes all 128.
Image NormalizeToGray(const HfMap& map, PgmNormalization* norm = nullptr);

// Writes `path` (binary PGM) and `path`.meta with the normalization constants.
void WriteHfPgm(const std::filesystem::path& path, const HfMap& map);

// CSV with header model,lambda,bpp,psnr_db.
std::string FormatRdCsv(std::span<const RDPoint> points);
void WriteRdCsv(const std::filesystem::path& path, std::span<const RDPoint> points);

// RFC 4180 field quoting.
std::string CsvField(const std::string& value);

}  // namespace easn

#endif  // EASN_ANALYSIS_H_
