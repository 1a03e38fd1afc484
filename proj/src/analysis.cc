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

#include "easn/analysis.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "easn/error.h"

namespace easn {

double PsnrFromMse(double mse) {
  EASN_REQUIRE(std::isfinite(mse) && mse >= 0.0, "mse must be finite and >= 0, got {}", mse);
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double MeanSquaredError(const Image& a, const Image& b) {
  EASN_REQUIRE(a.width == b.width && a.height == b.height && a.channels == b.channels,
               "image shape mismatch: {}x{}x{} vs {}x{}x{}", a.width, a.height, a.channels,
               b.width, b.height, b.channels);
  EASN_REQUIRE(!a.pixels.empty(), "empty image");
  double sum = 0.0;
  for (size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

double Psnr(const Image& a, const Image& b) { return PsnrFromMse(MeanSquaredError(a, b)); }

double Bpp(uint64_t file_bytes, int width, int height) {
  EASN_REQUIRE(width > 0 && height > 0, "bpp needs a positive pixel count, got {}x{}", width,
               height);
  return static_cast<double>(file_bytes) * 8.0 /
         (static_cast<double>(width) * static_cast<double>(height));
}

double FileBpp(const std::filesystem::path& path, int width, int height) {
  std::error_code ec;
  const uintmax_t size = std::filesystem::file_size(path, ec);
  if (ec) Fail(ErrorCode::kIo, "cannot stat {}: {}", path.string(), ec.message());
  return Bpp(size, width, height);
}

HfMap HighFreqMap(const Tensor& x, int n) {
  const Shape& s = x.shape();
  EASN_REQUIRE(n >= 0 && n < s.n, "batch index {} out of range for {}", n, s.ToString());
  HfMap map;
  map.height = s.h;
  map.width = s.w;
  map.values.assign(s.plane(), 0.0);
  auto d = x.data();
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int xx = 0; xx < s.w; ++xx) {
        // Summed as differences so that flat input gives exact zeros.
        const double center = d[Offset(s, n, c, y, xx)];
        double diff = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int sy = std::clamp(y + dy, 0, s.h - 1);
          for (int dx = -1; dx <= 1; ++dx) {
            const int sx = std::clamp(xx + dx, 0, s.w - 1);
            diff += center - d[Offset(s, n, c, sy, sx)];
          }
        }
        map.values[static_cast<size_t>(y) * s.w + xx] += diff / 9.0;
      }
    }
  }
  for (double& v : map.values) v /= s.c;
  return map;
}

HfMap LogGradientMap(const Image& image) {
  EASN_REQUIRE(image.width > 0 && image.height > 0, "empty image");
  const int h = image.height;
  const int w = image.width;
  std::vector<double> gray(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (int c = 0; c < image.channels; ++c) sum += image.at(y, x, c);
      gray[static_cast<size_t>(y) * w + x] = sum / image.channels;
    }
  }
  auto g = [&](int y, int x) {
    return gray[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  HfMap map;
  map.height = h;
  map.width = w;
  map.source = "log-gradient";
  map.values.resize(gray.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (g(y, x + 1) - g(y, x - 1));
      const double gy = 0.5 * (g(y + 1, x) - g(y - 1, x));
      map.values[static_cast<size_t>(y) * w + x] = std::log1p(std::hypot(gx, gy));
    }
  }
  return map;
}

Tensor CaptureScalingFeatures(const Model& model, const Image& image,
                              const std::string& selector) {
  const std::vector<std::string> names = model.TapNames();
  if (std::find(names.begin(), names.end(), selector) == names.end()) {
    Fail(ErrorCode::kInvalidArgument, "unknown tap '{}'; valid taps: {}", selector,
         fmt::join(names, ", "));
  }
  const Tensor x = ReplicatePad(ImageToTensor(image), model.config().Granularity());
  Tape tape;
  TapSink taps;
  model.Analysis(tape, x, &taps);
  auto it = taps.find(selector);
  EASN_ENSURE(it != taps.end(), "tap {} was not produced", selector);
  return it->second;
}

double MeanAbsInRegion(const HfMap& map, const Rect& region) {
  const int y0 = std::clamp(region.top, 0, map.height);
  const int x0 = std::clamp(region.left, 0, map.width);
  const int y1 = std::clamp(region.top + region.height, 0, map.height);
  const int x1 = std::clamp(region.left + region.width, 0, map.width);
  EASN_REQUIRE(y1 > y0 && x1 > x0, "region {}x{}+{}+{} does not overlap the {}x{} map",
               region.width, region.height, region.left, region.top, map.width, map.height);
  double sum = 0.0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) sum += std::abs(map.at(y, x));
  }
  return sum / (static_cast<double>(y1 - y0) * (x1 - x0));
}

Image NormalizeToGray(const HfMap& map, PgmNormalization* norm) {
  EASN_REQUIRE(map.height > 0 && map.width > 0 &&
                   map.values.size() == static_cast<size_t>(map.height) * map.width,
               "malformed map");
  const auto [lo, hi] = std::minmax_element(map.values.begin(), map.values.end());
  PgmNormalization n{*lo, *hi, !(*hi > *lo)};
  Image out;
  out.width = map.width;
  out.height = map.height;
  out.channels = 1;
  out.pixels.resize(map.values.size());
  for (size_t i = 0; i < map.values.size(); ++i) {
    if (n.constant) {
      out.pixels[i] = 128;
    } else {
      const double v = (map.values[i] - n.min) / (n.max - n.min) * 255.0;
      out.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
    }
  }
  if (norm != nullptr) *norm = n;
  return out;
}

void WriteHfPgm(const std::filesystem::path& path, const HfMap& map) {
  PgmNormalization norm;
  const Image gray = NormalizeToGray(map, &norm);
  const std::string meta = fmt::format(
      "source={}\nwidth={}\nheight={}\nmin={}\nmax={}\nconstant={}\n"
      "mapping={}\n",
      map.source, map.width, map.height, norm.min, norm.max, norm.constant ? 1 : 0,
      norm.constant ? "all samples 128" : "round(255 * (v - min) / (max - min))");
  std::filesystem::path meta_path = path;
  meta_path += ".meta";
  WriteFileAtomic(meta_path, std::vector<uint8_t>(meta.begin(), meta.end()));
  WriteFileAtomic(path, EncodePnm(gray));
}

std::string CsvField(const std::string& value) {
  if (value.find_first_of(",\"\r\n") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string FormatRdCsv(std::span<const RDPoint> points) {
  std::string out = "model,lambda,bpp,psnr_db\n";
  for (const RDPoint& p : points) {
    out += fmt::format("{},{},{},{}\n", CsvField(p.model), p.lambda, p.bpp, p.psnr_db);
  }
  return out;
}

void WriteRdCsv(const std::filesystem::path& path, std::span<const RDPoint> points) {
  const std::string csv = FormatRdCsv(points);
  WriteFileAtomic(path, std::vector<uint8_t>(csv.begin(), csv.end()));
}

}  // namespace easn
