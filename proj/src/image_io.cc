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

#include "easn/image_io.h"

#include <png.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "easn/error.h"

namespace easn {
namespace fs = std::filesystem;
namespace {

std::string LowerExtension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

Image DecodePng(std::span<const uint8_t> bytes) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    Fail(ErrorCode::kIo, "cannot read PNG: {}", png.message);
  }
  const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
  png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image image;
  image.width = static_cast<int>(png.width);
  image.height = static_cast<int>(png.height);
  image.channels = gray ? 1 : 3;
  image.pixels.resize(PNG_IMAGE_SIZE(png));
  // Alpha is composited onto black.
  png_color background{0, 0, 0};
  if (!png_image_finish_read(&png, &background, image.pixels.data(), 0, nullptr)) {
    Fail(ErrorCode::kIo, "cannot decode PNG: {}", png.message);
  }
  return image;
}

// Binary PGM (P5) / PPM (P6) with maxval 255.
Image DecodePnm(std::span<const uint8_t> bytes) {
  size_t pos = 2;
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() {
    skip_space();
    long value = 0;
    int digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
      value = value * 10 + (bytes[pos++] - '0');
      ++digits;
    }
    if (digits == 0) Fail(ErrorCode::kIo, "malformed PNM header");
    return value;
  };
  Image image;
  image.channels = bytes[1] == '6' ? 3 : 1;
  image.width = static_cast<int>(read_int());
  image.height = static_cast<int>(read_int());
  const long maxval = read_int();
  if (maxval != 255) Fail(ErrorCode::kIo, "only 8-bit PNM is supported (maxval {})", maxval);
  if (image.width <= 0 || image.height <= 0) Fail(ErrorCode::kIo, "empty PNM image");
  ++pos;  // single whitespace before the raster
  if (bytes.size() < pos + image.size()) Fail(ErrorCode::kIo, "PNM raster truncated");
  image.pixels.assign(bytes.begin() + pos, bytes.begin() + pos + image.size());
  return image;
}

}  // namespace

std::vector<uint8_t> ReadFileBytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open {}", path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  if (in.bad()) Fail(ErrorCode::kIo, "error reading {}", path.string());
  return bytes;
}

void WriteFileAtomic(const fs::path& path, std::span<const uint8_t> bytes) {
  fs::path tmp = path;
  tmp += fmt::format(".tmp{}", static_cast<long>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorCode::kIo, "cannot create {}", tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      fs::remove(tmp, ignored);
      Fail(ErrorCode::kIo, "error writing {}", tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    Fail(ErrorCode::kIo, "cannot move {} into place", path.string());
  }
}

Image DecodeImage(std::span<const uint8_t> bytes) {
  static constexpr uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (bytes.size() >= 8 && std::equal(bytes.begin(), bytes.begin() + 8, kPngSignature)) {
    return DecodePng(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '6')) {
    return DecodePnm(bytes);
  }
  Fail(ErrorCode::kIo, "unrecognized image format");
}

Image ReadImage(const fs::path& path) {
  try {
    return DecodeImage(ReadFileBytes(path));
  } catch (const Error& e) {
    Fail(ErrorCode::kIo, "{}: {}", path.string(), e.what());
  }
}

std::vector<uint8_t> EncodePng(const Image& image) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0, image.pixels.data(), 0, nullptr)) {
    Fail(ErrorCode::kIo, "cannot encode PNG: {}", png.message);
  }
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0, image.pixels.data(), 0, nullptr)) {
    Fail(ErrorCode::kIo, "cannot encode PNG: {}", png.message);
  }
  out.resize(size);
  return out;
}

std::vector<uint8_t> EncodePnm(const Image& image) {
  const std::string header = fmt::format("P{}\n{} {}\n255\n", image.channels == 1 ? 5 : 6,
                                         image.width, image.height);
  std::vector<uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

void WriteImage(const fs::path& path, const Image& image) {
  EASN_REQUIRE(image.channels == 1 || image.channels == 3,
               "cannot write {}-channel image", image.channels);
  EASN_REQUIRE(image.pixels.size() == image.size(), "image buffer size mismatch");
  const std::string ext = LowerExtension(path);
  if (ext == ".png") {
    WriteFileAtomic(path, EncodePng(image));
  } else if (ext == ".ppm" || ext == ".pgm") {
    EASN_REQUIRE((ext == ".pgm") == (image.channels == 1),
                 "{} needs a {} image", path.string(),
                 ext == ".pgm" ? "gray" : "color");
    WriteFileAtomic(path, EncodePnm(image));
  } else {
    Fail(ErrorCode::kInvalidArgument, "unsupported image extension '{}'", ext);
  }
}

bool IsImagePath(const fs::path& path) {
  const std::string ext = LowerExtension(path);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

std::vector<fs::path> ListImages(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    Fail(ErrorCode::kIo, "{} is not a directory", dir.string());
  }
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && IsImagePath(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Tensor ImageToTensor(const Image& image) {
  EASN_REQUIRE(image.channels == 1 || image.channels == 3,
               "unsupported channel count {}", image.channels);
  const Shape s{1, 3, image.height, image.width};
  Tensor t = Tensor::Zeros(s);
  auto d = t.mutable_data();
  for (int c = 0; c < 3; ++c) {
    const int src = image.channels == 1 ? 0 : c;
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        d[Offset(s, 0, c, y, x)] = image.at(y, x, src) / 255.0;
      }
    }
  }
  return t;
}

Image TensorToImage(const Tensor& tensor, int batch_index) {
  const Shape& s = tensor.shape();
  EASN_REQUIRE(s.c == 1 || s.c == 3, "cannot convert {} to an image", s.ToString());
  EASN_REQUIRE(batch_index >= 0 && batch_index < s.n, "batch index {} out of range",
               batch_index);
  Image image;
  image.width = s.w;
  image.height = s.h;
  image.channels = s.c;
  image.pixels.resize(image.size());
  auto d = tensor.data();
  for (int c = 0; c < s.c; ++c) {
    for (int y = 0; y < s.h; ++y) {
      for (int x = 0; x < s.w; ++x) {
        const double v = std::clamp(d[Offset(s, batch_index, c, y, x)], 0.0, 1.0);
        image.at(y, x, c) = static_cast<uint8_t>(std::round(v * 255.0));
      }
    }
  }
  return image;
}

}  // namespace easn
