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

#ifndef EASN_IMAGE_IO_H_
#define EASN_IMAGE_IO_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "easn/tensor.h"

namespace easn {

// 8-bit image, interleaved samples, 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<uint8_t> pixels;

  size_t size() const { return static_cast<size_t>(width) * height * channels; }
  uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

std::vector<uint8_t> ReadFileBytes(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it over `path`, so readers never
// see a partial file.
void WriteFileAtomic(const std::filesystem::path& path,
                     std::span<const uint8_t> bytes);

// PNG (8-bit gray, gray+alpha, RGB, RGBA; alpha dropped) or binary PPM/PGM.
Image ReadImage(const std::filesystem::path& path);
Image DecodeImage(std::span<const uint8_t> bytes);

// Format from the extension: .png, .ppm or .pgm.
void WriteImage(const std::filesystem::path& path, const Image& image);
std::vector<uint8_t> EncodePng(const Image& image);
std::vector<uint8_t> EncodePnm(const Image& image);

bool IsImagePath(const std::filesystem::path& path);
// Sorted list of image files directly inside `dir`.
std::vector<std::filesystem::path> ListImages(const std::filesystem::path& dir);

// (1, 3, H, W) with samples / 255. Gray images are replicated to 3 channels.
Tensor ImageToTensor(const Image& image);
// Clamps to [0, 1], scales by 255 and rounds half away from zero.
Image TensorToImage(const Tensor& tensor, int batch_index = 0);

}  // namespace easn

#endif  // EASN_IMAGE_IO_H_
