// Copyright 2026 The fer Authors.
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

// 8-bit raster images and the PNG/JPEG codecs used at the I/O boundary.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "fer/detect.hpp"

namespace fer {

/// Row-major interleaved pixels; channels is 1 (gray) or 3 (RGB).
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0);

  bool empty() const noexcept { return width == 0 || height == 0; }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return pixels[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return pixels[(y * width + x) * channels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Integer Rec.601 luma, (299 R + 587 G + 114 B + 500) / 1000, i.e. the
/// weighted sum rounded half up. Identity on 1-channel input.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
Image to_gray(const Image& image);

/// View over a 1-channel image, for the detector.
GrayView gray_view(const Image& gray);

/// Sniffs the signature and decodes PNG or JPEG. Gray sources decode to one
/// channel, everything else to RGB (alpha is dropped). Throws DecodeError.
Image decode_image(std::span<const std::uint8_t> bytes);
Image load_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality = 95);
void save_png(const Image& image, const std::filesystem::path& path);

}  // namespace fer
