// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "gnv/math.hpp"

namespace gnv {

/// Row-major RGB image with values nominally in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> rgb;

  static Image filled(std::size_t width, std::size_t height, const Vec3& color);

  std::size_t pixel_count() const noexcept { return width * height; }
  Vec3 at(std::size_t x, std::size_t y) const {
    const double* p = rgb.data() + 3 * (y * width + x);
    return {p[0], p[1], p[2]};
  }
  void set(std::size_t x, std::size_t y, const Vec3& c) {
    double* p = rgb.data() + 3 * (y * width + x);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  bool same_size(const Image& o) const noexcept { return width == o.width && height == o.height; }
};

/// 8-bit RGB PNG; values are clamped to [0, 1] and rounded.
void write_png(const Image& image, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

/// Lossless float dump: ASCII "GNVIMG v1\n", width and height as u32
/// little-endian, then width*height*3 little-endian float32 values, row-major.
void write_float_dump(const Image& image, const std::filesystem::path& path);
Image read_float_dump(const std::filesystem::path& path);

}  // namespace gnv
