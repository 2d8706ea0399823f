// Copyright 2026 The gnvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "gnv/image.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "gnv/error.hpp"

namespace gnv {

Image Image::filled(std::size_t width, std::size_t height, const Vec3& color) {
  Image img{width, height, std::vector<double>(3 * width * height)};
  for (std::size_t i = 0; i < width * height; ++i) {
    for (int c = 0; c < 3; ++c) img.rgb[3 * i + c] = color[c];
  }
  return img;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_png(const Image& image, const std::filesystem::path& path) {
  if (image.rgb.size() != 3 * image.pixel_count() || image.pixel_count() == 0) throw IoError("invalid image");
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png allocation failed");
  }
  std::vector<std::uint8_t> row(3 * image.width);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing png '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t i = 0; i < 3 * image.width; ++i) row[i] = to_byte(image.rgb[3 * y * image.width + i]);
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png allocation failed");
  }
  Image image;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed reading png '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  image.width = png_get_image_width(png, info);
  image.height = png_get_image_height(png, info);
  image.rgb.resize(3 * image.width * image.height);
  row.resize(png_get_rowbytes(png, info));
  for (std::size_t y = 0; y < image.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (std::size_t i = 0; i < 3 * image.width; ++i) image.rgb[3 * y * image.width + i] = row[i] / 255.0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

namespace {

constexpr char kDumpMagic[] = "GNVIMG v1\n";
constexpr std::size_t kDumpMagicSize = sizeof(kDumpMagic) - 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated float image");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_float_dump(const Image& image, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "'");
  os.write(kDumpMagic, kDumpMagicSize);
  put_u32(os, static_cast<std::uint32_t>(image.width));
  put_u32(os, static_cast<std::uint32_t>(image.height));
  for (double v : image.rgb) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Image read_float_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  char magic[kDumpMagicSize];
  if (!is.read(magic, kDumpMagicSize) || std::memcmp(magic, kDumpMagic, kDumpMagicSize) != 0) {
    throw IoError("'" + path.string() + "' is not a GNVIMG v1 file");
  }
  Image image;
  image.width = get_u32(is);
  image.height = get_u32(is);
  image.rgb.resize(3 * image.width * image.height);
  for (double& v : image.rgb) v = std::bit_cast<float>(get_u32(is));
  return image;
}

}  // namespace gnv
