// Copyright 2026 The GeoFuse Authors. All Rights Reserved.
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

#include "geofuse/core/image.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "geofuse/core/error.hpp"

namespace geofuse {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ValidationError("write_png: expected 1 or 3 channels, got " + std::to_string(img.channels));
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw RuntimeFailure("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw RuntimeFailure("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) row[x * img.channels + c] = to_byte(img.at(y, x, c));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw ValidationError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ValidationError("corrupt png " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const int c = png_get_channels(png, info);
  Image img(h, w, c);
  std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      for (int k = 0; k < c; ++k) img.at(y, x, k) = row[x * c + k] / 255.0f;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_pfm_planes(const std::string& path, const std::vector<Image>& planes) {
  if (planes.empty()) throw ValidationError("write_pfm_planes: no planes");
  const int w = planes[0].width;
  const int h = planes[0].height;
  for (const auto& p : planes) {
    if (p.width != w || p.height != h || p.channels != 1)
      throw ValidationError("write_pfm_planes: planes must be single-channel and equal size");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write " + path);
  const int total_h = h * static_cast<int>(planes.size());
  out << "Pf\n" << w << " " << total_h << "\n-1.0\n";
  // Bottom-up: last image row first.
  for (int gy = total_h - 1; gy >= 0; --gy) {
    const Image& p = planes[gy / h];
    const int y = gy % h;
    for (int x = 0; x < w; ++x) {
      float v = p.at(y, x, 0);
      std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
      if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
      out.write(reinterpret_cast<const char*>(&bits), 4);
    }
  }
  if (!out) throw RuntimeFailure("short write " + path);
}

std::vector<Image> read_pfm_planes(const std::string& path, int plane_height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string magic;
  int w = 0;
  int total_h = 0;
  double scale = 0.0;
  in >> magic >> w >> total_h >> scale;
  in.get();
  if (magic != "Pf" || w <= 0 || total_h <= 0 || plane_height <= 0 || total_h % plane_height != 0) {
    throw ValidationError("bad pfm header in " + path);
  }
  const bool little = scale < 0.0;
  const int n_planes = total_h / plane_height;
  std::vector<Image> planes(n_planes, Image(plane_height, w, 1));
  for (int gy = total_h - 1; gy >= 0; --gy) {
    for (int x = 0; x < w; ++x) {
      std::uint32_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), 4);
      const bool native_little = std::endian::native == std::endian::little;
      if (little != native_little) bits = __builtin_bswap32(bits);
      planes[gy / plane_height].at(gy % plane_height, x, 0) = std::bit_cast<float>(bits);
    }
  }
  if (!in) throw ValidationError("truncated pfm " + path);
  return planes;
}

}  // namespace geofuse
