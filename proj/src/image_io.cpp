/*
 * Copyright 2026 The Spyglass Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "spyglass/error.hpp"
#include "spyglass/image.hpp"

namespace spyglass {

namespace {

using FilePtr = std::unique_ptr<FILE, int (*)(FILE*)>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FILE* f = std::fopen(path.c_str(), mode);
  if (f == nullptr) throw FormatError("cannot open '" + path.string() + "': " + std::strerror(errno));
  return FilePtr(f, &std::fclose);
}

[[noreturn]] void png_fail(png_structp png, png_const_charp message) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = message;
  png_longjmp(png, 1);
}

void png_quiet(png_structp, png_const_charp) {}

/// Reads the whole PNG as 8-bit RGB into `pixels`. Returns false on a libpng error.
bool read_png_rgb8(FILE* file, std::string& error, std::vector<unsigned char>& pixels,
                   std::vector<png_bytep>& rows, png_uint_32& width, png_uint_32& height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_quiet);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(width) * 3) {
    error = "unsupported pixel layout";
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  pixels.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

Image decode_png(const std::filesystem::path& path) {
  FilePtr file = open_file(path, "rb");
  std::string error;
  std::vector<unsigned char> pixels;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  if (!read_png_rgb8(file.get(), error, pixels, rows, width, height)) {
    throw FormatError("corrupt or truncated PNG '" + path.string() + "': " + error);
  }
  if (width == 0 || height == 0) throw FormatError("zero-dimension image '" + path.string() + "'");
  Image out(height, width);
  for (png_uint_32 y = 0; y < height; ++y) {
    for (png_uint_32 x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.channels[c](y, x) = static_cast<float>(pixels[(y * width + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return out;
}

/// Next whitespace-delimited header token of a netpbm file, skipping comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(ch));
  }
  return token;
}

Image decode_pnm(const std::filesystem::path& path, bool color) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  pnm_token(in);  // magic
  long width = 0, height = 0, maxval = 0;
  try {
    width = std::stol(pnm_token(in));
    height = std::stol(pnm_token(in));
    maxval = std::stol(pnm_token(in));
  } catch (const std::exception&) {
    throw FormatError("malformed netpbm header in '" + path.string() + "'");
  }
  if (width <= 0 || height <= 0) throw FormatError("zero-dimension image '" + path.string() + "'");
  if (maxval <= 0 || maxval > 65535) throw FormatError("bad maxval in '" + path.string() + "'");
  const int channels = color ? 3 : 1;
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(static_cast<std::size_t>(width * height * channels * bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError("truncated pixel data in '" + path.string() + "'");
  }
  Image out(height, width);
  const float scale = 1.0f / static_cast<float>(maxval);
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = static_cast<std::size_t>(((y * width + x) * channels + (color ? c : 0)) * bytes);
        const unsigned v = bytes == 2 ? (raw[i] << 8) | raw[i + 1] : raw[i];
        out.channels[c](y, x) = static_cast<float>(v) * scale;
      }
    }
  }
  return out;
}

void write_png_rows(const std::filesystem::path& path, Index height, Index width, int color_type,
                    const std::vector<unsigned char>& pixels) {
  FilePtr file = open_file(path, "wb");
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_fail, png_quiet);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("failed writing PNG '" + path.string() + "': " + error);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = pixels.size() / static_cast<std::size_t>(height);
  for (Index y = 0; y < height; ++y) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * stride);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw FormatError("cannot open image '" + path.string() + "'");
  unsigned char magic[8] = {};
  probe.read(reinterpret_cast<char*>(magic), 8);
  const auto got = probe.gcount();
  probe.close();
  if (got == 8 && png_sig_cmp(magic, 0, 8) == 0) return decode_png(path);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '6') return decode_pnm(path, true);
  if (got >= 2 && magic[0] == 'P' && magic[1] == '5') return decode_pnm(path, false);
  throw FormatError("unsupported image format (bad magic bytes) in '" + path.string() + "'");
}

void write_png(const std::filesystem::path& path, const Image& image) {
  const Index h = image.height(), w = image.width();
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h * w * 3));
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        pixels[static_cast<std::size_t>((y * w + x) * 3 + c)] = quantize_u8(image.channels[c](y, x));
      }
    }
  }
  write_png_rows(path, h, w, PNG_COLOR_TYPE_RGB, pixels);
}

void write_png(const std::filesystem::path& path, const Plane<float>& gray) {
  const Index h = gray.rows(), w = gray.cols();
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h * w));
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) pixels[static_cast<std::size_t>(y * w + x)] = quantize_u8(gray(y, x));
  }
  write_png_rows(path, h, w, PNG_COLOR_TYPE_GRAY, pixels);
}

void write_pgm(const std::filesystem::path& path, const Plane<float>& gray) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << "P5\n" << gray.cols() << ' ' << gray.rows() << "\n255\n";
  for (Index y = 0; y < gray.rows(); ++y) {
    for (Index x = 0; x < gray.cols(); ++x) out.put(static_cast<char>(quantize_u8(gray(y, x))));
  }
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

}  // namespace spyglass
