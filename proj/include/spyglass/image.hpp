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

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>

#include "spyglass/tensor.hpp"

namespace spyglass {

/// Single image plane, row-major, indexed (row, column).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Planar RGB raster with values nominally in [0, 1].
template <typename Scalar>
struct RgbImage {
  std::array<Plane<Scalar>, 3> channels;

  RgbImage() = default;
  RgbImage(Index height, Index width) {
    for (auto& c : channels) c = Plane<Scalar>::Zero(height, width);
  }

  static RgbImage from_gray(const Plane<Scalar>& gray) {
    RgbImage out;
    for (auto& c : out.channels) c = gray;
    return out;
  }

  Index height() const { return channels[0].rows(); }
  Index width() const { return channels[0].cols(); }

  bool operator==(const RgbImage& other) const {
    for (int c = 0; c < 3; ++c) {
      if (channels[c].rows() != other.channels[c].rows() || channels[c].cols() != other.channels[c].cols() ||
          !(channels[c] == other.channels[c]).all()) {
        return false;
      }
    }
    return true;
  }
};

using Image = RgbImage<float>;

/// Bilinear resampling with pixel-centre alignment and edge clamping.
template <typename Scalar>
Plane<Scalar> resize_bilinear(const Plane<Scalar>& src, Index height, Index width) {
  if (src.rows() == height && src.cols() == width) return src;
  Plane<Scalar> out(height, width);
  const double sy = static_cast<double>(src.rows()) / static_cast<double>(height);
  const double sx = static_cast<double>(src.cols()) / static_cast<double>(width);
  const Index max_y = src.rows() - 1, max_x = src.cols() - 1;
  for (Index y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(max_y));
    const Index y0 = static_cast<Index>(fy);
    const Index y1 = std::min(y0 + 1, max_y);
    const double wy = fy - static_cast<double>(y0);
    for (Index x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(max_x));
      const Index x0 = static_cast<Index>(fx);
      const Index x1 = std::min(x0 + 1, max_x);
      const double wx = fx - static_cast<double>(x0);
      const double top = (1 - wx) * src(y0, x0) + wx * src(y0, x1);
      const double bottom = (1 - wx) * src(y1, x0) + wx * src(y1, x1);
      out(y, x) = static_cast<Scalar>((1 - wy) * top + wy * bottom);
    }
  }
  return out;
}

template <typename Scalar>
RgbImage<Scalar> resize_bilinear(const RgbImage<Scalar>& src, Index height, Index width) {
  RgbImage<Scalar> out;
  for (int c = 0; c < 3; ++c) out.channels[c] = resize_bilinear(src.channels[c], height, width);
  return out;
}

/// Decodes PNG (8/16-bit gray, gray+alpha, RGB, RGBA, palette) or binary PPM/PGM.
/// Grayscale is replicated to three channels; alpha is dropped.
Image read_image(const std::filesystem::path& path);

/// 8-bit writers; values are clamped to [0,1] and rounded to 0..255.
void write_png(const std::filesystem::path& path, const Image& image);
void write_png(const std::filesystem::path& path, const Plane<float>& gray);
void write_pgm(const std::filesystem::path& path, const Plane<float>& gray);

inline unsigned char quantize_u8(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace spyglass
