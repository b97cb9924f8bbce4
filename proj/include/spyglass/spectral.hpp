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

// Grayscale conversion, 2-D DFT and the normalised magnitude spectrum that
// feeds the spectral pathway.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "spyglass/error.hpp"
#include "spyglass/image.hpp"
#include "spyglass/tensor.hpp"

namespace spyglass {

template <typename Scalar>
using GrayImage = Plane<Scalar>;

template <typename Scalar>
using ComplexPlane = Eigen::Array<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::array<double, 3> kLumaWeights{0.299, 0.587, 0.114};

/// Min-max normalised magnitude map with its processing flags.
template <typename Scalar>
struct Spectrum {
  Plane<Scalar> values;
  bool shifted = false;
  bool log_scaled = false;

  Index height() const { return values.rows(); }
  Index width() const { return values.cols(); }
};

template <typename Scalar>
GrayImage<Scalar> to_grayscale(const RgbImage<Scalar>& image,
                               const std::array<double, 3>& weights = kLumaWeights) {
  if (weights[0] < 0 || weights[1] < 0 || weights[2] < 0) {
    throw ConfigError("grayscale weights must be non-negative");
  }
  if (std::abs(weights[0] + weights[1] + weights[2] - 1.0) > 1e-9) {
    throw ConfigError("grayscale weights must sum to 1");
  }
  return Scalar(weights[0]) * image.channels[0] + Scalar(weights[1]) * image.channels[1] +
         Scalar(weights[2]) * image.channels[2];
}

inline bool is_power_of_two(Index n) { return n > 0 && (n & (n - 1)) == 0; }

namespace detail {

/// In-place iterative radix-2 transform of `n` strided values.
template <typename Scalar>
void fft_radix2(std::complex<Scalar>* data, Index n, Index stride, bool inverse) {
  for (Index i = 1, j = 0; i < n; ++i) {
    Index bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(data[i * stride], data[j * stride]);
  }
  const double sign = inverse ? 1.0 : -1.0;
  for (Index len = 2; len <= n; len <<= 1) {
    const Index half = len / 2;
    for (Index k = 0; k < half; ++k) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
      const std::complex<Scalar> w(static_cast<Scalar>(std::cos(angle)), static_cast<Scalar>(std::sin(angle)));
      for (Index start = 0; start < n; start += len) {
        std::complex<Scalar>& a = data[(start + k) * stride];
        std::complex<Scalar>& b = data[(start + k + half) * stride];
        const std::complex<Scalar> t = w * b;
        b = a - t;
        a = a + t;
      }
    }
  }
}

/// Direct O(n^2) transform for sizes that are not powers of two.
template <typename Scalar>
void dft_direct(std::complex<Scalar>* data, Index n, Index stride, bool inverse) {
  std::vector<std::complex<Scalar>> in(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = data[i * stride];
  const double sign = inverse ? 1.0 : -1.0;
  for (Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0;
    for (Index i = 0; i < n; ++i) {
      const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>((k * i) % n) / static_cast<double>(n);
      acc += std::complex<double>(in[static_cast<std::size_t>(i)]) * std::polar(1.0, angle);
    }
    data[k * stride] = std::complex<Scalar>(acc);
  }
}

template <typename Scalar>
void transform_1d(std::complex<Scalar>* data, Index n, Index stride, bool inverse) {
  if (is_power_of_two(n)) {
    fft_radix2(data, n, stride, inverse);
  } else {
    dft_direct(data, n, stride, inverse);
  }
}

template <typename Scalar>
void transform_2d(ComplexPlane<Scalar>& x, bool inverse) {
  const Index h = x.rows(), w = x.cols();
  for (Index r = 0; r < h; ++r) transform_1d(x.data() + r * w, w, 1, inverse);
  for (Index c = 0; c < w; ++c) transform_1d(x.data() + c, h, w, inverse);
}

}  // namespace detail

/// Unnormalised forward DFT: X[u,v] = sum x[h,w] exp(-2 pi i (uh/H + vw/W)).
template <typename Scalar>
ComplexPlane<Scalar> fft2(const ComplexPlane<Scalar>& image) {
  ComplexPlane<Scalar> out = image;
  detail::transform_2d(out, false);
  return out;
}

template <typename Scalar>
ComplexPlane<Scalar> fft2(const GrayImage<Scalar>& image) {
  return fft2<Scalar>(ComplexPlane<Scalar>(image.template cast<std::complex<Scalar>>()));
}

/// Inverse DFT including the 1/(H*W) factor, so ifft2(fft2(x)) == x.
template <typename Scalar>
ComplexPlane<Scalar> ifft2(const ComplexPlane<Scalar>& freq) {
  ComplexPlane<Scalar> out = freq;
  detail::transform_2d(out, true);
  out /= std::complex<Scalar>(Scalar(freq.rows() * freq.cols()));
  return out;
}

/// Circular shift moving bin (0,0) to (H/2, W/2).
template <typename Derived>
auto fftshift(const Eigen::ArrayBase<Derived>& in) {
  using PlainT = typename Derived::PlainObject;
  const Index h = in.rows(), w = in.cols();
  PlainT out(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) out((r + h / 2) % h, (c + w / 2) % w) = in(r, c);
  }
  return out;
}

/// Inverse of fftshift for any size.
template <typename Derived>
auto ifftshift(const Eigen::ArrayBase<Derived>& in) {
  using PlainT = typename Derived::PlainObject;
  const Index h = in.rows(), w = in.cols();
  PlainT out(h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index c = 0; c < w; ++c) out(r, c) = in((r + h / 2) % h, (c + w / 2) % w);
  }
  return out;
}

/// |X|, optionally centred and ln(1+.) compressed, then min-max scaled to [0,1].
/// A constant map normalises to zeros.
template <typename Scalar>
Spectrum<Scalar> magnitude_spectrum(const ComplexPlane<Scalar>& freq, bool shift = true, bool log_scale = true) {
  Spectrum<Scalar> s;
  s.values = freq.abs();
  if (shift) s.values = fftshift(s.values);
  if (log_scale) s.values = s.values.log1p();
  const Scalar lo = s.values.minCoeff();
  const Scalar hi = s.values.maxCoeff();
  if (hi > lo) {
    s.values = (s.values - lo) / (hi - lo);
  } else {
    s.values.setZero();
  }
  s.shifted = shift;
  s.log_scaled = log_scale;
  return s;
}

/// resize -> grayscale -> fft2 -> centred log magnitude, as a [1, side, side] tensor.
template <typename Scalar>
Tensor<Scalar> spectral_input(const RgbImage<Scalar>& image, Index side) {
  if (side < 1) throw ConfigError("spectral input side must be positive");
  const RgbImage<Scalar> resized = resize_bilinear(image, side, side);
  const Spectrum<Scalar> spectrum = magnitude_spectrum(fft2(to_grayscale(resized)), true, true);
  return Tensor<Scalar>({1, side, side}, Eigen::Map<const Vector<Scalar>>(spectrum.values.data(), side * side));
}

/**
 * Nyquist-band energy ratio: mean power on the Nyquist row and column
 * (u = H/2 or v = W/2) over the mean power of the remaining bins whose
 * Chebyshev frequency radius max(|fu|, |fv|) lies in [0.375, 0.5).
 * Both sides must be even and at least 4.
 */
template <typename Scalar>
double nyquist_band_ratio(const GrayImage<Scalar>& gray) {
  const Index h = gray.rows(), w = gray.cols();
  if (h < 4 || w < 4 || h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("nyquist_band_ratio needs even sides >= 4, got " + std::to_string(h) + "x" + std::to_string(w));
  }
  const ComplexPlane<double> freq = fft2(GrayImage<double>(gray.template cast<double>()));
  double nyquist = 0, band = 0;
  Index n_nyquist = 0, n_band = 0;
  for (Index u = 0; u < h; ++u) {
    const double fu = std::abs(static_cast<double>(u <= h / 2 ? u : u - h)) / static_cast<double>(h);
    for (Index v = 0; v < w; ++v) {
      const double fv = std::abs(static_cast<double>(v <= w / 2 ? v : v - w)) / static_cast<double>(w);
      const double p = std::norm(freq(u, v));
      if (u == h / 2 || v == w / 2) {
        nyquist += p;
        ++n_nyquist;
      } else if (std::max(fu, fv) >= 0.375) {
        band += p;
        ++n_band;
      }
    }
  }
  if (band <= 0) return nyquist > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return (nyquist / static_cast<double>(n_nyquist)) / (band / static_cast<double>(n_band));
}

}  // namespace spyglass
