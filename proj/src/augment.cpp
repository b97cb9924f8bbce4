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

#include "spyglass/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "spyglass/error.hpp"
#include "spyglass/spectral.hpp"

namespace spyglass {

std::string_view transform_name(Transform t) {
  switch (t) {
    case Transform::horizontal_flip: return "horizontal_flip";
    case Transform::vertical_flip: return "vertical_flip";
    case Transform::random_rotation: return "random_rotation";
    case Transform::color_jitter: return "color_jitter";
    case Transform::gaussian_blur: return "gaussian_blur";
  }
  return "unknown";
}

void AugmentPolicy::validate() const {
  for (double p : {flip_probability, rotation_probability, blur_probability}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must lie in [0,1]");
  }
  if (!(max_rotation_degrees >= 0.0 && max_rotation_degrees <= 180.0)) {
    throw ConfigError("rotation bound must lie in [0,180] degrees");
  }
  if (!(jitter_min > 0.0 && jitter_min <= jitter_max)) throw ConfigError("jitter factors must be positive and ordered");
  if (!(blur_sigma_min > 0.0 && blur_sigma_min <= blur_sigma_max)) {
    throw ConfigError("blur sigma range must be positive and ordered");
  }
}

AugmentPolicy policy_from_name(std::string_view name) {
  AugmentPolicy policy;
  if (name == "none") return policy;
  if (name == "hflip") {
    policy.transforms = {Transform::horizontal_flip};
  } else if (name == "vflip") {
    policy.transforms = {Transform::vertical_flip};
  } else if (name == "rotation") {
    policy.transforms = {Transform::random_rotation};
  } else if (name == "jitter") {
    policy.transforms = {Transform::color_jitter};
  } else if (name == "blur") {
    policy.transforms = {Transform::gaussian_blur};
  } else if (name == "combined") {
    policy.transforms = {Transform::horizontal_flip, Transform::vertical_flip, Transform::random_rotation,
                         Transform::color_jitter, Transform::gaussian_blur};
  } else {
    throw ConfigError("unknown augmentation policy '" + std::string(name) +
                      "' (expected none, hflip, vflip, rotation, jitter, blur or combined)");
  }
  return policy;
}

Image flip_horizontal(const Image& image) {
  Image out;
  for (int c = 0; c < 3; ++c) out.channels[c] = image.channels[c].rowwise().reverse();
  return out;
}

Image flip_vertical(const Image& image) {
  Image out;
  for (int c = 0; c < 3; ++c) out.channels[c] = image.channels[c].colwise().reverse();
  return out;
}

Image rotate(const Image& image, double degrees) {
  const Index h = image.height(), w = image.width();
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double cy = 0.5 * static_cast<double>(h - 1), cx = 0.5 * static_cast<double>(w - 1);
  Image out(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      // Inverse mapping: destination pixel -> source coordinate.
      const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
      const double sy = std::clamp(cy + cos_t * dy - sin_t * dx, 0.0, static_cast<double>(h - 1));
      const double sx = std::clamp(cx + sin_t * dy + cos_t * dx, 0.0, static_cast<double>(w - 1));
      const Index y0 = static_cast<Index>(sy), x0 = static_cast<Index>(sx);
      const Index y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double wy = sy - static_cast<double>(y0), wx = sx - static_cast<double>(x0);
      for (int c = 0; c < 3; ++c) {
        const auto& p = image.channels[c];
        const double top = (1 - wx) * p(y0, x0) + wx * p(y0, x1);
        const double bottom = (1 - wx) * p(y1, x0) + wx * p(y1, x1);
        out.channels[c](y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Image color_jitter(const Image& image, double brightness, double contrast, double saturation) {
  Image out = image;
  for (auto& c : out.channels) c = (c * static_cast<float>(brightness)).max(0.0f).min(1.0f);
  const float mean = to_grayscale(out).mean();
  for (auto& c : out.channels) c = ((c - mean) * static_cast<float>(contrast) + mean).max(0.0f).min(1.0f);
  const Plane<float> gray = to_grayscale(out);
  for (auto& c : out.channels) c = ((c - gray) * static_cast<float>(saturation) + gray).max(0.0f).min(1.0f);
  return out;
}

namespace {

Plane<float> blur_rows(const Plane<float>& src, const std::vector<double>& kernel, Index radius) {
  const Index h = src.rows(), w = src.cols();
  Plane<float> out(h, w);
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      double acc = 0;
      for (Index k = -radius; k <= radius; ++k) {
        acc += kernel[static_cast<std::size_t>(k + radius)] * src(y, std::clamp<Index>(x + k, 0, w - 1));
      }
      out(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma > 0)) throw ConfigError("blur sigma must be positive");
  const Index radius = static_cast<Index>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double total = 0;
  for (Index k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = v;
    total += v;
  }
  for (double& v : kernel) v /= total;
  Image out;
  for (int c = 0; c < 3; ++c) {
    Plane<float> horizontal = blur_rows(image.channels[c], kernel, radius);
    Plane<float> transposed = horizontal.transpose();
    out.channels[c] = blur_rows(transposed, kernel, radius).transpose();
  }
  return out;
}

Image augment(const Image& image, const AugmentPolicy& policy, Rng& stream) {
  Image out = image;
  for (Transform t : policy.transforms) {
    switch (t) {
      case Transform::horizontal_flip:
        if (bernoulli(stream, policy.flip_probability)) out = flip_horizontal(out);
        break;
      case Transform::vertical_flip:
        if (bernoulli(stream, policy.flip_probability)) out = flip_vertical(out);
        break;
      case Transform::random_rotation: {
        const bool fire = bernoulli(stream, policy.rotation_probability);
        const double degrees = uniform(stream, -policy.max_rotation_degrees, policy.max_rotation_degrees);
        if (fire) out = rotate(out, degrees);
        break;
      }
      case Transform::color_jitter: {
        const double b = uniform(stream, policy.jitter_min, policy.jitter_max);
        const double c = uniform(stream, policy.jitter_min, policy.jitter_max);
        const double s = uniform(stream, policy.jitter_min, policy.jitter_max);
        out = color_jitter(out, b, c, s);
        break;
      }
      case Transform::gaussian_blur: {
        const bool fire = bernoulli(stream, policy.blur_probability);
        const double sigma = uniform(stream, policy.blur_sigma_min, policy.blur_sigma_max);
        if (fire) out = gaussian_blur(out, sigma);
        break;
      }
    }
  }
  for (auto& c : out.channels) c = c.max(0.0f).min(1.0f);
  return out;
}

}  // namespace spyglass
