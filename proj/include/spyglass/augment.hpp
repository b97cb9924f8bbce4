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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "spyglass/image.hpp"
#include "spyglass/rng.hpp"

namespace spyglass {

enum class Transform { horizontal_flip, vertical_flip, random_rotation, color_jitter, gaussian_blur };

std::string_view transform_name(Transform t);

/// Ordered transform list plus the parameter ranges each transform samples from.
struct AugmentPolicy {
  std::vector<Transform> transforms;
  double flip_probability = 0.5;
  double rotation_probability = 0.5;
  double max_rotation_degrees = 15.0;
  double jitter_min = 0.8;
  double jitter_max = 1.2;
  double blur_probability = 0.3;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 1.5;

  bool empty() const { return transforms.empty(); }
  void validate() const;
};

inline constexpr std::string_view kPolicyNames[] = {"none", "hflip", "vflip", "rotation", "jitter", "blur",
                                                    "combined"};

/// One of none, hflip, vflip, rotation, jitter, blur, combined.
AugmentPolicy policy_from_name(std::string_view name);

/// Stream for one sample in one epoch.
inline Rng augment_stream(std::uint64_t seed, std::uint64_t epoch, std::uint64_t sample_index) {
  return derive_stream(seed, {stable_hash("augment"), epoch, sample_index});
}

/// Applies the policy's transforms in order; output keeps the input size and stays in [0,1].
Image augment(const Image& image, const AugmentPolicy& policy, Rng& stream);

Image flip_horizontal(const Image& image);
Image flip_vertical(const Image& image);
/// Bilinear rotation about the image centre; samples outside the raster replicate the edge.
Image rotate(const Image& image, double degrees);
/// Brightness, then contrast about the mean luminance, then saturation about per-pixel luminance.
Image color_jitter(const Image& image, double brightness, double contrast, double saturation);
/// Separable Gaussian blur (radius ceil(3 sigma)) with edge replication.
Image gaussian_blur(const Image& image, double sigma);

}  // namespace spyglass
