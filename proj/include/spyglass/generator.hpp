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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spyglass/data.hpp"
#include "spyglass/image.hpp"
#include "spyglass/rng.hpp"

namespace spyglass {

/// Generator artefacts imprinted on the "fake" class.
enum class ArtifactFamily { checkerboard, spectral_notch, resample_grid };

std::string_view family_name(ArtifactFamily family);
ArtifactFamily family_from_name(std::string_view name);
/// A, B, C in declaration order.
char family_letter(ArtifactFamily family);
/// "astro_synth_A" style tag for the training family.
std::string in_domain_tag(ArtifactFamily family);
/// "ood_B" style tag for held-out families.
std::string ood_domain_tag(ArtifactFamily family);

struct GeneratorConfig {
  Index count_per_class = 100;
  Index side = 64;
  double alpha_min = 1.5;
  double alpha_max = 2.5;
  Index blob_count_min = 2;
  Index blob_count_max = 8;
  ArtifactFamily artifact_family = ArtifactFamily::checkerboard;
  double artifact_amplitude_min = 0.02;
  double artifact_amplitude_max = 0.06;
  std::uint64_t seed = 0;
  /// Held-out families, written as test-only records under ood_domain_tag().
  std::vector<ArtifactFamily> ood_families;
  Index ood_count_per_class = 0;
  SplitRatios split{};

  void validate() const;
};

struct SyntheticSample {
  Plane<double> base;       // luminance before any artefact, in [0,1]
  Plane<double> luminance;  // after the artefact (equal to base for real images)
  Image image;              // tinted RGB
};

/// Zero-mean, unit-variance Gaussian random field with amplitude spectrum ~ f^(-alpha/2).
Plane<double> gaussian_random_field(Index side, double alpha, Rng& rng);

/// Imprints one artefact on a [0,1] luminance map; output stays in [0,1].
Plane<double> imprint_artifact(const Plane<double>& base, ArtifactFamily family, const GeneratorConfig& config,
                               Rng& rng);

/// One image, fully determined by (config.seed, domain, label, index).
SyntheticSample synthesize(const GeneratorConfig& config, ArtifactFamily family, std::string_view domain, int label,
                           Index index);

/// Writes PNGs and manifest.jsonl under `out_dir`; returns the records in manifest order.
std::vector<ImageRecord> generate_synthetic(const GeneratorConfig& config, const std::filesystem::path& out_dir);

}  // namespace spyglass
