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
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spyglass/image.hpp"

namespace spyglass {

/// Label convention used everywhere: 1 = real, 0 = fake.
inline constexpr int kRealLabel = 1;
inline constexpr int kFakeLabel = 0;

enum class Split { train, val, test };

std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

struct ImageRecord {
  std::filesystem::path path;
  int label = kFakeLabel;
  std::string domain;
  Split split = Split::train;
};

/// A decoded record, ready for augmentation and batching.
struct LabeledImage {
  Image image;
  int label = kFakeLabel;
  std::string domain;
  std::string path;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/**
 * Stratified split by (label, domain). Each stratum is shuffled with a
 * stream derived from `seed` and the stratum key, then sliced contiguously
 * into train / val / test. Val and test take floor(n * ratio); the
 * remainder goes to train. Strata with fewer than 3 records go entirely to
 * train and a warning is written to `warnings` (if non-null).
 */
std::vector<ImageRecord> split_dataset(std::vector<ImageRecord> records, const SplitRatios& ratios,
                                       std::uint64_t seed, std::ostream* warnings);

/// JSON-lines manifest, keys exactly {path, label, domain, split}. Relative
/// paths are resolved against the manifest's directory.
std::vector<ImageRecord> load_manifest(const std::filesystem::path& path);

/// Writes records with paths made relative to the manifest's directory where possible.
void write_manifest(const std::filesystem::path& path, std::span<const ImageRecord> records);

std::vector<ImageRecord> filter_split(std::span<const ImageRecord> records, Split split);

/// Domains tagged "ood..." are out-of-domain; everything else is in-domain.
inline bool is_ood_domain(std::string_view domain) { return domain.starts_with("ood"); }

LabeledImage load_record(const ImageRecord& record);
std::vector<LabeledImage> load_records(std::span<const ImageRecord> records);

}  // namespace spyglass
