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

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spyglass/config.hpp"
#include "spyglass/eval.hpp"

namespace spyglass {

struct AblationSetting {
  std::string label;
  std::string slug;  // output subdirectory
  PathwayMask pathway = PathwayMask::joint;
  std::string augmentation = "none";
};

/// Spectral only, image only, image with augmentation, joint with augmentation.
std::vector<AblationSetting> embedding_study();

/// The joint model under each augmentation policy, "none" first.
std::vector<AblationSetting> augmentation_study();

struct AblationRow {
  AblationSetting setting;
  EvalReport report;
  double silhouette = 0;  // in-domain test embeddings
  TrainHistory history;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  /// Silhouette of the joint model's test embeddings before training.
  double untrained_silhouette = 0;

  const AblationRow* find(const std::string& label) const;
};

/**
 * Trains and evaluates one model per setting from the same seed and splits.
 * Each row's checkpoint, history and resolved config go under
 * `out_dir/<slug>/` when `out_dir` is non-empty.
 */
AblationResult run_ablation(const RunConfig& base, std::span<const ImageRecord> records,
                            std::span<const AblationSetting> settings, const std::filesystem::path& out_dir,
                            std::ostream* log = nullptr);

void print_ablation_table(std::ostream& out, const AblationResult& result);
std::string ablation_json(const AblationResult& result);

}  // namespace spyglass
