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
#include <string>
#include <string_view>
#include <vector>

#include "spyglass/generator.hpp"
#include "spyglass/model.hpp"
#include "spyglass/training.hpp"

namespace spyglass {

/// Everything a run needs: generator, model, training and paths.
struct RunConfig {
  GeneratorConfig generator{};
  ModelConfig model{};
  TrainConfig train{};
  std::string augmentation = "none";
  double threshold = 0.5;
  std::string manifest;
  std::string checkpoint;
  std::string out_dir;

  /// Resolves the augmentation name into train.augmentation and validates all sections.
  void finalize();
};

std::string_view pathway_name(PathwayMask mask);
PathwayMask pathway_from_name(std::string_view name);
std::string_view fusion_name(FusionMode mode);
FusionMode fusion_from_name(std::string_view name);

/// Every recognised key, in the order `format_run_config` writes them.
const std::vector<std::string>& run_config_keys();

/// Sets one key; unknown keys and unparsable values throw ConfigError.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Parses a `key = value` assignment, as used by --set.
void apply_assignment(RunConfig& config, std::string_view assignment);

/// Applies a config file on top of `config`. `#` starts a comment; blank lines are ignored.
void load_run_config(const std::filesystem::path& path, RunConfig& config);

/// Every key with its resolved value; reading it back yields the same config.
std::string format_run_config(const RunConfig& config);
void write_run_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace spyglass
