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

#include "spyglass/model.hpp"
#include "spyglass/training.hpp"

namespace spyglass {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'Y', 'G', 'L', 'S', '0', '1'};

/**
 * Binary little-endian checkpoint: 8-byte magic "SPYGLS01", then for every
 * tensor (u32 name length, name bytes, u32 rank, u64 dims, f32 data
 * row-major), then a CRC32 of all preceding bytes.
 *
 * Model parameters are stored under their parameter names; optimiser state,
 * when given, under "adam.step", "adam.m.<name>" and "adam.v.<name>".
 */
void save_checkpoint(const std::filesystem::path& path, DetectorModel<float>& model,
                     const AdamState<float>* state = nullptr);

/// Loads into an already configured model. Fails on bad magic, CRC mismatch,
/// truncation, unknown or missing tensors, and shape mismatches (naming the tensor).
void load_checkpoint(const std::filesystem::path& path, DetectorModel<float>& model,
                     AdamState<float>* state = nullptr);

}  // namespace spyglass
