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

#include <stdexcept>
#include <string>

namespace spyglass {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or dimensions that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated, or malformed files and manifests.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf in a loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace spyglass
