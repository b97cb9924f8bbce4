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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spyglass/augment.hpp"
#include "spyglass/data.hpp"
#include "spyglass/model.hpp"

namespace spyglass {

struct AdamConfig {
  double learning_rate = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("adam_beta1 must lie in [0,1)");
    if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("adam_beta2 must lie in [0,1)");
    if (!(eps > 0)) throw ConfigError("adam_eps must be positive");
  }
};

/// First and second moments per parameter, in parameter order.
template <typename Scalar>
struct AdamState {
  std::vector<Vector<Scalar>> m;
  std::vector<Vector<Scalar>> v;
  std::int64_t step = 0;
};

/**
 * One Adam update of every tensor in `params` from its grad buffer (an
 * absent buffer counts as zero):
 *
 *   m <- b1 m + (1-b1) g,   v <- b2 v + (1-b2) g^2
 *   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
 *
 * Throws NumericalError naming the parameter if a gradient is not finite;
 * in that case nothing is updated.
 */
template <typename Scalar>
void adam_step(std::span<const NamedTensor<Scalar>> params, AdamState<Scalar>& state, const AdamConfig& config) {
  if (state.m.empty() && state.step == 0) {
    for (const NamedTensor<Scalar>& p : params) {
      state.m.push_back(Vector<Scalar>::Zero(p.tensor->size()));
      state.v.push_back(Vector<Scalar>::Zero(p.tensor->size()));
    }
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.m.size()) + " tensors but " +
                     std::to_string(params.size()) + " parameters were given");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor<Scalar>& p = *params[i].tensor;
    if (state.m[i].size() != p.size() || state.v[i].size() != p.size()) {
      throw ShapeError("adam state for '" + params[i].name + "' does not match the parameter size");
    }
    if (p.has_grad() && !p.grad().allFinite()) {
      throw NumericalError("non-finite gradient in parameter '" + params[i].name + "'");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const Scalar b1 = Scalar(config.beta1), b2 = Scalar(config.beta2);
  const Scalar correction1 = Scalar(1.0 - std::pow(config.beta1, t));
  const Scalar correction2 = Scalar(1.0 - std::pow(config.beta2, t));
  const Scalar lr = Scalar(config.learning_rate), eps = Scalar(config.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<Scalar>& p = *params[i].tensor;
    Vector<Scalar>& m = state.m[i];
    Vector<Scalar>& v = state.v[i];
    if (p.has_grad()) {
      const Vector<Scalar>& g = p.grad();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
    } else {
      m *= b1;
      v *= b2;
    }
    p.data() -= lr * (m / correction1) / ((v / correction2).sqrt() + eps);
  }
}

struct TrainConfig {
  Index batch_size = 32;
  AdamConfig adam{};
  int max_epochs = 25;
  int early_stop_patience = 5;
  std::uint64_t seed = 0;
  AugmentPolicy augmentation{};
  /// Per-epoch progress lines go here when set.
  std::ostream* log = nullptr;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
    if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
    if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be at least 1");
    adam.validate();
    augmentation.validate();
  }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  int stopped_epoch = 0;
};

/// Header `epoch,train_loss,val_loss,val_acc`, one row per epoch.
void write_history_csv(const std::filesystem::path& path, const TrainHistory& history);

struct ValidationResult {
  double loss = 0;
  double accuracy = 0;
};

/// Replaceable validation hook; the default evaluates BCE and accuracy on the val split.
using Validator = std::function<ValidationResult(DetectorModel<float>& model, int epoch)>;

struct TrainResult {
  DetectorModel<float> best_model;
  AdamState<float> best_state;
  TrainHistory history;
};

/**
 * Minibatch training with seeded shuffling, train-only augmentation and
 * early stopping on validation loss. `model` is left holding the parameters
 * of the best epoch. Throws NumericalError on a non-finite loss.
 */
TrainResult train(DetectorModel<float>& model, std::span<const LabeledImage> train_set,
                  std::span<const LabeledImage> val_set, const TrainConfig& config, Validator validator = {});

/// BCE and accuracy (threshold 0.5) of the model on a labelled set.
ValidationResult validate_model(DetectorModel<float>& model, std::span<const SampleInputs<float>> inputs,
                                std::span<const int> labels, Index batch_size);

}  // namespace spyglass
