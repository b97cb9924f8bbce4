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

#include "spyglass/training.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace spyglass {

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out << "epoch,train_loss,val_loss,val_acc\n" << std::setprecision(9);
  for (const EpochRecord& e : history.epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.val_loss << ',' << e.val_accuracy << '\n';
  }
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

ValidationResult validate_model(DetectorModel<float>& model, std::span<const SampleInputs<float>> inputs,
                                std::span<const int> labels, Index batch_size) {
  if (inputs.empty()) throw ConfigError("validation set is empty");
  const double lo = kProbabilityClamp, hi = 1.0 - kProbabilityClamp;
  double loss = 0;
  Index correct = 0;
  const Index n = static_cast<Index>(inputs.size());
  for (Index start = 0; start < n; start += batch_size) {
    const Index end = std::min(n, start + batch_size);
    std::vector<const SampleInputs<float>*> batch;
    for (Index i = start; i < end; ++i) batch.push_back(&inputs[static_cast<std::size_t>(i)]);
    const ForwardResult<float> out = forward(model, stack_samples<float>(model.config(), batch));
    for (Index i = start; i < end; ++i) {
      const double p = std::clamp(static_cast<double>(out.probabilities[i - start]), lo, hi);
      const int y = labels[static_cast<std::size_t>(i)];
      loss -= y == kRealLabel ? std::log(p) : std::log(1.0 - p);
      correct += (p >= 0.5 ? kRealLabel : kFakeLabel) == y;
    }
  }
  return {loss / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)};
}

TrainResult train(DetectorModel<float>& model, std::span<const LabeledImage> train_set,
                  std::span<const LabeledImage> val_set, const TrainConfig& config, Validator validator) {
  config.validate();
  if (train_set.empty()) throw ConfigError("training split is empty");
  if (val_set.empty() && !validator) throw ConfigError("validation split is empty");
  const ModelConfig& model_config = model.config();

  // Un-augmented inputs are fixed for the whole run.
  std::vector<SampleInputs<float>> train_cache;
  if (config.augmentation.empty()) {
    train_cache.reserve(train_set.size());
    for (const LabeledImage& s : train_set) train_cache.push_back(prepare_sample(model_config, s.image));
  }
  std::vector<SampleInputs<float>> val_inputs;
  std::vector<int> val_labels;
  for (const LabeledImage& s : val_set) {
    val_inputs.push_back(prepare_sample(model_config, s.image));
    val_labels.push_back(s.label);
  }
  if (!validator) {
    validator = [&](DetectorModel<float>& m, int) {
      return validate_model(m, val_inputs, val_labels, std::max<Index>(config.batch_size, 64));
    };
  }

  const auto params = model.trainable_parameters();
  for (const NamedTensor<float>& p : params) p.tensor->clear_grad();
  AdamState<float> state;
  TrainResult result{model, state, {}};
  double best_loss = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  const Index n = static_cast<Index>(train_set.size());
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = derive_stream(config.seed, {stable_hash("shuffle"), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0;
    for (Index start = 0; start < n; start += config.batch_size) {
      const Index end = std::min(n, start + config.batch_size);
      std::vector<SampleInputs<float>> augmented;
      std::vector<const SampleInputs<float>*> batch;
      Tensor<float> labels({end - start});
      augmented.reserve(static_cast<std::size_t>(end - start));
      for (Index i = start; i < end; ++i) {
        const std::size_t idx = order[static_cast<std::size_t>(i)];
        labels[i - start] = static_cast<float>(train_set[idx].label);
        if (config.augmentation.empty()) {
          batch.push_back(&train_cache[idx]);
        } else {
          Rng stream = augment_stream(config.seed, static_cast<std::uint64_t>(epoch), idx);
          augmented.push_back(prepare_sample(model_config, augment(train_set[idx].image, config.augmentation, stream)));
          batch.push_back(&augmented.back());
        }
      }
      Tape<float> tape;
      const ForwardVars<float> out = forward(model, tape, stack_samples<float>(model_config, batch));
      const Var<float> loss = bce_loss(out.probabilities, labels);
      const float loss_value = loss.value().item();
      if (!std::isfinite(loss_value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(start / config.batch_size + 1));
      }
      tape.backward(loss);
      adam_step<float>(params, state, config.adam);
      for (const NamedTensor<float>& p : params) p.tensor->zero_grad();
      loss_sum += static_cast<double>(loss_value) * static_cast<double>(end - start);
    }

    const ValidationResult val = validator(model, epoch);
    const EpochRecord record{epoch, loss_sum / static_cast<double>(n), val.loss, val.accuracy};
    result.history.epochs.push_back(record);
    result.history.stopped_epoch = epoch;
    if (config.log) {
      *config.log << "epoch " << epoch << "  train_loss " << record.train_loss << "  val_loss " << record.val_loss
                  << "  val_acc " << record.val_accuracy << std::endl;
    }
    if (!std::isfinite(val.loss)) throw NumericalError("non-finite validation loss at epoch " + std::to_string(epoch));
    if (val.loss < best_loss) {
      best_loss = val.loss;
      since_best = 0;
      result.history.best_epoch = epoch;
      result.best_model = model;
      result.best_state = state;
    } else if (++since_best >= config.early_stop_patience) {
      break;
    }
  }
  for (const NamedTensor<float>& p : params) p.tensor->clear_grad();
  model = result.best_model;
  for (const NamedTensor<float>& p : result.best_model.parameters()) p.tensor->clear_grad();
  return result;
}

}  // namespace spyglass
