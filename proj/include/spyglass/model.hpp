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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spyglass/ops.hpp"
#include "spyglass/rng.hpp"
#include "spyglass/spectral.hpp"

namespace spyglass {

/// Small convolutional encoder: per stage conv -> relu [-> residual conv] -> maxpool(2),
/// then global average pooling and a dense projection to `embed_dim`.
struct EncoderConfig {
  Index input_channels = 3;
  std::vector<Index> stage_widths{16, 32, 64};
  Index kernel_size = 3;
  bool residual_skips = false;
  Index embed_dim = 64;

  void validate() const {
    if (input_channels != 1 && input_channels != 3) throw ConfigError("encoder input_channels must be 1 or 3");
    if (stage_widths.empty()) throw ConfigError("encoder needs at least one stage");
    for (Index w : stage_widths) {
      if (w < 1) throw ConfigError("encoder stage widths must be positive");
    }
    if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("encoder kernel_size must be odd");
    if (embed_dim < 1) throw ConfigError("encoder embed_dim must be at least 1");
  }
};

enum class FusionMode { add, concat };
enum class PathwayMask { image_only, spectral_only, joint };

struct ModelConfig {
  EncoderConfig image_encoder{};
  EncoderConfig spectral_encoder{.input_channels = 1};
  FusionMode fusion = FusionMode::add;
  PathwayMask pathway = PathwayMask::joint;
  Index input_side = 64;
  /// false freezes both encoders and trains only the head.
  bool train_encoders = true;

  bool uses_image() const { return pathway != PathwayMask::spectral_only; }
  bool uses_spectral() const { return pathway != PathwayMask::image_only; }

  Index joint_dim() const {
    switch (pathway) {
      case PathwayMask::image_only: return image_encoder.embed_dim;
      case PathwayMask::spectral_only: return spectral_encoder.embed_dim;
      case PathwayMask::joint: break;
    }
    return fusion == FusionMode::add ? image_encoder.embed_dim
                                     : image_encoder.embed_dim + spectral_encoder.embed_dim;
  }

  void validate() const {
    image_encoder.validate();
    spectral_encoder.validate();
    if (image_encoder.input_channels != 3) throw ConfigError("image encoder must take 3 channels");
    if (spectral_encoder.input_channels != 1) throw ConfigError("spectral encoder must take 1 channel");
    if (pathway == PathwayMask::joint && fusion == FusionMode::add &&
        image_encoder.embed_dim != spectral_encoder.embed_dim) {
      throw ConfigError("add fusion needs equal embed dims, got " + std::to_string(image_encoder.embed_dim) +
                        " and " + std::to_string(spectral_encoder.embed_dim));
    }
    if (input_side < 1) throw ConfigError("input_side must be positive");
    for (const EncoderConfig* enc : {&image_encoder, &spectral_encoder}) {
      const Index factor = Index{1} << enc->stage_widths.size();
      if (input_side % factor != 0) {
        throw ConfigError("input_side " + std::to_string(input_side) + " must be divisible by " +
                          std::to_string(factor) + " for " + std::to_string(enc->stage_widths.size()) +
                          " pooling stages");
      }
    }
  }
};

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar>* tensor;
};

namespace detail {

/// Kaiming-uniform fan-in initialisation: U(-sqrt(6/fan_in), sqrt(6/fan_in)).
template <typename Scalar>
Tensor<Scalar> kaiming_uniform(Shape shape, Index fan_in, Rng& rng) {
  Tensor<Scalar> t(std::move(shape));
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(dist(rng));
  return t;
}

}  // namespace detail

template <typename Scalar>
class Encoder {
 public:
  Encoder() = default;

  Encoder(std::string name, EncoderConfig config, Rng& rng) : name_(std::move(name)), config_(std::move(config)) {
    config_.validate();
    const Index k = config_.kernel_size;
    Index channels = config_.input_channels;
    for (Index width : config_.stage_widths) {
      Stage stage;
      stage.kernel = detail::kaiming_uniform<Scalar>({width, channels, k, k}, channels * k * k, rng);
      stage.bias = Tensor<Scalar>({width});
      if (config_.residual_skips) {
        stage.skip_kernel = detail::kaiming_uniform<Scalar>({width, width, k, k}, width * k * k, rng);
        stage.skip_bias = Tensor<Scalar>({width});
      }
      stages_.push_back(std::move(stage));
      channels = width;
    }
    embed_weight_ = detail::kaiming_uniform<Scalar>({channels, config_.embed_dim}, channels, rng);
    embed_bias_ = Tensor<Scalar>({config_.embed_dim});
  }

  const EncoderConfig& config() const { return config_; }
  const std::string& name() const { return name_; }

  /// [N, C, S, S] -> [N, embed_dim].
  Var<Scalar> operator()(Var<Scalar> input) {
    Tape<Scalar>& tape = *input.tape;
    if (input.shape().size() != 4 || input.dim(1) != config_.input_channels) {
      throw ShapeError(name_ + ": expected input [N," + std::to_string(config_.input_channels) +
                       ",S,S], got " + shape_string(input.shape()));
    }
    const Index pad = config_.kernel_size / 2;
    Var<Scalar> x = input;
    for (Stage& stage : stages_) {
      x = relu(conv2d(x, tape.leaf(stage.kernel), tape.leaf(stage.bias), 1, pad));
      if (config_.residual_skips) {
        x = add(x, relu(conv2d(x, tape.leaf(stage.skip_kernel), tape.leaf(stage.skip_bias), 1, pad)));
      }
      x = max_pool2d(x, 2);
    }
    x = global_avg_pool(x);
    return dense(x, tape.leaf(embed_weight_), tape.leaf(embed_bias_));
  }

  void collect(std::vector<NamedTensor<Scalar>>& out) {
    for (std::size_t i = 0; i < stages_.size(); ++i) {
      const std::string prefix = name_ + ".stage" + std::to_string(i);
      out.push_back({prefix + ".conv.weight", &stages_[i].kernel});
      out.push_back({prefix + ".conv.bias", &stages_[i].bias});
      if (config_.residual_skips) {
        out.push_back({prefix + ".skip.weight", &stages_[i].skip_kernel});
        out.push_back({prefix + ".skip.bias", &stages_[i].skip_bias});
      }
    }
    out.push_back({name_ + ".embed.weight", &embed_weight_});
    out.push_back({name_ + ".embed.bias", &embed_bias_});
  }

 private:
  struct Stage {
    Tensor<Scalar> kernel, bias;
    Tensor<Scalar> skip_kernel, skip_bias;
  };

  std::string name_;
  EncoderConfig config_;
  std::vector<Stage> stages_;
  Tensor<Scalar> embed_weight_, embed_bias_;
};

/**
 * Dual-pathway detector: image encoder and spectral encoder, fused into a
 * joint embedding and scored by a linear sigmoid head. Label 1 means real.
 */
template <typename Scalar>
class DetectorModel {
 public:
  DetectorModel() = default;

  DetectorModel(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng = derive_stream(seed, {stable_hash("detector-init")});
    image_encoder_ = Encoder<Scalar>("image_encoder", config_.image_encoder, rng);
    spectral_encoder_ = Encoder<Scalar>("spectral_encoder", config_.spectral_encoder, rng);
    const Index d = config_.joint_dim();
    head_weight_ = detail::kaiming_uniform<Scalar>({d, 1}, d, rng);
    head_bias_ = Tensor<Scalar>({1});
    for (const NamedTensor<Scalar>& p : parameters()) p.tensor->set_requires_grad(false);
    for (const NamedTensor<Scalar>& p : trainable_parameters()) p.tensor->set_requires_grad(true);
  }

  const ModelConfig& config() const { return config_; }
  Encoder<Scalar>& image_encoder() { return image_encoder_; }
  Encoder<Scalar>& spectral_encoder() { return spectral_encoder_; }
  Tensor<Scalar>& head_weight() { return head_weight_; }
  Tensor<Scalar>& head_bias() { return head_bias_; }

  /// Every parameter in a fixed order; names are stable checkpoint keys.
  std::vector<NamedTensor<Scalar>> parameters() {
    std::vector<NamedTensor<Scalar>> out;
    image_encoder_.collect(out);
    spectral_encoder_.collect(out);
    out.push_back({"head_weight", &head_weight_});
    out.push_back({"head_bias", &head_bias_});
    return out;
  }

  /// Parameters the optimiser updates: the head, plus the encoders on the active
  /// pathway(s) when encoders are trained end-to-end.
  std::vector<NamedTensor<Scalar>> trainable_parameters() {
    std::vector<NamedTensor<Scalar>> out;
    if (config_.train_encoders) {
      if (config_.uses_image()) image_encoder_.collect(out);
      if (config_.uses_spectral()) spectral_encoder_.collect(out);
    }
    out.push_back({"head_weight", &head_weight_});
    out.push_back({"head_bias", &head_bias_});
    return out;
  }

  Index parameter_count() {
    Index n = 0;
    for (const NamedTensor<Scalar>& p : parameters()) n += p.tensor->size();
    return n;
  }

  void zero_grad() {
    for (const NamedTensor<Scalar>& p : parameters()) p.tensor->zero_grad();
  }

  template <typename Other>
  DetectorModel<Other> cast() {
    DetectorModel<Other> out(config_, 0);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) {
      const bool flag = dst[i].tensor->requires_grad();
      *dst[i].tensor = src[i].tensor->template cast<Other>();
      dst[i].tensor->set_requires_grad(flag);
    }
    return out;
  }

 private:
  ModelConfig config_;
  Encoder<Scalar> image_encoder_;
  Encoder<Scalar> spectral_encoder_;
  Tensor<Scalar> head_weight_, head_bias_;
};

inline constexpr double kInputMean = 0.5;
inline constexpr double kInputStd = 0.5;

/// Normalised per-sample network inputs. Unused pathways are left empty.
template <typename Scalar>
struct SampleInputs {
  Vector<Scalar> image;     // 3 * S * S
  Vector<Scalar> spectrum;  // S * S
};

template <typename Scalar>
struct ModelInputs {
  Tensor<Scalar> images;   // [N, 3, S, S]
  Tensor<Scalar> spectra;  // [N, 1, S, S]
  Index batch_size = 0;
};

template <typename Scalar>
SampleInputs<Scalar> prepare_sample(const ModelConfig& config, const RgbImage<Scalar>& image) {
  const Index s = config.input_side;
  const Scalar mean = Scalar(kInputMean), inv_std = Scalar(1.0 / kInputStd);
  SampleInputs<Scalar> out;
  if (config.uses_image()) {
    const RgbImage<Scalar> resized = resize_bilinear(image, s, s);
    out.image.resize(3 * s * s);
    for (int c = 0; c < 3; ++c) {
      out.image.segment(c * s * s, s * s) =
          (Eigen::Map<const Vector<Scalar>>(resized.channels[c].data(), s * s) - mean) * inv_std;
    }
  }
  if (config.uses_spectral()) {
    out.spectrum = (spectral_input(image, s).data() - mean) * inv_std;
  }
  return out;
}

template <typename Scalar>
ModelInputs<Scalar> stack_samples(const ModelConfig& config, std::span<const SampleInputs<Scalar>* const> samples) {
  const Index n = static_cast<Index>(samples.size());
  const Index s = config.input_side;
  if (n == 0) throw ShapeError("cannot build an empty batch");
  ModelInputs<Scalar> out;
  out.batch_size = n;
  if (config.uses_image()) {
    out.images = Tensor<Scalar>({n, 3, s, s});
    for (Index i = 0; i < n; ++i) {
      if (samples[i]->image.size() != 3 * s * s) throw ShapeError("sample image input has the wrong size");
      out.images.data().segment(i * 3 * s * s, 3 * s * s) = samples[i]->image;
    }
  }
  if (config.uses_spectral()) {
    out.spectra = Tensor<Scalar>({n, 1, s, s});
    for (Index i = 0; i < n; ++i) {
      if (samples[i]->spectrum.size() != s * s) throw ShapeError("sample spectrum input has the wrong size");
      out.spectra.data().segment(i * s * s, s * s) = samples[i]->spectrum;
    }
  }
  return out;
}

template <typename Scalar>
ModelInputs<Scalar> prepare_inputs(const ModelConfig& config, std::span<const RgbImage<Scalar>> images) {
  std::vector<SampleInputs<Scalar>> prepared;
  prepared.reserve(images.size());
  for (const RgbImage<Scalar>& img : images) prepared.push_back(prepare_sample(config, img));
  std::vector<const SampleInputs<Scalar>*> ptrs;
  for (const auto& p : prepared) ptrs.push_back(&p);
  return stack_samples<Scalar>(config, ptrs);
}

template <typename Scalar>
Var<Scalar> encode_image(DetectorModel<Scalar>& model, Var<Scalar> batch) {
  const Index s = model.config().input_side;
  if (batch.shape().size() != 4 || batch.dim(1) != 3 || batch.dim(2) != s || batch.dim(3) != s) {
    throw ShapeError("encode_image: expected [N,3," + std::to_string(s) + "," + std::to_string(s) + "], got " +
                     shape_string(batch.shape()));
  }
  return model.image_encoder()(batch);
}

template <typename Scalar>
Var<Scalar> encode_spectral(DetectorModel<Scalar>& model, Var<Scalar> batch) {
  const Index s = model.config().input_side;
  if (batch.shape().size() != 4 || batch.dim(1) != 1 || batch.dim(2) != s || batch.dim(3) != s) {
    throw ShapeError("encode_spectral: expected [N,1," + std::to_string(s) + "," + std::to_string(s) + "], got " +
                     shape_string(batch.shape()));
  }
  return model.spectral_encoder()(batch);
}

/// add: element-wise sum; concat: [image | spectral].
template <typename Scalar>
Var<Scalar> fuse(Var<Scalar> f_image, Var<Scalar> f_spectral, FusionMode mode) {
  if (mode == FusionMode::add) {
    if (f_image.shape() != f_spectral.shape()) {
      throw ShapeError("fuse(add): image features " + shape_string(f_image.shape()) + " and spectral features " +
                       shape_string(f_spectral.shape()) + " differ");
    }
    return add(f_image, f_spectral);
  }
  return concat_columns(f_image, f_spectral);
}

/// sigmoid(f_joint * W + b), flattened to [N].
template <typename Scalar>
Var<Scalar> predict(DetectorModel<Scalar>& model, Var<Scalar> f_joint) {
  Tape<Scalar>& tape = *f_joint.tape;
  if (f_joint.shape().size() != 2 || f_joint.dim(1) != model.head_weight().dim(0)) {
    throw ShapeError("predict: joint embedding " + shape_string(f_joint.shape()) + " does not match head_weight " +
                     shape_string(model.head_weight().shape()));
  }
  Var<Scalar> logits = dense(f_joint, tape.leaf(model.head_weight()), tape.leaf(model.head_bias()));
  return reshape(sigmoid(logits), {f_joint.dim(0)});
}

template <typename Scalar>
struct ForwardVars {
  Var<Scalar> probabilities;  // [N]
  Var<Scalar> embeddings;     // [N, D_joint]
};

template <typename Scalar>
ForwardVars<Scalar> forward(DetectorModel<Scalar>& model, Tape<Scalar>& tape, const ModelInputs<Scalar>& inputs) {
  const ModelConfig& config = model.config();
  Var<Scalar> joint;
  switch (config.pathway) {
    case PathwayMask::image_only:
      joint = encode_image(model, tape.constant(inputs.images));
      break;
    case PathwayMask::spectral_only:
      joint = encode_spectral(model, tape.constant(inputs.spectra));
      break;
    case PathwayMask::joint:
      joint = fuse(encode_image(model, tape.constant(inputs.images)),
                   encode_spectral(model, tape.constant(inputs.spectra)), config.fusion);
      break;
  }
  return {predict(model, joint), joint};
}

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> probabilities;
  Tensor<Scalar> embeddings;
};

/// Inference on already prepared inputs.
template <typename Scalar>
ForwardResult<Scalar> forward(DetectorModel<Scalar>& model, const ModelInputs<Scalar>& inputs) {
  Tape<Scalar> tape(false);
  const ForwardVars<Scalar> vars = forward(model, tape, inputs);
  return {vars.probabilities.value(), vars.embeddings.value()};
}

template <typename Scalar>
ForwardResult<Scalar> forward(DetectorModel<Scalar>& model, std::span<const RgbImage<Scalar>> images) {
  return forward(model, prepare_inputs(model.config(), images));
}

}  // namespace spyglass
