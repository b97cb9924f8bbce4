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

#include <doctest.h>

#include <cmath>

#include "spyglass/model.hpp"

using namespace spyglass;

namespace {

ModelConfig small_config(PathwayMask pathway = PathwayMask::joint, FusionMode fusion = FusionMode::add) {
  ModelConfig c;
  c.image_encoder.stage_widths = {4, 6};
  c.spectral_encoder.stage_widths = {3, 5};
  c.image_encoder.embed_dim = 7;
  c.spectral_encoder.embed_dim = 7;
  c.input_side = 16;
  c.pathway = pathway;
  c.fusion = fusion;
  return c;
}

std::vector<RgbImage<double>> random_images(Index n, Index side, Rng& rng) {
  std::vector<RgbImage<double>> out;
  for (Index i = 0; i < n; ++i) {
    RgbImage<double> img(side, side);
    for (auto& c : img.channels)
      for (Index k = 0; k < c.size(); ++k) c.data()[k] = uniform(rng, 0, 1);
    out.push_back(img);
  }
  return out;
}

template <typename S>
void zero_all(DetectorModel<S>& m) {
  for (auto& p : m.parameters()) p.tensor->data().setZero();
}

Tensor<double> row(const Tensor<double>& t, Index r) {
  const Index d = t.dim(1);
  return Tensor<double>({d}, t.data().segment(r * d, d));
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.spectral_encoder.embed_dim = 5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.fusion = FusionMode::concat;
  CHECK_NOTHROW(c.validate());
  c = small_config();
  c.input_side = 18;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.image_encoder.kernel_size = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.image_encoder.stage_widths.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("default encoder size") {
  DetectorModel<float> m(ModelConfig{}, 0);
  // Two encoders of {16,32,64} 3x3 stages plus 64-d embeddings and the head.
  CHECK(m.parameter_count() == 2 * (16 * 3 * 9 + 16 + 32 * 16 * 9 + 32 + 64 * 32 * 9 + 64 + 64 * 64 + 64) -
                                   16 * 2 * 9 + 64 + 1);
}

TEST_CASE("image encoder contract") {
  Rng rng(1);
  DetectorModel<double> m(small_config(), 3);
  const auto images = random_images(3, 16, rng);
  const ModelInputs<double> in = prepare_inputs(m.config(), std::span<const RgbImage<double>>(images));
  Tape<double> tape;
  Var<double> f = encode_image(m, tape.constant(in.images));
  CHECK(f.shape() == Shape{3, 7});

  // Swapping samples swaps rows.
  std::vector<RgbImage<double>> swapped{images[2], images[0], images[1]};
  Tape<double> tape2;
  Var<double> g = encode_image(
      m, tape2.constant(prepare_inputs(m.config(), std::span<const RgbImage<double>>(swapped)).images));
  CHECK((row(g.value(), 0).data() == row(f.value(), 2).data()).all());
  CHECK((row(g.value(), 1).data() == row(f.value(), 0).data()).all());

  zero_all(m);
  Tape<double> tape3;
  CHECK((encode_image(m, tape3.constant(in.images)).value().data() == 0.0).all());
  CHECK_THROWS_AS(encode_image(m, tape3.constant(in.spectra)), ShapeError);
}

TEST_CASE("spectral encoder contract") {
  DetectorModel<double> m(small_config(), 4);
  Tensor<double> spectra = Tensor<double>::filled({4, 1, 16, 16}, 0.3);
  Tape<double> tape;
  Var<double> f = encode_spectral(m, tape.constant(spectra));
  CHECK(f.shape() == Shape{4, 7});
  for (Index r = 1; r < 4; ++r) CHECK((row(f.value(), r).data() == row(f.value(), 0).data()).all());
  zero_all(m);
  Tape<double> tape2;
  CHECK((encode_spectral(m, tape2.constant(Tensor<double>({2, 1, 16, 16}))).value().data() == 0.0).all());
}

TEST_CASE("fusion") {
  Tape<double> tape;
  auto a = tape.constant(Tensor<double>({1, 2}, Vector<double>{{1, 2}}));
  auto b = tape.constant(Tensor<double>({1, 2}, Vector<double>{{3, 4}}));
  const Tensor<double> s = fuse(a, b, FusionMode::add).value();
  CHECK(s[0] == 4);
  CHECK(s[1] == 6);
  CHECK((fuse(a, tape.constant(Tensor<double>({1, 2})), FusionMode::add).value().data() == a.value().data()).all());

  Rng rng(2);
  Tensor<double> x({3, 5}), y({3, 7});
  for (Index i = 0; i < x.size(); ++i) x[i] = uniform(rng, -1, 1);
  for (Index i = 0; i < y.size(); ++i) y[i] = uniform(rng, -1, 1);
  const Tensor<double> c = fuse(tape.constant(x), tape.constant(y), FusionMode::concat).value();
  REQUIRE(c.shape() == Shape{3, 12});
  for (Index r = 0; r < 3; ++r)
    for (Index k = 0; k < 5; ++k) CHECK(c[r * 12 + k] == x[r * 5 + k]);
  CHECK_THROWS_AS(fuse(tape.constant(x), tape.constant(y), FusionMode::add), ShapeError);
}

TEST_CASE("fusion shape law") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig c = small_config();
    c.fusion = bernoulli(rng, 0.5) ? FusionMode::add : FusionMode::concat;
    c.image_encoder.embed_dim = 1 + Index(rng() % 6);
    c.spectral_encoder.embed_dim = c.fusion == FusionMode::add ? c.image_encoder.embed_dim : 1 + Index(rng() % 6);
    DetectorModel<float> m(c, trial);
    const auto images = random_images(2, 16, rng);
    std::vector<RgbImage<float>> imgs;
    for (const auto& img : images) {
      RgbImage<float> f;
      for (int k = 0; k < 3; ++k) f.channels[k] = img.channels[k].cast<float>();
      imgs.push_back(f);
    }
    const ForwardResult<float> out = forward(m, std::span<const RgbImage<float>>(imgs));
    const Index expected = c.fusion == FusionMode::add ? c.image_encoder.embed_dim
                                                       : c.image_encoder.embed_dim + c.spectral_encoder.embed_dim;
    CHECK(out.embeddings.shape() == Shape{2, expected});
    CHECK(m.head_weight().shape() == Shape{expected, 1});
  }
}

TEST_CASE("prediction head") {
  ModelConfig c = small_config(PathwayMask::image_only);
  c.image_encoder.embed_dim = 1;
  DetectorModel<double> m(c, 5);
  Tape<double> tape;
  auto f = tape.constant(Tensor<double>({3, 1}, Vector<double>{{-2.0, 0.3, 1.7}}));
  m.head_weight().data().setZero();
  CHECK((predict(m, f).value().data() == 0.5).all());

  m.head_bias()[0] = 10;
  const double high = predict(m, f).value()[0];
  m.head_bias()[0] = 0;
  CHECK(high > predict(m, f).value()[0]);

  m.head_weight()[0] = 0.8;
  m.head_bias()[0] = -0.25;
  const Tensor<double> p = predict(m, f).value();
  for (Index i = 0; i < 3; ++i) {
    const double x = f.value()[i];
    CHECK(std::abs(p[i] - 1.0 / (1.0 + std::exp(-(0.8 * x - 0.25)))) < 1e-9);
  }
  CHECK_THROWS_AS(predict(m, tape.constant(Tensor<double>({3, 2}))), ShapeError);
}

TEST_CASE("masked pathways ignore the other encoder") {
  Rng rng(6);
  const auto images = random_images(3, 16, rng);
  for (PathwayMask mask : {PathwayMask::image_only, PathwayMask::spectral_only}) {
    DetectorModel<double> m(small_config(mask), 7);
    const ForwardResult<double> before = forward(m, std::span<const RgbImage<double>>(images));
    std::vector<NamedTensor<double>> unused;
    (mask == PathwayMask::image_only ? m.spectral_encoder() : m.image_encoder()).collect(unused);
    for (auto& p : unused) p.tensor->data() += 0.5;
    const ForwardResult<double> after = forward(m, std::span<const RgbImage<double>>(images));
    CHECK((before.probabilities.data() == after.probabilities.data()).all());
    CHECK((before.embeddings.data() == after.embeddings.data()).all());
  }
}

TEST_CASE("joint forward composes encoders, fusion and head") {
  Rng rng(8);
  DetectorModel<double> m(small_config(), 9);
  const auto images = random_images(2, 16, rng);
  const ModelInputs<double> in = prepare_inputs(m.config(), std::span<const RgbImage<double>>(images));
  const ForwardResult<double> out = forward(m, in);
  Tape<double> tape;
  const Tensor<double> manual = predict(m, fuse(encode_image(m, tape.constant(in.images)),
                                                encode_spectral(m, tape.constant(in.spectra)), FusionMode::add))
                                    .value();
  CHECK((manual.data() == out.probabilities.data()).all());
  CHECK((out.probabilities.data() > 0).all());
  CHECK((out.probabilities.data() < 1).all());
}

TEST_CASE("duplicated images give identical probabilities") {
  Rng rng(10);
  DetectorModel<double> m(small_config(), 11);
  const auto one = random_images(1, 16, rng);
  const std::vector<RgbImage<double>> batch(4, one[0]);
  const ForwardResult<double> out = forward(m, std::span<const RgbImage<double>>(batch));
  for (Index i = 1; i < 4; ++i) CHECK(out.probabilities[i] == out.probabilities[0]);
}

TEST_CASE("gradients reach both encoders in the joint model") {
  Rng rng(12);
  DetectorModel<double> m(small_config(), 13);
  const auto images = random_images(4, 16, rng);
  const ModelInputs<double> in = prepare_inputs(m.config(), std::span<const RgbImage<double>>(images));
  Tape<double> tape;
  const ForwardVars<double> out = forward(m, tape, in);
  tape.backward(bce_loss(out.probabilities, Tensor<double>({4}, Vector<double>{{1, 0, 1, 0}})));
  for (Encoder<double>* enc : {&m.image_encoder(), &m.spectral_encoder()}) {
    std::vector<NamedTensor<double>> params;
    enc->collect(params);
    double largest = 0;
    for (auto& p : params) largest = std::max(largest, p.tensor->grad().abs().maxCoeff());
    CHECK(largest > 0);
  }
}

TEST_CASE("frozen encoders leave only the head trainable") {
  ModelConfig c = small_config();
  c.train_encoders = false;
  DetectorModel<float> m(c, 1);
  const auto trainable = m.trainable_parameters();
  REQUIRE(trainable.size() == 2);
  CHECK(trainable[0].name == "head_weight");
  CHECK(trainable[1].name == "head_bias");
  c.train_encoders = true;
  c.pathway = PathwayMask::image_only;
  DetectorModel<float> image_only(c, 1);
  for (const auto& p : image_only.trainable_parameters()) CHECK(p.name.rfind("spectral_encoder", 0) != 0);
}

TEST_CASE("initialisation is seeded") {
  DetectorModel<float> a(small_config(), 5), b(small_config(), 5), c(small_config(), 6);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK((pa[i].tensor->data() == pb[i].tensor->data()).all());
    any_diff = any_diff || !(pa[i].tensor->data() == pc[i].tensor->data()).all();
  }
  CHECK(any_diff);
  CHECK((a.head_bias().data() == 0.0f).all());
}

}  // TEST_SUITE
