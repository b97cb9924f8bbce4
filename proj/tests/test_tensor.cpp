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

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "spyglass/ops.hpp"

using namespace spyglass;

namespace {

std::vector<double> as_vector(const Tensor<double>& t) { return {t.raw(), t.raw() + t.size()}; }

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("tensor shape and data must agree") {
  CHECK_THROWS_AS(Tensor<float>({2, 3}, Vector<float>::Zero(5)), ShapeError);
  CHECK_THROWS_AS(Tensor<float>({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor<float>(Shape{}), ShapeError);
  Tensor<float> t({2, 3});
  CHECK(t.size() == 6);
  CHECK_FALSE(t.has_grad());
  CHECK(t.grad().size() == 6);
  CHECK(t.has_grad());
  CHECK(t.all_finite());
  t[4] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(t.all_finite());
}

TEST_CASE("conv2d with a unit 1x1 kernel is the identity") {
  Rng rng(1);
  Tape<double> tape;
  Tensor<double> x = gradcheck::random_tensor({1, 1, 3, 3}, rng);
  Var<double> y = conv2d(tape.constant(x), tape.constant(Tensor<double>::filled({1, 1, 1, 1}, 1.0)),
                         tape.constant(Tensor<double>({1})));
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  CHECK((y.value().data() == x.data()).all());
}

TEST_CASE("conv2d of a constant with a ones kernel sums the window") {
  Tape<double> tape;
  Var<double> y = conv2d(tape.constant(Tensor<double>::filled({1, 1, 5, 5}, 0.7)),
                         tape.constant(Tensor<double>::filled({1, 1, 3, 3}, 1.0)), tape.constant(Tensor<double>({1})));
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  for (Index i = 0; i < y.value().size(); ++i) CHECK(y.value()[i] == doctest::Approx(6.3).epsilon(1e-12));
}

TEST_CASE("conv2d matches the direct loop oracle") {
  Rng rng(2);
  for (auto [stride, pad] : {std::pair<Index, Index>{1, 0}, {1, 1}, {2, 1}, {2, 0}}) {
    Tensor<double> x = gradcheck::random_tensor({2, 3, 8, 8}, rng);
    Tensor<double> k = gradcheck::random_tensor({4, 3, 3, 3}, rng);
    Tensor<double> b = gradcheck::random_tensor({4}, rng);
    Tape<double> tape;
    Var<double> y = conv2d(tape.constant(x), tape.constant(k), tape.constant(b), stride, pad);
    int oh = 0, ow = 0;
    const std::vector<double> expected =
        oracle::conv2d(as_vector(x), 2, 3, 8, 8, as_vector(k), 4, 3, 3, as_vector(b), int(stride), int(pad), oh, ow);
    REQUIRE(y.shape() == Shape{2, 4, oh, ow});
    for (Index i = 0; i < y.value().size(); ++i) {
      CHECK(std::abs(y.value()[i] - expected[std::size_t(i)]) <= 1e-6 * std::max(1.0, std::abs(expected[std::size_t(i)])));
    }
  }
}

TEST_CASE("conv2d output shape follows the size formula") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Index kh = gradcheck::pick(rng, 1, 4), kw = gradcheck::pick(rng, 1, 4);
    const Index pad = gradcheck::pick(rng, 0, 2), stride = gradcheck::pick(rng, 1, 3);
    const Index h = gradcheck::pick(rng, std::max<Index>(1, kh - 2 * pad), 9);
    const Index w = gradcheck::pick(rng, std::max<Index>(1, kw - 2 * pad), 9);
    Tape<float> tape;
    Var<float> y = conv2d(tape.constant(Tensor<float>({1, 2, h, w})), tape.constant(Tensor<float>({3, 2, kh, kw})),
                          tape.constant(Tensor<float>({3})), stride, pad);
    CHECK(y.shape() == Shape{1, 3, (h + 2 * pad - kh) / stride + 1, (w + 2 * pad - kw) / stride + 1});
  }
}

TEST_CASE("conv2d errors name the offending dimension") {
  Tape<float> tape;
  auto x = tape.constant(Tensor<float>({1, 3, 4, 4}));
  auto b = tape.constant(Tensor<float>({2}));
  try {
    conv2d(x, tape.constant(Tensor<float>({2, 1, 3, 3})), b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("channels") != std::string::npos);
  }
  try {
    conv2d(x, tape.constant(Tensor<float>({2, 3, 5, 3})), b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("height") != std::string::npos);
  }
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor<float>({2, 3, 3, 3})), tape.constant(Tensor<float>({3}))),
                  ShapeError);
}

TEST_CASE("max pooling picks block maxima") {
  Tape<double> tape;
  Var<double> y = max_pool2d(tape.constant(Tensor<double>({1, 1, 2, 2}, Vector<double>{{1, 2, 3, 4}})), 2);
  CHECK(y.value().item() == 4);

  Rng rng(4);
  Tensor<double> x = gradcheck::random_tensor({1, 2, 4, 4}, rng);
  Var<double> z = max_pool2d(tape.constant(x), 2);
  REQUIRE(z.shape() == Shape{1, 2, 2, 2});
  for (Index c = 0; c < 2; ++c)
    for (Index by = 0; by < 2; ++by)
      for (Index bx = 0; bx < 2; ++bx) {
        double best = -1e300;
        for (Index dy = 0; dy < 2; ++dy)
          for (Index dx = 0; dx < 2; ++dx) best = std::max(best, x[(c * 4 + by * 2 + dy) * 4 + bx * 2 + dx]);
        CHECK(z.value()[(c * 2 + by) * 2 + bx] == best);
      }
  CHECK_THROWS_AS(max_pool2d(tape.constant(Tensor<double>({1, 1, 3, 4})), 2), ShapeError);
}

TEST_CASE("max pooling routes tied gradients to the first element") {
  Tensor<double> x = Tensor<double>::filled({1, 1, 2, 2}, 5.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  tape.backward(sum(max_pool2d(tape.leaf(x), 2)));
  CHECK(x.grad()[0] == 1);
  CHECK(x.grad()[1] == 0);
  CHECK(x.grad()[2] == 0);
  CHECK(x.grad()[3] == 0);
}

TEST_CASE("global average pooling") {
  Tape<double> tape;
  Var<double> y = global_avg_pool(tape.constant(Tensor<double>::filled({2, 3, 4, 5}, 1.25)));
  CHECK(y.shape() == Shape{2, 3});
  CHECK((y.value().data() == 1.25).all());
  CHECK(pool(tape.constant(Tensor<double>::filled({1, 1, 2, 2}, 2.0)), PoolMode::global_avg).value().item() == 2.0);
}

TEST_CASE("dense layer") {
  Rng rng(5);
  Tape<double> tape;
  Tensor<double> x = gradcheck::random_tensor({3, 5}, rng);
  Tensor<double> eye({5, 5});
  for (Index i = 0; i < 5; ++i) eye[i * 5 + i] = 1;
  CHECK((dense(tape.constant(x), tape.constant(eye), tape.constant(Tensor<double>({5}))).value().data() == x.data())
            .all());

  Tensor<double> b = gradcheck::random_tensor({2}, rng);
  Var<double> rows = dense(tape.constant(Tensor<double>({4, 5})), tape.constant(gradcheck::random_tensor({5, 2}, rng)),
                           tape.constant(b));
  for (Index r = 0; r < 4; ++r) {
    CHECK(rows.value()[r * 2] == b[0]);
    CHECK(rows.value()[r * 2 + 1] == b[1]);
  }

  Tensor<double> w = gradcheck::random_tensor({5, 2}, rng);
  Var<double> y = dense(tape.constant(x), tape.constant(w), tape.constant(Tensor<double>({2})));
  const std::vector<double> expected = oracle::matmul(as_vector(x), as_vector(w), 3, 5, 2);
  for (Index i = 0; i < 6; ++i) CHECK(y.value()[i] == doctest::Approx(expected[std::size_t(i)]).epsilon(1e-6));

  CHECK_THROWS_AS(dense(tape.constant(x), tape.constant(Tensor<double>({4, 2})), tape.constant(Tensor<double>({2}))),
                  ShapeError);
}

TEST_CASE("activations") {
  Tape<double> tape;
  auto act = [&](double v, Activation kind) {
    return activation(tape.constant(Tensor<double>::scalar(v)), kind).value().item();
  };
  CHECK(act(0, Activation::sigmoid) == 0.5);
  CHECK(act(std::log(3.0), Activation::sigmoid) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(act(-1, Activation::relu) == 0);
  CHECK(act(2, Activation::relu) == 2);
  CHECK(act(-1000, Activation::sigmoid) >= 0);
  CHECK(std::isfinite(act(-1000, Activation::sigmoid)));
  CHECK(act(1000, Activation::sigmoid) == 1);
}

TEST_CASE("backward basics") {
  Tensor<double> x = Tensor<double>::filled({2, 3}, 0.3);
  x.set_requires_grad(true);
  {
    Tape<double> tape;
    tape.backward(sum(tape.leaf(x)));
    CHECK((x.grad() == 1.0).all());
  }
  Tensor<double> s = Tensor<double>::scalar(3.0);
  s.set_requires_grad(true);
  {
    Tape<double> tape;
    Var<double> v = tape.leaf(s);
    tape.backward(mul(v, v));
    CHECK(s.grad()[0] == 6.0);
  }
  {
    // gradients accumulate across passes
    Tape<double> tape;
    Var<double> v = tape.leaf(s);
    tape.backward(mul(v, v));
    CHECK(s.grad()[0] == 12.0);
  }
}

TEST_CASE("backward rejects non-scalar losses and consumed tapes") {
  Tensor<double> x = Tensor<double>::filled({2}, 1.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  Var<double> v = tape.leaf(x);
  CHECK_THROWS_AS(tape.backward(v), ShapeError);
  Var<double> loss = sum(v);
  tape.backward(loss);
  CHECK(tape.consumed());
  CHECK_THROWS_AS(tape.backward(loss), Error);
}

TEST_CASE("backward is linear in the loss") {
  Rng rng(6);
  Tensor<double> x = gradcheck::random_tensor({3, 4}, rng);
  Tensor<double> w = gradcheck::random_tensor({4, 2}, rng);
  Tensor<double> b = gradcheck::random_tensor({2}, rng);
  x.set_requires_grad(true);
  auto grad_of = [&](double a, double c) {
    x.clear_grad();
    Tape<double> tape;
    Var<double> h = dense(tape.leaf(x), tape.constant(w), tape.constant(b));
    Var<double> f = sum(sigmoid(h));
    Var<double> g = mean(mul(h, h));
    tape.backward(add(scale(f, a), scale(g, c)));
    return Tensor<double>::Data(x.grad());
  };
  const auto gf = grad_of(1, 0), gg = grad_of(0, 1), combo = grad_of(2.5, -0.75);
  CHECK(((combo - (2.5 * gf - 0.75 * gg)).abs() < 1e-12).all());
}

TEST_CASE("forward and backward are deterministic") {
  Rng rng(7);
  Tensor<float> x = gradcheck::random_tensor({2, 3, 8, 8}, rng).cast<float>();
  Tensor<float> k = gradcheck::random_tensor({4, 3, 3, 3}, rng).cast<float>();
  Tensor<float> b({4});
  k.set_requires_grad(true);
  auto run = [&] {
    k.clear_grad();
    Tape<float> tape;
    Var<float> y = mean(sigmoid(global_avg_pool(relu(conv2d(tape.constant(x), tape.leaf(k), tape.constant(b), 1, 1)))));
    const float value = y.value().item();
    tape.backward(y);
    return std::make_pair(value, Tensor<float>::Data(k.grad()));
  };
  const auto a = run(), c = run();
  CHECK(a.first == c.first);
  CHECK((a.second == c.second).all());
}

TEST_CASE("finite-difference gradient checks") {
  Rng rng(8);
  for (const gradcheck::OpCase& op : gradcheck::differentiable_ops()) {
    for (int i = 0; i < 3; ++i) {
      INFO(op.name);
      CHECK(op.run(rng) < gradcheck::kTolerance);
    }
  }
}

TEST_CASE("bce loss values") {
  Tape<double> tape;
  auto loss = [&](std::vector<double> p, std::vector<double> y) {
    Tensor<double> labels({Index(y.size())}, Eigen::Map<Vector<double>>(y.data(), Index(y.size())));
    return bce_loss(tape.constant(Tensor<double>({Index(p.size())}, Eigen::Map<Vector<double>>(p.data(), Index(p.size())))),
                    labels)
        .value()
        .item();
  };
  CHECK(loss({0.5}, {1}) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(loss({1.0}, {1}) <= -std::log(1 - 1e-7) + 1e-15);
  CHECK(loss({0.0}, {0}) <= -std::log(1 - 1e-7) + 1e-15);
  CHECK(loss({0.9, 0.2, 0.6}, {1, 0, 1}) == doctest::Approx(oracle::bce({0.9, 0.2, 0.6}, {1, 0, 1})).epsilon(1e-12));
  CHECK(loss({0.0}, {1}) == doctest::Approx(-std::log(1e-7)).epsilon(1e-12));
  CHECK_THROWS_AS(loss({0.5}, {2}), ConfigError);
  CHECK_THROWS_AS(loss({0.5, 0.5}, {1}), ShapeError);
}

}  // TEST_SUITE
