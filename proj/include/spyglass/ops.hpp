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

// Differentiable operations on tape variables. All tensors are row-major;
// image batches use the [N, C, H, W] layout.

#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "spyglass/tape.hpp"

namespace spyglass {

enum class PoolMode { max, global_avg };
enum class Activation { relu, sigmoid };

namespace detail {

template <typename Scalar>
void require_same_tape(Var<Scalar> a, Var<Scalar> b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
}

inline void require_rank(const Shape& shape, std::size_t rank, const char* op, const char* what) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) +
                     ", got shape " + shape_string(shape));
  }
}

template <typename Scalar>
using ColMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Patch matrix of one sample: rows are output positions, columns are (c, ky, kx).
template <typename Scalar>
void im2col(const Scalar* image, Index channels, Index height, Index width, Index kh, Index kw,
            Index stride, Index padding, Index out_h, Index out_w, ColMatrix<Scalar>& cols) {
  cols.resize(out_h * out_w, channels * kh * kw);
  Index q = 0;
  for (Index c = 0; c < channels; ++c) {
    const Scalar* plane = image + c * height * width;
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx, ++q) {
        Scalar* col = cols.col(q).data();
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride + ky - padding;
          Scalar* dst = col + oy * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, Scalar(0));
            continue;
          }
          const Scalar* row = plane + iy * width;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride + kx - padding;
            dst[ox] = (ix >= 0 && ix < width) ? row[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im(const ColMatrix<Scalar>& cols, Index channels, Index height, Index width, Index kh, Index kw,
            Index stride, Index padding, Index out_h, Index out_w, Scalar* image) {
  Index q = 0;
  for (Index c = 0; c < channels; ++c) {
    Scalar* plane = image + c * height * width;
    for (Index ky = 0; ky < kh; ++ky) {
      for (Index kx = 0; kx < kw; ++kx, ++q) {
        const Scalar* col = cols.col(q).data();
        for (Index oy = 0; oy < out_h; ++oy) {
          const Index iy = oy * stride + ky - padding;
          if (iy < 0 || iy >= height) continue;
          Scalar* row = plane + iy * width;
          const Scalar* src = col + oy * out_w;
          for (Index ox = 0; ox < out_w; ++ox) {
            const Index ix = ox * stride + kx - padding;
            if (ix >= 0 && ix < width) row[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

inline Index conv_output_size(Index input, Index kernel, Index stride, Index padding) {
  return (input + 2 * padding - kernel) / stride + 1;
}

/// 2-D cross-correlation with zero padding: [N,C,H,W] x [K,C,kh,kw] + [K] -> [N,K,H',W'].
template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> input, Var<Scalar> kernel, Var<Scalar> bias, Index stride = 1,
                   Index padding = 0) {
  detail::require_same_tape(input, kernel);
  detail::require_same_tape(input, bias);
  const Shape& xs = input.shape();
  const Shape& ks = kernel.shape();
  detail::require_rank(xs, 4, "conv2d", "input");
  detail::require_rank(ks, 4, "conv2d", "kernel");
  if (stride < 1) throw ShapeError("conv2d: stride must be positive");
  if (padding < 0) throw ShapeError("conv2d: padding must be non-negative");
  const Index n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  const Index k = ks[0], kh = ks[2], kw = ks[3];
  if (ks[1] != c) {
    throw ShapeError("conv2d: kernel input channels (dim 1) = " + std::to_string(ks[1]) +
                     " but input channels (dim 1) = " + std::to_string(c));
  }
  if (bias.shape() != Shape{k}) {
    throw ShapeError("conv2d: bias shape " + shape_string(bias.shape()) + " does not match kernel count " +
                     std::to_string(k));
  }
  if (kh > h + 2 * padding) {
    throw ShapeError("conv2d: kernel height (dim 2) = " + std::to_string(kh) + " exceeds padded input height " +
                     std::to_string(h + 2 * padding));
  }
  if (kw > w + 2 * padding) {
    throw ShapeError("conv2d: kernel width (dim 3) = " + std::to_string(kw) + " exceeds padded input width " +
                     std::to_string(w + 2 * padding));
  }
  const Index oh = conv_output_size(h, kh, stride, padding);
  const Index ow = conv_output_size(w, kw, stride, padding);
  const Index positions = oh * ow;
  const Index patch = c * kh * kw;

  using ColMatrix = detail::ColMatrix<Scalar>;
  const Tensor<Scalar>& x = input.value();
  Eigen::Map<const ColMatrix> kmat(kernel.value().raw(), patch, k);
  const auto bias_row = bias.value().data().matrix().transpose();

  Tensor<Scalar> out({n, k, oh, ow});
  ColMatrix cols;
  for (Index s = 0; s < n; ++s) {
    detail::im2col(x.raw() + s * c * h * w, c, h, w, kh, kw, stride, padding, oh, ow, cols);
    Eigen::Map<ColMatrix> out_s(out.raw() + s * k * positions, positions, k);
    out_s.noalias() = cols * kmat;
    out_s.rowwise() += bias_row;
  }

  Tape<Scalar>& tape = *input.tape;
  const bool needs = tape.needs_grad(input) || tape.needs_grad(kernel) || tape.needs_grad(bias);
  return tape.record(std::move(out), needs, [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    const Tensor<Scalar>& xv = t.value(input);
    Eigen::Map<const ColMatrix> km(t.value(kernel).raw(), patch, k);
    const bool want_x = t.needs_grad(input);
    const bool want_k = t.needs_grad(kernel);
    const bool want_b = t.needs_grad(bias);
    ColMatrix dk = ColMatrix::Zero(want_k ? patch : 0, want_k ? k : 0);
    Vector<Scalar> db = Vector<Scalar>::Zero(k);
    Vector<Scalar> dx;
    if (want_x) dx = Vector<Scalar>::Zero(xv.size());
    ColMatrix cols_s, dcols;
    for (Index s = 0; s < n; ++s) {
      Eigen::Map<const ColMatrix> g_s(g.data() + s * k * positions, positions, k);
      if (want_b) db += g_s.colwise().sum().transpose().array();
      if (want_k) {
        detail::im2col(xv.raw() + s * c * h * w, c, h, w, kh, kw, stride, padding, oh, ow, cols_s);
        dk.noalias() += cols_s.transpose() * g_s;
      }
      if (want_x) {
        dcols.noalias() = g_s * km.transpose();
        detail::col2im(dcols, c, h, w, kh, kw, stride, padding, oh, ow, dx.data() + s * c * h * w);
      }
    }
    if (want_x) t.accumulate(input, dx);
    if (want_k) t.accumulate(kernel, Eigen::Map<const Vector<Scalar>>(dk.data(), dk.size()));
    if (want_b) t.accumulate(bias, db);
  });
}

/// Non-overlapping max pooling with a square window; H and W must be divisible by it.
template <typename Scalar>
Var<Scalar> max_pool2d(Var<Scalar> input, Index window) {
  const Shape& xs = input.shape();
  detail::require_rank(xs, 4, "max_pool2d", "input");
  if (window < 1) throw ShapeError("max_pool2d: window must be positive");
  const Index n = xs[0], c = xs[1], h = xs[2], w = xs[3];
  if (h % window != 0) {
    throw ShapeError("max_pool2d: height (dim 2) = " + std::to_string(h) + " not divisible by window " +
                     std::to_string(window));
  }
  if (w % window != 0) {
    throw ShapeError("max_pool2d: width (dim 3) = " + std::to_string(w) + " not divisible by window " +
                     std::to_string(window));
  }
  const Index oh = h / window, ow = w / window;
  const Tensor<Scalar>& x = input.value();
  Tensor<Scalar> out({n, c, oh, ow});
  auto argmax = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(out.size()));
  Index o = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Scalar* src = x.raw() + plane * h * w;
    for (Index oy = 0; oy < oh; ++oy) {
      for (Index ox = 0; ox < ow; ++ox, ++o) {
        Index best = (oy * window) * w + ox * window;
        for (Index dy = 0; dy < window; ++dy) {
          const Index row = (oy * window + dy) * w + ox * window;
          for (Index dx = 0; dx < window; ++dx) {
            // Strict comparison keeps the first maximum in row-major order.
            if (src[row + dx] > src[best]) best = row + dx;
          }
        }
        out[o] = src[best];
        (*argmax)[static_cast<std::size_t>(o)] = plane * h * w + best;
      }
    }
  }
  Tape<Scalar>& tape = *input.tape;
  const Index in_size = x.size();
  return tape.record(std::move(out), tape.needs_grad(input),
                     [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
                       Vector<Scalar> dx = Vector<Scalar>::Zero(in_size);
                       for (Index i = 0; i < g.size(); ++i) dx[(*argmax)[static_cast<std::size_t>(i)]] += g[i];
                       t.accumulate(input, dx);
                     });
}

/// Spatial mean: [N,C,H,W] -> [N,C].
template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> input) {
  const Shape& xs = input.shape();
  detail::require_rank(xs, 4, "global_avg_pool", "input");
  const Index planes = xs[0] * xs[1], area = xs[2] * xs[3];
  Eigen::Map<const detail::ColMatrix<Scalar>> x(input.value().raw(), area, planes);
  Tensor<Scalar> out({xs[0], xs[1]}, (x.colwise().sum().transpose() / Scalar(area)).array());
  Tape<Scalar>& tape = *input.tape;
  return tape.record(std::move(out), tape.needs_grad(input), [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    Vector<Scalar> dx(planes * area);
    for (Index p = 0; p < planes; ++p) dx.segment(p * area, area).setConstant(g[p] / Scalar(area));
    t.accumulate(input, dx);
  });
}

template <typename Scalar>
Var<Scalar> pool(Var<Scalar> input, PoolMode mode, Index window = 2) {
  return mode == PoolMode::max ? max_pool2d(input, window) : global_avg_pool(input);
}

/// Affine map [N,D] x [D,M] + [M] -> [N,M].
template <typename Scalar>
Var<Scalar> dense(Var<Scalar> input, Var<Scalar> weight, Var<Scalar> bias) {
  detail::require_same_tape(input, weight);
  detail::require_same_tape(input, bias);
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  detail::require_rank(xs, 2, "dense", "input");
  detail::require_rank(ws, 2, "dense", "weight");
  if (xs[1] != ws[0]) {
    throw ShapeError("dense: input features (dim 1) = " + std::to_string(xs[1]) + " but weight rows (dim 0) = " +
                     std::to_string(ws[0]));
  }
  if (bias.shape() != Shape{ws[1]}) {
    throw ShapeError("dense: bias shape " + shape_string(bias.shape()) + " does not match weight columns " +
                     std::to_string(ws[1]));
  }
  const Index n = xs[0], d = xs[1], m = ws[1];
  using Mat = RowMatrix<Scalar>;
  Eigen::Map<const Mat> x(input.value().raw(), n, d);
  Eigen::Map<const Mat> wm(weight.value().raw(), d, m);
  Tensor<Scalar> out({n, m});
  Eigen::Map<Mat> y(out.raw(), n, m);
  y.noalias() = x * wm;
  y.rowwise() += bias.value().data().matrix().transpose();

  Tape<Scalar>& tape = *input.tape;
  const bool needs = tape.needs_grad(input) || tape.needs_grad(weight) || tape.needs_grad(bias);
  return tape.record(std::move(out), needs, [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    Eigen::Map<const Mat> gy(g.data(), n, m);
    if (t.needs_grad(input)) {
      Eigen::Map<const Mat> wv(t.value(weight).raw(), d, m);
      Mat dx = gy * wv.transpose();
      t.accumulate(input, Eigen::Map<const Vector<Scalar>>(dx.data(), dx.size()));
    }
    if (t.needs_grad(weight)) {
      Eigen::Map<const Mat> xv(t.value(input).raw(), n, d);
      Mat dw = xv.transpose() * gy;
      t.accumulate(weight, Eigen::Map<const Vector<Scalar>>(dw.data(), dw.size()));
    }
    if (t.needs_grad(bias)) t.accumulate(bias, gy.colwise().sum().transpose().array());
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> input) {
  const Tensor<Scalar>& x = input.value();
  Tensor<Scalar> out(x.shape(), x.data().max(Scalar(0)));
  Tape<Scalar>& tape = *input.tape;
  return tape.record(std::move(out), tape.needs_grad(input), [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    const auto& xv = t.value(input).data();
    t.accumulate(input, (xv > Scalar(0)).select(g, Scalar(0)));
  });
}

/// Logistic function; the x < 0 branch uses exp(x) / (1 + exp(x)) to avoid overflow.
template <typename Scalar>
Scalar stable_sigmoid(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> input) {
  const Tensor<Scalar>& x = input.value();
  auto y = std::make_shared<Vector<Scalar>>(x.data().unaryExpr([](Scalar v) { return stable_sigmoid(v); }));
  Tensor<Scalar> out(x.shape(), *y);
  Tape<Scalar>& tape = *input.tape;
  return tape.record(std::move(out), tape.needs_grad(input), [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    t.accumulate(input, g * *y * (Scalar(1) - *y));
  });
}

template <typename Scalar>
Var<Scalar> activation(Var<Scalar> input, Activation kind) {
  return kind == Activation::relu ? relu(input) : sigmoid(input);
}

/// Element-wise sum of two equally shaped tensors.
template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  Tensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  Tape<Scalar>& tape = *a.tape;
  const bool needs = tape.needs_grad(a) || tape.needs_grad(b);
  return tape.record(std::move(out), needs, [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

/// Element-wise product of two equally shaped tensors.
template <typename Scalar>
Var<Scalar> mul(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  }
  Tensor<Scalar> out(a.shape(), a.value().data() * b.value().data());
  Tape<Scalar>& tape = *a.tape;
  const bool needs = tape.needs_grad(a) || tape.needs_grad(b);
  return tape.record(std::move(out), needs, [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * t.value(b).data());
    if (t.needs_grad(b)) t.accumulate(b, g * t.value(a).data());
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar factor) {
  Tensor<Scalar> out(a.shape(), a.value().data() * factor);
  Tape<Scalar>& tape = *a.tape;
  return tape.record(std::move(out), tape.needs_grad(a),
                     [=](Tape<Scalar>& t, const Vector<Scalar>& g) { t.accumulate(a, g * factor); });
}

/// Row-wise concatenation [N,D1] ++ [N,D2] -> [N,D1+D2], `a` first.
template <typename Scalar>
Var<Scalar> concat_columns(Var<Scalar> a, Var<Scalar> b) {
  detail::require_same_tape(a, b);
  detail::require_rank(a.shape(), 2, "concat", "first operand");
  detail::require_rank(b.shape(), 2, "concat", "second operand");
  if (a.dim(0) != b.dim(0)) {
    throw ShapeError("concat: batch sizes (dim 0) " + std::to_string(a.dim(0)) + " and " +
                     std::to_string(b.dim(0)) + " differ");
  }
  const Index n = a.dim(0), d1 = a.dim(1), d2 = b.dim(1);
  using Mat = RowMatrix<Scalar>;
  Tensor<Scalar> out({n, d1 + d2});
  Eigen::Map<Mat> y(out.raw(), n, d1 + d2);
  y.leftCols(d1) = Eigen::Map<const Mat>(a.value().raw(), n, d1);
  y.rightCols(d2) = Eigen::Map<const Mat>(b.value().raw(), n, d2);
  Tape<Scalar>& tape = *a.tape;
  const bool needs = tape.needs_grad(a) || tape.needs_grad(b);
  return tape.record(std::move(out), needs, [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    Eigen::Map<const Mat> gy(g.data(), n, d1 + d2);
    if (t.needs_grad(a)) {
      Mat ga = gy.leftCols(d1);
      t.accumulate(a, Eigen::Map<const Vector<Scalar>>(ga.data(), ga.size()));
    }
    if (t.needs_grad(b)) {
      Mat gb = gy.rightCols(d2);
      t.accumulate(b, Eigen::Map<const Vector<Scalar>>(gb.data(), gb.size()));
    }
  });
}

template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Shape shape) {
  Tensor<Scalar> out(std::move(shape), a.value().data());
  Tape<Scalar>& tape = *a.tape;
  return tape.record(std::move(out), tape.needs_grad(a),
                     [=](Tape<Scalar>& t, const Vector<Scalar>& g) { t.accumulate(a, g); });
}

template <typename Scalar>
Var<Scalar> sum(Var<Scalar> a) {
  Tensor<Scalar> out = Tensor<Scalar>::scalar(a.value().data().sum());
  const Index n = a.value().size();
  Tape<Scalar>& tape = *a.tape;
  return tape.record(std::move(out), tape.needs_grad(a), [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
    t.accumulate(a, Vector<Scalar>::Constant(n, g[0]));
  });
}

template <typename Scalar>
Var<Scalar> mean(Var<Scalar> a) {
  return scale(sum(a), Scalar(1) / Scalar(a.value().size()));
}

/// Lower clamp applied to predictions before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

/**
 * Mean binary cross-entropy of probabilities `predictions` [N] against
 * {0,1} labels. Predictions are clamped to [1e-7, 1-1e-7]; clamped entries
 * receive zero gradient.
 */
template <typename Scalar>
Var<Scalar> bce_loss(Var<Scalar> predictions, const Tensor<Scalar>& labels) {
  const Tensor<Scalar>& p = predictions.value();
  if (p.size() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(p.size()) + " predictions but " +
                     std::to_string(labels.size()) + " labels");
  }
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != Scalar(0) && labels[i] != Scalar(1)) {
      throw ConfigError("bce_loss: label " + std::to_string(i) + " is " + std::to_string(labels[i]) +
                        ", expected 0 or 1");
    }
  }
  const Scalar lo = Scalar(kProbabilityClamp);
  const Scalar hi = Scalar(1) - Scalar(kProbabilityClamp);
  const Index n = p.size();
  const Vector<Scalar> y = labels.data();
  const Vector<Scalar> clamped = p.data().max(lo).min(hi);
  const Scalar loss = -(y * clamped.log() + (Scalar(1) - y) * (Scalar(1) - clamped).log()).sum() / Scalar(n);
  Tape<Scalar>& tape = *predictions.tape;
  return tape.record(Tensor<Scalar>::scalar(loss), tape.needs_grad(predictions),
                     [=](Tape<Scalar>& t, const Vector<Scalar>& g) {
                       const auto& pv = t.value(predictions).data();
                       const Vector<Scalar> d = -(y / clamped - (Scalar(1) - y) / (Scalar(1) - clamped)) / Scalar(n);
                       const auto inside = (pv >= lo && pv <= hi);
                       t.accumulate(predictions, inside.select(d * g[0], Scalar(0)));
                     });
}

}  // namespace spyglass
