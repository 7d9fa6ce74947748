// Copyright 2026 The nerkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Layers with hand-derived backward passes. Each forward returns what its
// backward needs; backward functions accumulate (+=) into gradient tensors.

#ifndef NERKIT_LAYERS_HPP_
#define NERKIT_LAYERS_HPP_

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nerkit/errors.hpp"
#include "nerkit/rng.hpp"
#include "nerkit/tensor.hpp"

namespace nerkit {

enum class Mode { kTrain, kEval };

// ---------------------------------------------------------------------------
// Lookup table

inline Tensor lookup_forward(const Tensor& table, std::span<const int> ids,
                             const std::string& table_name = "lookup") {
  if (table.rank() != 2) throw ShapeError(table_name + ": table must be 2-d");
  const std::size_t dim = table.cols();
  Tensor out = Tensor::matrix(ids.size(), dim);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const int id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw IndexError(table_name + ": id " + std::to_string(id) +
                       " out of range [0, " + std::to_string(table.rows()) + ")");
    }
    auto src = table.row(static_cast<std::size_t>(id));
    std::copy(src.begin(), src.end(), out.row(t).begin());
  }
  return out;
}

// Scatter-adds row t of grad_out into row ids[t] of table_grad.
inline void lookup_backward(Tensor& table_grad, std::span<const int> ids,
                            const Tensor& grad_out) {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    auto dst = table_grad.row(static_cast<std::size_t>(ids[t]));
    auto src = grad_out.row(t);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

// ---------------------------------------------------------------------------
// Linear layer: y = W x + b

inline std::vector<double> linear_forward(const Tensor& w, const Tensor& b,
                                          std::span<const double> x) {
  if (w.rank() != 2) throw ShapeError("linear: weight must be 2-d");
  require_size(b.size(), w.rows(), "linear bias");
  require_size(x.size(), w.cols(), "linear input");
  std::vector<double> y(b.data().begin(), b.data().end());
  gemv_accumulate(w, x, y);
  return y;
}

// dx may be empty when the input gradient is not needed.
inline void linear_backward(const Tensor& w, std::span<const double> x,
                            std::span<const double> dy, Tensor& dw, Tensor& db,
                            std::span<double> dx) {
  outer_accumulate(dw, dy, x);
  for (std::size_t k = 0; k < dy.size(); ++k) db[k] += dy[k];
  if (!dx.empty()) gemv_transpose_accumulate(w, dy, dx);
}

// ---------------------------------------------------------------------------
// Log-softmax

inline std::vector<double> log_softmax(std::span<const double> z) {
  const double lse = log_sum_exp(z);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
  return out;
}

// Given y = log_softmax(z) and dL/dy, returns dL/dz.
inline std::vector<double> log_softmax_backward(std::span<const double> y,
                                                std::span<const double> dy) {
  double total = 0.0;
  for (double g : dy) total += g;
  std::vector<double> dz(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dz[i] = dy[i] - std::exp(y[i]) * total;
  return dz;
}

// ---------------------------------------------------------------------------
// LSTM cell (forget gate, no peepholes). Gate blocks in the stacked
// pre-activation are ordered input, forget, output, candidate.

struct LstmCellParams {
  const Tensor& input_weights;      // 4H x D
  const Tensor& recurrent_weights;  // 4H x H
  const Tensor& bias;               // 4H

  std::size_t state_size() const { return recurrent_weights.cols(); }
  std::size_t input_size() const { return input_weights.cols(); }

  void validate() const {
    const std::size_t h = recurrent_weights.cols();
    if (input_weights.rank() != 2 || recurrent_weights.rank() != 2 ||
        input_weights.rows() != 4 * h || recurrent_weights.rows() != 4 * h ||
        bias.size() != 4 * h) {
      throw ShapeError("lstm: inconsistent parameter shapes " +
                       shape_string(input_weights.shape()) + ", " +
                       shape_string(recurrent_weights.shape()) + ", " +
                       shape_string(bias.shape()));
    }
  }
};

struct LstmCellGrads {
  Tensor& input_weights;
  Tensor& recurrent_weights;
  Tensor& bias;
};

struct LstmStep {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> in_gate, forget_gate, out_gate, candidate;
  std::vector<double> c, tanh_c, h;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline LstmStep lstm_step(const LstmCellParams& p, std::span<const double> x,
                          std::span<const double> h_prev,
                          std::span<const double> c_prev) {
  p.validate();
  const std::size_t H = p.state_size();
  require_size(x.size(), p.input_size(), "lstm input");
  require_size(h_prev.size(), H, "lstm h_prev");
  require_size(c_prev.size(), H, "lstm c_prev");

  std::vector<double> z(p.bias.data().begin(), p.bias.data().end());
  gemv_accumulate(p.input_weights, x, z);
  gemv_accumulate(p.recurrent_weights, h_prev, z);

  LstmStep s;
  s.x.assign(x.begin(), x.end());
  s.h_prev.assign(h_prev.begin(), h_prev.end());
  s.c_prev.assign(c_prev.begin(), c_prev.end());
  s.in_gate.resize(H);
  s.forget_gate.resize(H);
  s.out_gate.resize(H);
  s.candidate.resize(H);
  s.c.resize(H);
  s.tanh_c.resize(H);
  s.h.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    s.in_gate[j] = sigmoid(z[j]);
    s.forget_gate[j] = sigmoid(z[H + j]);
    s.out_gate[j] = sigmoid(z[2 * H + j]);
    s.candidate[j] = std::tanh(z[3 * H + j]);
    s.c[j] = s.forget_gate[j] * c_prev[j] + s.in_gate[j] * s.candidate[j];
    s.tanh_c[j] = std::tanh(s.c[j]);
    s.h[j] = s.out_gate[j] * s.tanh_c[j];
  }
  return s;
}

// Backpropagates dL/dh_t and dL/dc_t (the latter from the next step) through
// one step. Accumulates weight gradients; dx, dh_prev and dc_prev are
// overwritten.
inline void lstm_step_backward(const LstmCellParams& p, const LstmStep& s,
                               std::span<const double> dh,
                               std::span<const double> dc, LstmCellGrads& g,
                               std::vector<double>& dx,
                               std::vector<double>& dh_prev,
                               std::vector<double>& dc_prev) {
  const std::size_t H = p.state_size();
  std::vector<double> dz(4 * H);
  dc_prev.assign(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double i = s.in_gate[j], f = s.forget_gate[j], o = s.out_gate[j];
    const double cand = s.candidate[j], tc = s.tanh_c[j];
    const double dct = dc[j] + dh[j] * o * (1.0 - tc * tc);
    dz[j] = dct * cand * i * (1.0 - i);
    dz[H + j] = dct * s.c_prev[j] * f * (1.0 - f);
    dz[2 * H + j] = dh[j] * tc * o * (1.0 - o);
    dz[3 * H + j] = dct * i * (1.0 - cand * cand);
    dc_prev[j] = dct * f;
  }
  outer_accumulate(g.input_weights, dz, s.x);
  outer_accumulate(g.recurrent_weights, dz, s.h_prev);
  for (std::size_t k = 0; k < 4 * H; ++k) g.bias[k] += dz[k];
  dx.assign(p.input_size(), 0.0);
  gemv_transpose_accumulate(p.input_weights, dz, dx);
  dh_prev.assign(H, 0.0);
  gemv_transpose_accumulate(p.recurrent_weights, dz, dh_prev);
}

// ---------------------------------------------------------------------------
// Inverted dropout. The returned scale vector doubles as the backward mask:
// it is 0 for dropped units and 1/(1-p) for kept ones (all 1 in eval mode).

struct DropoutResult {
  std::vector<double> output;
  std::vector<double> scale;
};

inline DropoutResult dropout_apply(std::span<const double> x, double p_discard,
                                   Mode mode, Rng& rng) {
  if (!(p_discard >= 0.0 && p_discard < 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1), got " +
                      std::to_string(p_discard));
  }
  DropoutResult r;
  r.output.assign(x.begin(), x.end());
  r.scale.assign(x.size(), 1.0);
  if (mode == Mode::kEval || p_discard == 0.0) return r;
  const double keep_scale = 1.0 / (1.0 - p_discard);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.scale[i] = rng.bernoulli(p_discard) ? 0.0 : keep_scale;
    r.output[i] = x[i] * r.scale[i];
  }
  return r;
}

inline void dropout_backward(std::span<const double> scale,
                             std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= scale[i];
}

// ---------------------------------------------------------------------------
// Initializers

inline void init_uniform(Tensor& t, double lo, double hi, Rng& rng) {
  for (double& v : t.data()) v = rng.uniform(lo, hi);
}

inline void init_normal(Tensor& t, Rng& rng) {
  for (double& v : t.data()) v = rng.normal();
}

// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
inline void init_fan_in(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double r = 1.0 / std::sqrt(static_cast<double>(fan_in));
  init_uniform(t, -r, r, rng);
}

}  // namespace nerkit

#endif  // NERKIT_LAYERS_HPP_
