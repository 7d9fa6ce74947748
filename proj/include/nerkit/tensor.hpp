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

#ifndef NERKIT_TENSOR_HPP_
#define NERKIT_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "nerkit/errors.hpp"

namespace nerkit {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major tensor of doubles.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor({rows, cols}, fill);
  }

  static Tensor vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const {
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) n *= shape_[i];
    return n;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double at(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  std::span<double> row(std::size_t r) {
    const std::size_t n = cols();
    return std::span<double>(data_).subspan(r * n, n);
  }
  std::span<const double> row(std::size_t r) const {
    const std::size_t n = cols();
    return std::span<const double>(data_).subspan(r * n, n);
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

inline void require_shape(const Tensor& t, const Shape& expected,
                          const std::string& what) {
  if (t.shape() != expected) {
    throw ShapeError(what + ": expected shape " + shape_string(expected) +
                     ", got " + shape_string(t.shape()));
  }
}

inline void require_size(std::size_t actual, std::size_t expected,
                         const std::string& what) {
  if (actual != expected) {
    throw ShapeError(what + ": expected length " + std::to_string(expected) +
                     ", got " + std::to_string(actual));
  }
}

// out += M * x for a row-major rows x cols matrix.
inline void gemv_accumulate(const Tensor& m, std::span<const double> x,
                            std::span<double> out) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const double* w = m.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] += acc;
  }
}

// out += M^T * y.
inline void gemv_transpose_accumulate(const Tensor& m,
                                      std::span<const double> y,
                                      std::span<double> out) {
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const double* w = m.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += wr[c] * yr;
  }
}

// G += y x^T.
inline void outer_accumulate(Tensor& g, std::span<const double> y,
                             std::span<const double> x) {
  const std::size_t rows = g.rows();
  const std::size_t cols = g.cols();
  double* gp = g.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    double* gr = gp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) gr[c] += yr * x[c];
  }
}

inline double log_sum_exp(std::span<const double> v) {
  double mx = -INFINITY;
  for (double x : v) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace nerkit

#endif  // NERKIT_TENSOR_HPP_
