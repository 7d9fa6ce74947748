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

#ifndef NERKIT_CHAR_CNN_HPP_
#define NERKIT_CHAR_CNN_HPP_

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nerkit/errors.hpp"
#include "nerkit/tensor.hpp"
#include "nerkit/text.hpp"

namespace nerkit {

enum class CharType : int { kUpper = 0, kLower = 1, kPunctuation = 2, kOther = 3 };

inline constexpr std::size_t kNumCharTypes = 4;

inline bool is_ascii_punctuation(char32_t c) {
  return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
         (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
}

inline CharType char_type_of(char32_t c) {
  if (text::is_upper(c)) return CharType::kUpper;
  if (text::is_lower(c)) return CharType::kLower;
  if (is_ascii_punctuation(c)) return CharType::kPunctuation;
  return CharType::kOther;
}

/// Character vocabulary with reserved PADDING (id 0) and UNKNOWN (id 1).
class CharVocab {
 public:
  static constexpr int kPadding = 0;
  static constexpr int kUnknown = 1;

  CharVocab() = default;

  void add(char32_t c) {
    if (ids_.count(c) == 0) {
      ids_.emplace(c, static_cast<int>(chars_.size()) + 2);
      chars_.push_back(c);
    }
  }

  void add_word(std::string_view word) {
    for (char32_t c : text::decode_utf8(word)) add(c);
  }

  int id(char32_t c) const {
    auto it = ids_.find(c);
    return it == ids_.end() ? kUnknown : it->second;
  }

  std::size_t size() const { return chars_.size() + 2; }

  // Non-reserved characters in id order (ids 2, 3, ...).
  const std::u32string& characters() const { return chars_; }

 private:
  std::map<char32_t, int> ids_;
  std::u32string chars_;
};

/// Per-character rows of one padded word. `types` is empty when the
/// character-type feature is disabled.
struct CharMatrix {
  std::vector<int> chars;
  std::vector<int> types;

  std::size_t rows() const { return chars.size(); }
};

inline std::size_t char_padding(std::size_t window) { return window / 2; }

inline CharMatrix encode_characters(std::string_view word,
                                    const CharVocab& vocab, std::size_t window,
                                    bool use_char_type) {
  const std::u32string cps = text::decode_utf8(word);
  const std::size_t pad = char_padding(window);
  CharMatrix m;
  m.chars.reserve(cps.size() + 2 * pad);
  const auto push = [&](int id, CharType type) {
    m.chars.push_back(id);
    if (use_char_type) m.types.push_back(static_cast<int>(type));
  };
  for (std::size_t i = 0; i < pad; ++i) push(CharVocab::kPadding, CharType::kOther);
  for (char32_t c : cps) push(vocab.id(c), char_type_of(c));
  for (std::size_t i = 0; i < pad; ++i) push(CharVocab::kPadding, CharType::kOther);
  return m;
}

struct CharCnnParams {
  const Tensor& char_table;  // |V_char| x char_dim
  const Tensor* type_table;  // 4 x type_dim, null when disabled
  const Tensor& filters;     // h x (window * depth)
  const Tensor& bias;        // h
  std::size_t window;

  std::size_t depth() const {
    return char_table.cols() + (type_table ? type_table->cols() : 0);
  }
  std::size_t output_size() const { return filters.rows(); }

  void validate() const {
    if (window == 0 || window % 2 == 0) {
      throw ConfigError("convolution width must be odd and >= 1");
    }
    if (filters.rank() != 2 || filters.cols() != window * depth() ||
        bias.size() != filters.rows() || filters.rows() == 0) {
      throw ShapeError("char cnn: filter bank " + shape_string(filters.shape()) +
                       " does not match window " + std::to_string(window) +
                       " x depth " + std::to_string(depth()));
    }
  }
};

struct CharCnnGrads {
  Tensor& char_table;
  Tensor* type_table;
  Tensor& filters;
  Tensor& bias;
};

struct CharCnnOutput {
  std::vector<double> features;      // h
  std::vector<std::size_t> argmax;   // winning window start per filter
};

namespace detail {

// Row-stacked character vectors: rows() x depth.
inline std::vector<double> char_inputs(const CharMatrix& m, const CharCnnParams& p) {
  const std::size_t cd = p.char_table.cols();
  const std::size_t depth = p.depth();
  std::vector<double> x(m.rows() * depth);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const int id = m.chars[r];
    if (id < 0 || static_cast<std::size_t>(id) >= p.char_table.rows()) {
      throw IndexError("char table: id " + std::to_string(id) + " out of range");
    }
    auto row = p.char_table.row(static_cast<std::size_t>(id));
    std::copy(row.begin(), row.end(), x.begin() + r * depth);
    if (p.type_table) {
      auto trow = p.type_table->row(static_cast<std::size_t>(m.types.at(r)));
      std::copy(trow.begin(), trow.end(), x.begin() + r * depth + cd);
    }
  }
  return x;
}

}  // namespace detail

/// Convolution over every full window (stride 1) followed by max over
/// positions. Ties go to the earliest window.
inline CharCnnOutput char_cnn_forward(const CharMatrix& m, const CharCnnParams& p) {
  p.validate();
  if (p.type_table && m.types.size() != m.chars.size()) {
    throw ShapeError("char cnn: character types missing");
  }
  if (m.rows() < p.window) {
    throw ShapeError("char cnn: fewer rows than the window width");
  }
  const std::size_t depth = p.depth();
  const std::size_t span = p.window * depth;
  const std::size_t positions = m.rows() - p.window + 1;
  const std::size_t h = p.output_size();
  const std::vector<double> x = detail::char_inputs(m, p);

  CharCnnOutput out;
  out.features.assign(h, -INFINITY);
  out.argmax.assign(h, 0);
  for (std::size_t k = 0; k < h; ++k) {
    auto fk = p.filters.row(k);
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const double* xw = x.data() + pos * depth;
      double acc = p.bias[k];
      for (std::size_t j = 0; j < span; ++j) acc += fk[j] * xw[j];
      if (acc > out.features[k]) {
        out.features[k] = acc;
        out.argmax[k] = pos;
      }
    }
  }
  return out;
}

inline void char_cnn_backward(const CharMatrix& m, const CharCnnParams& p,
                              const CharCnnOutput& out,
                              std::span<const double> grad, CharCnnGrads& g) {
  const std::size_t depth = p.depth();
  const std::size_t cd = p.char_table.cols();
  const std::size_t span = p.window * depth;
  const std::vector<double> x = detail::char_inputs(m, p);
  std::vector<double> dx(x.size(), 0.0);
  for (std::size_t k = 0; k < p.output_size(); ++k) {
    const double gk = grad[k];
    if (gk == 0.0) continue;
    const std::size_t pos = out.argmax[k];
    const double* xw = x.data() + pos * depth;
    auto fk = p.filters.row(k);
    auto dfk = g.filters.row(k);
    for (std::size_t j = 0; j < span; ++j) {
      dfk[j] += gk * xw[j];
      dx[pos * depth + j] += gk * fk[j];
    }
    g.bias[k] += gk;
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto dc = g.char_table.row(static_cast<std::size_t>(m.chars[r]));
    for (std::size_t j = 0; j < cd; ++j) dc[j] += dx[r * depth + j];
    if (p.type_table && g.type_table) {
      auto dt = g.type_table->row(static_cast<std::size_t>(m.types[r]));
      for (std::size_t j = 0; j < dt.size(); ++j) dt[j] += dx[r * depth + cd + j];
    }
  }
}

}  // namespace nerkit

#endif  // NERKIT_CHAR_CNN_HPP_
