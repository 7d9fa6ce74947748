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

#ifndef NERKIT_WORD_FEATURES_HPP_
#define NERKIT_WORD_FEATURES_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerkit/char_cnn.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/lexicon.hpp"
#include "nerkit/tensor.hpp"
#include "nerkit/text.hpp"

namespace nerkit {

enum class CapsClass : int {
  kAllCaps = 0,
  kUpperInitial = 1,
  kLowercase = 2,
  kMixedCaps = 3,
  kNoInfo = 4,
};

inline constexpr std::size_t kNumCapsClasses = 5;

inline CapsClass caps_feature(std::string_view raw) {
  const std::u32string cps = text::decode_utf8(raw);
  std::size_t upper = 0, lower = 0;
  for (char32_t c : cps) {
    if (text::is_upper(c)) ++upper;
    if (text::is_lower(c)) ++lower;
  }
  if (upper + lower == 0) return CapsClass::kNoInfo;
  if (lower == 0) return CapsClass::kAllCaps;
  if (text::is_upper(cps.front()) && upper == 1) return CapsClass::kUpperInitial;
  if (upper == 0) return CapsClass::kLowercase;
  return CapsClass::kMixedCaps;
}

// Every maximal run of ASCII digits becomes a single '0'.
inline std::string normalize_digits(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    if (text::is_ascii_digit(s[i])) {
      out.push_back('0');
      while (i < s.size() && text::is_ascii_digit(s[i])) ++i;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// Embedding lookup key: lower-cased, digit-normalized.
inline std::string word_key(std::string_view raw) {
  return text::to_lower(normalize_digits(raw));
}

/// Normalized word form to id; id 0 is UNKNOWN.
class WordVocab {
 public:
  static constexpr int kUnknown = 0;

  WordVocab() = default;

  // Adds an already-normalized key; returns its id.
  int add_key(const std::string& key) {
    auto [it, inserted] = ids_.try_emplace(key, static_cast<int>(words_.size()) + 1);
    if (inserted) words_.push_back(key);
    return it->second;
  }

  int add(std::string_view raw) { return add_key(word_key(raw)); }

  int key_id(const std::string& key) const {
    auto it = ids_.find(key);
    return it == ids_.end() ? kUnknown : it->second;
  }

  bool contains_key(const std::string& key) const { return ids_.count(key) != 0; }

  std::size_t size() const { return words_.size() + 1; }

  // Known keys in id order (ids 1, 2, ...).
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::unordered_map<std::string, int> ids_;
  std::vector<std::string> words_;
};

inline int word_id(std::string_view raw, const WordVocab& vocab) {
  return vocab.key_id(word_key(raw));
}

/// Pretrained vectors keyed by normalized form; first occurrence of a key
/// wins.
struct PretrainedEmbeddings {
  std::size_t dim = 0;
  std::vector<std::string> keys;
  std::vector<std::vector<double>> vectors;
};

/// Reads "token v1 ... vD" lines with an optional "V D" header line.
inline PretrainedEmbeddings load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings '" + path.string() + "'");
  PretrainedEmbeddings emb;
  std::unordered_map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::vector<std::string> parts = text::split_whitespace(line);
    if (parts.empty()) continue;
    if (line_no == 1 && parts.size() == 2) {
      const bool header = std::all_of(parts[0].begin(), parts[0].end(), text::is_ascii_digit) &&
                          std::all_of(parts[1].begin(), parts[1].end(), text::is_ascii_digit);
      if (header) continue;
    }
    const std::size_t d = parts.size() - 1;
    if (d == 0) throw ParseError("embedding line has no values", line_no);
    if (emb.dim == 0) emb.dim = d;
    if (d != emb.dim) {
      throw ParseError("embedding has " + std::to_string(d) + " values, expected " +
                           std::to_string(emb.dim),
                       line_no);
    }
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) {
      try {
        std::size_t used = 0;
        v[i] = std::stod(parts[i + 1], &used);
        if (used != parts[i + 1].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ParseError("bad embedding value '" + parts[i + 1] + "'", line_no);
      }
    }
    std::string key = word_key(parts[0]);
    if (seen.emplace(key, true).second) {
      emb.keys.push_back(std::move(key));
      emb.vectors.push_back(std::move(v));
    }
  }
  return emb;
}

/// One lexicon feature block: a lexicon with its own matching mode and
/// encoding.
struct LexiconFeature {
  std::string name;
  Lexicon lexicon;
  MatchMode mode = MatchMode::kPartial;
  LexEncoding encoding = LexEncoding::kBioes;

  std::size_t width() const {
    return lexicon.num_categories() * lexicon_feature_width(encoding);
  }
};

/// Which inputs make up a token vector, in concatenation order
/// [word embedding | caps | char CNN | lexicon blocks].
struct FeatureLayout {
  std::size_t word_dim = 50;
  bool use_caps = true;
  bool use_char_cnn = true;
  std::size_t cnn_filters = 53;
  std::size_t lexicon_dim = 0;

  std::size_t caps_offset() const { return word_dim; }
  std::size_t cnn_offset() const { return caps_offset() + (use_caps ? kNumCapsClasses : 0); }
  std::size_t lexicon_offset() const { return cnn_offset() + (use_char_cnn ? cnn_filters : 0); }
  std::size_t input_dim() const { return lexicon_offset() + lexicon_dim; }
};

/// Everything about one token that does not depend on trainable weights.
struct TokenFeatures {
  int word = WordVocab::kUnknown;
  CapsClass caps = CapsClass::kNoInfo;
  CharMatrix chars;
  std::vector<double> lexicon;
};

/// Concatenates one token's input vector. `cnn` is the char CNN output for
/// this token (ignored when the layout disables it).
inline std::vector<double> assemble_word_vector(const TokenFeatures& token,
                                                const Tensor& word_table,
                                                std::span<const double> cnn,
                                                const FeatureLayout& layout) {
  std::vector<double> v(layout.input_dim(), 0.0);
  if (token.word < 0 || static_cast<std::size_t>(token.word) >= word_table.rows()) {
    throw IndexError("word table: id " + std::to_string(token.word) + " out of range");
  }
  require_size(word_table.cols(), layout.word_dim, "word embedding width");
  auto emb = word_table.row(static_cast<std::size_t>(token.word));
  std::copy(emb.begin(), emb.end(), v.begin());
  if (layout.use_caps) v[layout.caps_offset() + static_cast<std::size_t>(token.caps)] = 1.0;
  if (layout.use_char_cnn) {
    require_size(cnn.size(), layout.cnn_filters, "char cnn output");
    std::copy(cnn.begin(), cnn.end(), v.begin() + static_cast<std::ptrdiff_t>(layout.cnn_offset()));
  }
  require_size(token.lexicon.size(), layout.lexicon_dim, "lexicon features");
  std::copy(token.lexicon.begin(), token.lexicon.end(),
            v.begin() + static_cast<std::ptrdiff_t>(layout.lexicon_offset()));
  return v;
}

}  // namespace nerkit

#endif  // NERKIT_WORD_FEATURES_HPP_
