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

#ifndef NERKIT_DATA_IO_HPP_
#define NERKIT_DATA_IO_HPP_

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nerkit/char_cnn.hpp"
#include "nerkit/errors.hpp"
#include "nerkit/rng.hpp"
#include "nerkit/tagging.hpp"
#include "nerkit/text.hpp"
#include "nerkit/word_features.hpp"

namespace nerkit {

struct Sentence {
  std::vector<std::string> tokens;                // surface forms
  std::vector<std::string> normalized;            // digit-normalized forms
  std::vector<std::vector<std::string>> columns;  // all input columns
  std::vector<std::string> tags;                  // gold tags, BIOES; empty if unlabeled
  std::vector<std::size_t> lines;                 // 1-based source line per token

  std::size_t size() const { return tokens.size(); }
};

struct DocumentBoundary {
  std::size_t before_sentence = 0;  // index of the first sentence after it
  std::string line;
};

struct Corpus {
  std::vector<Sentence> sentences;
  std::vector<DocumentBoundary> documents;
  std::string path;
  TagDialect dialect = TagDialect::kAuto;
  bool labeled = false;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const Sentence& s : sentences) n += s.size();
    return n;
  }
};

struct ConllOptions {
  TagDialect dialect = TagDialect::kAuto;
  bool labeled = true;
};

/// Parses whitespace-separated columns. Token is the first column; with
/// `labeled` the tag is the last. Tags are converted to BIOES.
inline Corpus parse_conll(std::istream& in, const ConllOptions& opts,
                          const std::string& name = "<input>") {
  Corpus corpus;
  corpus.path = name;
  corpus.labeled = opts.labeled;
  std::vector<std::vector<std::string>> raw_tags;
  Sentence current;
  std::vector<std::string> current_tags;
  std::size_t width = 0;
  const auto flush = [&] {
    if (!current.tokens.empty()) {
      corpus.sentences.push_back(std::move(current));
      raw_tags.push_back(std::move(current_tags));
    }
    current = Sentence{};
    current_tags.clear();
    width = 0;
  };
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cols = text::split_whitespace(line);
    if (cols.empty()) {
      flush();
      continue;
    }
    if (cols[0] == "-DOCSTART-") {
      flush();
      corpus.documents.push_back({corpus.sentences.size(), line});
      continue;
    }
    if (width == 0) {
      width = cols.size();
      if (opts.labeled && width < 2) {
        throw ParseError("labeled corpus line needs at least two columns", line_no);
      }
    } else if (cols.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " +
                           std::to_string(cols.size()),
                       line_no);
    }
    current.tokens.push_back(cols.front());
    if (opts.labeled) current_tags.push_back(cols.back());
    current.columns.push_back(std::move(cols));
    current.lines.push_back(line_no);
  }
  flush();

  if (opts.labeled) {
    TagDialect dialect = opts.dialect;
    if (dialect == TagDialect::kAuto) {
      std::vector<std::string> all;
      for (const auto& t : raw_tags) all.insert(all.end(), t.begin(), t.end());
      dialect = detect_dialect(all);
    }
    corpus.dialect = dialect;
    for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
      Sentence& sent = corpus.sentences[s];
      const auto spans = tags_to_spans(raw_tags[s], dialect, sent.lines);
      sent.tags = spans_to_bioes_strings(spans, sent.size());
    }
  }
  for (Sentence& s : corpus.sentences) {
    s.normalized.clear();
    for (const std::string& t : s.tokens) s.normalized.push_back(normalize_digits(t));
  }
  return corpus;
}

inline Corpus read_conll(const std::filesystem::path& path, const ConllOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_conll(in, opts, path.string());
}

/// Writes the stored columns (tag column replaced by the BIOES gold tag
/// when labeled), optionally followed by one extra column per token.
inline void write_conll(std::ostream& out, const Corpus& corpus,
                        const std::vector<std::vector<std::string>>* extra = nullptr) {
  std::size_t doc = 0;
  for (std::size_t s = 0; s < corpus.sentences.size(); ++s) {
    while (doc < corpus.documents.size() && corpus.documents[doc].before_sentence == s) {
      out << corpus.documents[doc].line << "\n\n";
      ++doc;
    }
    const Sentence& sent = corpus.sentences[s];
    for (std::size_t t = 0; t < sent.size(); ++t) {
      std::vector<std::string> cols = sent.columns[t];
      cols[0] = sent.tokens[t];
      if (corpus.labeled && !sent.tags.empty()) cols.back() = sent.tags[t];
      if (extra) cols.push_back((*extra)[s][t]);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        if (c) out << ' ';
        out << cols[c];
      }
      out << '\n';
    }
    out << '\n';
  }
  for (; doc < corpus.documents.size(); ++doc) out << corpus.documents[doc].line << "\n\n";
}

// Splits a token at every boundary between a digit and a non-digit.
inline std::vector<std::string> split_digit_runs(const std::string& token) {
  std::vector<std::string> pieces;
  std::string cur;
  for (char c : token) {
    if (!cur.empty() && text::is_ascii_digit(cur.back()) != text::is_ascii_digit(c)) {
      pieces.push_back(std::move(cur));
      cur.clear();
    }
    cur.push_back(c);
  }
  if (!cur.empty()) pieces.push_back(std::move(cur));
  return pieces;
}

/// Digit normalization, optionally preceded by digit-boundary splitting.
/// Split pieces inherit their token's entity membership; BIOES boundaries
/// are recomputed over the pieces.
inline void preprocess_tokens(Sentence& s, bool split_digits) {
  if (split_digits) {
    std::vector<EntitySpan> spans;
    if (!s.tags.empty()) spans = bioes_strings_to_spans(s.tags);
    Sentence out;
    std::vector<std::size_t> first_piece(s.size() + 1, 0);
    for (std::size_t t = 0; t < s.size(); ++t) {
      first_piece[t] = out.tokens.size();
      for (std::string& piece : split_digit_runs(s.tokens[t])) {
        std::vector<std::string> cols = s.columns[t];
        cols[0] = piece;
        out.columns.push_back(std::move(cols));
        out.tokens.push_back(std::move(piece));
        out.lines.push_back(t < s.lines.size() ? s.lines[t] : 0);
      }
    }
    first_piece[s.size()] = out.tokens.size();
    if (!s.tags.empty()) {
      for (EntitySpan& sp : spans) {
        sp.start = first_piece[sp.start];
        sp.end = first_piece[sp.end + 1] - 1;
      }
      out.tags = spans_to_bioes_strings(spans, out.tokens.size());
    }
    s.tokens = std::move(out.tokens);
    s.columns = std::move(out.columns);
    s.lines = std::move(out.lines);
    s.tags = std::move(out.tags);
  }
  s.normalized.clear();
  for (const std::string& t : s.tokens) s.normalized.push_back(normalize_digits(t));
}

inline void preprocess_corpus(Corpus& c, bool split_digits) {
  for (Sentence& s : c.sentences) preprocess_tokens(s, split_digits);
}

struct Batch {
  std::vector<std::size_t> sentences;  // indices into the corpus
  std::size_t length = 0;
};

/// Groups sentence indices by exact token count, shuffles within each group,
/// chunks each group into batches of at most `batch_size`, then shuffles the
/// batch order.
inline std::vector<Batch> make_batches(std::span<const std::size_t> lengths,
                                       std::size_t batch_size, Rng& rng) {
  if (batch_size == 0) throw ConfigError("mini-batch size must be >= 1");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < lengths.size(); ++i) groups[lengths[i]].push_back(i);
  std::vector<Batch> batches;
  for (auto& [len, ids] : groups) {
    rng.shuffle(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); i += batch_size) {
      Batch b;
      b.length = len;
      const std::size_t end = std::min(ids.size(), i + batch_size);
      b.sentences.assign(ids.begin() + static_cast<std::ptrdiff_t>(i),
                         ids.begin() + static_cast<std::ptrdiff_t>(end));
      batches.push_back(std::move(b));
    }
  }
  rng.shuffle(batches.begin(), batches.end());
  return batches;
}

inline std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> lengths;
  for (const Sentence& s : corpus.sentences) lengths.push_back(s.size());
  return make_batches(lengths, batch_size, rng);
}

struct Vocabularies {
  WordVocab words;
  CharVocab chars;
  TagSet tags;
};

inline Vocabularies build_vocabs(const Corpus& corpus,
                                 const PretrainedEmbeddings* pretrained = nullptr) {
  if (corpus.sentences.empty()) throw ConfigError("training corpus is empty");
  Vocabularies v;
  std::set<std::string> categories;
  for (const Sentence& s : corpus.sentences) {
    for (const std::string& tok : s.tokens) {
      v.words.add(tok);
      v.chars.add_word(tok);
    }
    for (const EntitySpan& sp : bioes_strings_to_spans(s.tags)) categories.insert(sp.category);
  }
  if (pretrained) {
    for (const std::string& key : pretrained->keys) v.words.add_key(key);
  }
  v.tags = TagSet(std::vector<std::string>(categories.begin(), categories.end()));
  return v;
}

}  // namespace nerkit

#endif  // NERKIT_DATA_IO_HPP_
