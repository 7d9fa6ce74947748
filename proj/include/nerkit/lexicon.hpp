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

// Gazetteer features: entry normalization, n-gram matching against
// per-category entry sets with overlap resolution, and BIOES / YES-NO
// encoding of the accepted matches.

#ifndef NERKIT_LEXICON_HPP_
#define NERKIT_LEXICON_HPP_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nerkit/errors.hpp"
#include "nerkit/text.hpp"

namespace nerkit {

// ---------------------------------------------------------------------------
// Penn Treebank tokenization (the classic tokenizer.sed rule set).

inline std::vector<std::string> ptb_tokenize(std::string_view input) {
  struct Rule {
    std::regex pattern;
    const char* replacement;
  };
  static const std::vector<Rule> rules = [] {
    const auto r = [](const char* p) { return std::regex(p, std::regex::ECMAScript); };
    return std::vector<Rule>{
        {r("^\""), "`` "},
        {r("([ (\\[{<])\""), "$1 `` "},
        {r("\\.\\.\\."), " ... "},
        {r("([,;:@#$%&])"), " $1 "},
        {r("([^.])([.])([\\])}>\"']*)[ \\t]*$"), "$1 $2$3 "},
        {r("([?!])"), " $1 "},
        {r("([\\]\\[(){}<>])"), " $1 "},
        {r("--"), " -- "},
        {r("$"), " "},
        {r("^"), " "},
        {r("\""), " '' "},
        {r("([^'])' "), "$1 ' "},
        {r("'([sSmMdD]) "), " '$1 "},
        {r("'ll "), " 'll "},
        {r("'re "), " 're "},
        {r("'ve "), " 've "},
        {r("n't "), " n't "},
        {r("'LL "), " 'LL "},
        {r("'RE "), " 'RE "},
        {r("'VE "), " 'VE "},
        {r("N'T "), " N'T "},
        {r(" ([Cc])annot "), " $1an not "},
        {r(" ([Dd])'ye "), " $1' ye "},
        {r(" ([Gg])imme "), " $1im me "},
        {r(" ([Gg])onna "), " $1on na "},
        {r(" ([Gg])otta "), " $1ot ta "},
        {r(" ([Ll])emme "), " $1em me "},
        {r(" ([Mm])ore'n "), " $1ore 'n "},
        {r(" '([Tt])is "), " '$1 is "},
        {r(" '([Tt])was "), " '$1 was "},
        {r(" ([Ww])anna "), " $1an na "},
    };
  }();
  std::string s(input);
  for (const Rule& rule : rules) {
    // The final-period rule is anchored at end of input; the others apply
    // everywhere.
    s = std::regex_replace(s, rule.pattern, rule.replacement,
                           std::regex_constants::format_default);
  }
  return text::split_whitespace(s);
}

inline constexpr std::string_view kTrailingPunctuation = ".,;:/\\?";

/// Removes parenthesized text, strips trailing punctuation, tokenizes and
/// lower-cases. An empty result means the entry should be skipped.
inline std::vector<std::string> normalize_entry(std::string_view raw) {
  std::string s(raw);
  static const std::regex parens("\\([^()]*\\)");
  for (;;) {
    std::string next = std::regex_replace(s, parens, " ");
    if (next == s) break;
    s = std::move(next);
  }
  std::string_view v = text::trim(s);
  while (!v.empty() && (kTrailingPunctuation.find(v.back()) != std::string_view::npos ||
                        text::is_space(v.back()))) {
    v.remove_suffix(1);
  }
  std::vector<std::string> tokens = ptb_tokenize(v);
  for (std::string& t : tokens) t = text::to_lower(t);
  return tokens;
}

// ---------------------------------------------------------------------------
// Lexicon

enum class MatchMode { kExact, kPartial, kCollobert };
enum class LexEncoding { kBioes, kYesNo };

inline MatchMode parse_match_mode(std::string_view s) {
  if (s == "exact") return MatchMode::kExact;
  if (s == "partial") return MatchMode::kPartial;
  if (s == "collobert") return MatchMode::kCollobert;
  throw ConfigError("unknown match mode '" + std::string(s) +
                    "' (expected exact, partial or collobert)");
}

inline std::string to_string(MatchMode m) {
  switch (m) {
    case MatchMode::kExact: return "exact";
    case MatchMode::kPartial: return "partial";
    case MatchMode::kCollobert: return "collobert";
  }
  return "";
}

inline LexEncoding parse_lex_encoding(std::string_view s) {
  if (s == "bioes") return LexEncoding::kBioes;
  if (s == "yn") return LexEncoding::kYesNo;
  throw ConfigError("unknown lexicon encoding '" + std::string(s) +
                    "' (expected bioes or yn)");
}

inline std::string to_string(LexEncoding e) {
  return e == LexEncoding::kBioes ? "bioes" : "yn";
}

/// How an n-gram relates to the entries of one category.
struct NgramInfo {
  bool exact = false;        // equals an entry
  bool half_prefix = false;  // proper prefix covering >= ceil(len/2) tokens
  bool half_suffix = false;  // proper suffix covering >= ceil(len/2) tokens
  bool any_prefix = false;   // proper prefix of any length
};

inline std::string ngram_key(std::span<const std::string> tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) key.push_back('\x1f');
    key += tokens[i];
  }
  return key;
}

class Lexicon {
 public:
  struct Category {
    std::string name;
    std::set<std::vector<std::string>> entries;
    std::size_t max_length = 0;
    std::unordered_map<std::string, NgramInfo> index;
    bool short_partials = false;
  };

  Lexicon() = default;

  // Categories whose single-token partial matches are kept.
  static bool is_person_category(std::string_view name) {
    const std::string n = text::to_lower(name);
    return n == "per" || n == "pers" || n == "person";
  }

  std::size_t add_category(const std::string& name) {
    for (std::size_t c = 0; c < categories_.size(); ++c) {
      if (categories_[c].name == name) return c;
    }
    Category cat;
    cat.name = name;
    cat.short_partials = is_person_category(name);
    categories_.push_back(std::move(cat));
    return categories_.size() - 1;
  }

  // Entry tokens are lower-cased here. Returns false for duplicates and
  // empty entries.
  bool add_entry(const std::string& category, std::vector<std::string> tokens) {
    if (tokens.empty()) return false;
    for (std::string& t : tokens) t = text::to_lower(t);
    Category& cat = categories_[add_category(category)];
    if (!cat.entries.insert(tokens).second) return false;
    const std::size_t len = tokens.size();
    cat.max_length = std::max(cat.max_length, len);
    const std::size_t half = (len + 1) / 2;
    std::span<const std::string> all(tokens);
    cat.index[ngram_key(all)].exact = true;
    for (std::size_t n = 1; n < len; ++n) {
      NgramInfo& pre = cat.index[ngram_key(all.first(n))];
      pre.any_prefix = true;
      if (n >= half) pre.half_prefix = true;
      if (n >= half) cat.index[ngram_key(all.last(n))].half_suffix = true;
    }
    return true;
  }

  const std::vector<Category>& categories() const { return categories_; }
  std::size_t num_categories() const { return categories_.size(); }

  std::vector<std::string> category_names() const {
    std::vector<std::string> out;
    for (const Category& c : categories_) out.push_back(c.name);
    return out;
  }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const Category& c : categories_) n += c.entries.size();
    return n;
  }

  std::size_t skipped_entries() const { return skipped_; }
  void note_skipped() { ++skipped_; }

 private:
  std::vector<Category> categories_;
  std::size_t skipped_ = 0;
};

enum class LexMark : int { kB = 0, kI = 1, kO = 2, kE = 3, kS = 4 };

inline char mark_letter(LexMark m) { return "BIOES"[static_cast<int>(m)]; }

/// marks[c][t]: mark of token t for category c.
using MatchMarks = std::vector<std::vector<LexMark>>;

/// One candidate match: a span plus whether its first token may carry B and
/// its last token may carry E.
struct LexMatch {
  std::size_t start = 0;
  std::size_t length = 0;
  bool exact = false;
  bool begins = false;
  bool ends = false;
};

inline void apply_match_marks(const LexMatch& m, std::vector<LexMark>& row) {
  if (m.length == 1) {
    row[m.start] = m.begins && m.ends ? LexMark::kS
                   : m.begins         ? LexMark::kB
                                      : LexMark::kE;
    return;
  }
  for (std::size_t k = 0; k < m.length; ++k) row[m.start + k] = LexMark::kI;
  if (m.begins) row[m.start] = LexMark::kB;
  if (m.ends) row[m.start + m.length - 1] = LexMark::kE;
}

// Candidate for the n-gram at [start, start+length) under the given mode,
// or nothing.
inline std::optional<LexMatch> classify_ngram(const Lexicon::Category& cat,
                                              const NgramInfo& info, std::size_t start,
                                              std::size_t length, MatchMode mode) {
  LexMatch m{start, length, false, false, false};
  if (info.exact) {
    m.exact = m.begins = m.ends = true;
    return m;
  }
  switch (mode) {
    case MatchMode::kExact:
      return std::nullopt;
    case MatchMode::kCollobert:
      if (!info.any_prefix) return std::nullopt;
      m.begins = true;
      return m;
    case MatchMode::kPartial:
      if (!info.half_prefix && !info.half_suffix) return std::nullopt;
      if (length < 2 && !cat.short_partials) return std::nullopt;
      m.begins = info.half_prefix;
      m.ends = info.half_suffix;
      return m;
  }
  return std::nullopt;
}

// Greedy selection in priority order: exact before partial (except in
// collobert mode), then longer, then earlier.
inline std::vector<LexMatch> resolve_overlaps(std::vector<LexMatch> candidates,
                                              MatchMode mode, std::size_t length) {
  const bool exact_first = mode != MatchMode::kCollobert;
  std::sort(candidates.begin(), candidates.end(),
            [exact_first](const LexMatch& a, const LexMatch& b) {
              if (exact_first && a.exact != b.exact) return a.exact;
              if (a.length != b.length) return a.length > b.length;
              return a.start < b.start;
            });
  std::vector<bool> taken(length, false);
  std::vector<LexMatch> accepted;
  for (const LexMatch& m : candidates) {
    bool free = true;
    for (std::size_t k = 0; k < m.length && free; ++k) free = !taken[m.start + k];
    if (!free) continue;
    for (std::size_t k = 0; k < m.length; ++k) taken[m.start + k] = true;
    accepted.push_back(m);
  }
  return accepted;
}

inline std::vector<LexMatch> match_category(const Lexicon::Category& cat,
                                            std::span<const std::string> tokens,
                                            MatchMode mode) {
  std::vector<LexMatch> candidates;
  const std::size_t T = tokens.size();
  for (std::size_t n = 1; n <= std::min(cat.max_length, T); ++n) {
    for (std::size_t s = 0; s + n <= T; ++s) {
      auto it = cat.index.find(ngram_key(tokens.subspan(s, n)));
      if (it == cat.index.end()) continue;
      if (auto m = classify_ngram(cat, it->second, s, n, mode)) candidates.push_back(*m);
    }
  }
  return resolve_overlaps(std::move(candidates), mode, T);
}

inline MatchMarks match_sentence(const Lexicon& lex, std::span<const std::string> tokens,
                                 MatchMode mode) {
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (const std::string& t : tokens) lowered.push_back(text::to_lower(t));
  MatchMarks marks(lex.num_categories(), std::vector<LexMark>(tokens.size(), LexMark::kO));
  for (std::size_t c = 0; c < lex.num_categories(); ++c) {
    for (const LexMatch& m : match_category(lex.categories()[c], lowered, mode)) {
      apply_match_marks(m, marks[c]);
    }
  }
  return marks;
}

inline std::size_t lexicon_feature_width(LexEncoding e) {
  return e == LexEncoding::kBioes ? 5 : 1;
}

/// Per-token feature vectors: for each category in order, a 5-d one-hot in
/// B, I, O, E, S order (BIOES) or a single 0/1 (YES/NO).
inline std::vector<std::vector<double>> encode_lexicon_features(const MatchMarks& marks,
                                                                LexEncoding encoding) {
  const std::size_t T = marks.empty() ? 0 : marks.front().size();
  const std::size_t w = lexicon_feature_width(encoding);
  std::vector<std::vector<double>> out(T, std::vector<double>(marks.size() * w, 0.0));
  for (std::size_t c = 0; c < marks.size(); ++c) {
    for (std::size_t t = 0; t < T; ++t) {
      const LexMark m = marks[c][t];
      if (encoding == LexEncoding::kBioes) {
        out[t][c * w + static_cast<std::size_t>(m)] = 1.0;
      } else {
        out[t][c] = m == LexMark::kO ? 0.0 : 1.0;
      }
    }
  }
  return out;
}

/// Reads "CATEGORY<TAB>raw entry" lines. With a non-empty category map,
/// labels are translated through it and unknown labels are an error; the
/// category list is then the sorted set of mapped names. Otherwise every
/// label found becomes a category, sorted by name.
inline Lexicon load_lexicon(const std::filesystem::path& path,
                            const std::map<std::string, std::string>& category_map = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon '" + path.string() + "'");
  struct Raw {
    std::string category;
    std::string entry;
    std::size_t line;
  };
  std::vector<Raw> rows;
  std::set<std::string> names;
  for (const auto& [label, name] : category_map) names.insert(name);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError("lexicon line has no tab separator: '" + line + "'", line_no);
    }
    std::string label = line.substr(0, tab);
    if (!category_map.empty()) {
      auto it = category_map.find(label);
      if (it == category_map.end()) {
        throw ParseError("unknown lexicon category '" + label + "' in line '" + line + "'",
                         line_no);
      }
      label = it->second;
    } else {
      names.insert(label);
    }
    rows.push_back({label, line.substr(tab + 1), line_no});
  }
  Lexicon lex;
  for (const std::string& n : names) lex.add_category(n);
  for (const Raw& r : rows) {
    std::vector<std::string> tokens = normalize_entry(r.entry);
    if (tokens.empty()) {
      lex.note_skipped();
      continue;
    }
    lex.add_entry(r.category, std::move(tokens));
  }
  return lex;
}

}  // namespace nerkit

#endif  // NERKIT_LEXICON_HPP_
