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

#ifndef NERKIT_TAGGING_HPP_
#define NERKIT_TAGGING_HPP_

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "nerkit/errors.hpp"

namespace nerkit {

enum class TagPos : int { kO = 0, kB, kI, kE, kS };

/// Parsed tag string: "O" or "<P>-<category>".
struct TagParts {
  char prefix = 'O';
  std::string category;
};

// Splits on the first dash. Throws ParseError (line 0) for malformed tags;
// callers that know the line rethrow with it.
inline TagParts parse_tag(std::string_view tag, std::string_view allowed_prefixes) {
  if (tag == "O") return {};
  const auto dash = tag.find('-');
  if (dash != 1 || tag.size() < 3) {
    throw ParseError("malformed tag '" + std::string(tag) + "'", 0);
  }
  const char p = tag[0];
  if (allowed_prefixes.find(p) == std::string_view::npos) {
    throw ParseError("unknown tag prefix in '" + std::string(tag) + "'", 0);
  }
  return {p, std::string(tag.substr(2))};
}

/// BIOES-expanded tag inventory. Id 0 is O; category c (sorted order) owns
/// ids 1 + 4c .. 4 + 4c for B, I, E, S.
class TagSet {
 public:
  TagSet() = default;

  explicit TagSet(std::vector<std::string> categories)
      : categories_(std::move(categories)) {
    std::sort(categories_.begin(), categories_.end());
    categories_.erase(std::unique(categories_.begin(), categories_.end()),
                      categories_.end());
  }

  const std::vector<std::string>& categories() const { return categories_; }
  std::size_t size() const { return 1 + 4 * categories_.size(); }

  TagPos pos(int id) const {
    if (id == 0) return TagPos::kO;
    return static_cast<TagPos>((id - 1) % 4 + 1);
  }

  // Category index, -1 for O.
  int category(int id) const { return id == 0 ? -1 : (id - 1) / 4; }

  int make(TagPos pos, int category) const {
    if (pos == TagPos::kO) return 0;
    return 1 + 4 * category + (static_cast<int>(pos) - 1);
  }

  std::optional<int> category_index(std::string_view name) const {
    auto it = std::lower_bound(categories_.begin(), categories_.end(), name);
    if (it == categories_.end() || *it != name) return std::nullopt;
    return static_cast<int>(it - categories_.begin());
  }

  std::string name(int id) const {
    if (id == 0) return "O";
    static constexpr char kPrefix[] = {'O', 'B', 'I', 'E', 'S'};
    return std::string(1, kPrefix[static_cast<int>(pos(id))]) + "-" +
           categories_[static_cast<std::size_t>(category(id))];
  }

  int id(std::string_view tag) const {
    const TagParts parts = parse_tag(tag, "BIES");
    if (parts.prefix == 'O') return 0;
    auto cat = category_index(parts.category);
    if (!cat) throw DataError("unknown tag category in '" + std::string(tag) + "'");
    static constexpr std::string_view kLetters = "OBIES";
    return make(static_cast<TagPos>(kLetters.find(parts.prefix)), *cat);
  }

  bool can_start(int id) const {
    const TagPos p = pos(id);
    return p == TagPos::kO || p == TagPos::kB || p == TagPos::kS;
  }

  bool can_end(int id) const {
    const TagPos p = pos(id);
    return p == TagPos::kO || p == TagPos::kE || p == TagPos::kS;
  }

  bool follows(int prev, int next) const {
    const TagPos pp = pos(prev);
    const TagPos np = pos(next);
    if (pp == TagPos::kB || pp == TagPos::kI) {
      return (np == TagPos::kI || np == TagPos::kE) &&
             category(prev) == category(next);
    }
    return np == TagPos::kO || np == TagPos::kB || np == TagPos::kS;
  }

  bool is_valid(std::span<const int> tags) const {
    if (tags.empty()) return true;
    if (!can_start(tags.front()) || !can_end(tags.back())) return false;
    for (std::size_t t = 1; t < tags.size(); ++t) {
      if (!follows(tags[t - 1], tags[t])) return false;
    }
    return true;
  }

  friend bool operator==(const TagSet&, const TagSet&) = default;

 private:
  std::vector<std::string> categories_;
};

struct EntitySpan {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::string category;

  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

inline std::vector<int> spans_to_bioes(std::span<const EntitySpan> spans,
                                       std::size_t length, const TagSet& tagset) {
  std::vector<int> tags(length, 0);
  std::vector<bool> used(length, false);
  for (const EntitySpan& s : spans) {
    if (s.start > s.end || s.end >= length) {
      throw DataError("span [" + std::to_string(s.start) + ", " +
                      std::to_string(s.end) + "] outside sentence of length " +
                      std::to_string(length));
    }
    auto cat = tagset.category_index(s.category);
    if (!cat) throw DataError("unknown category '" + s.category + "'");
    for (std::size_t t = s.start; t <= s.end; ++t) {
      if (used[t]) throw DataError("overlapping spans at token " + std::to_string(t));
      used[t] = true;
    }
    if (s.start == s.end) {
      tags[s.start] = tagset.make(TagPos::kS, *cat);
    } else {
      tags[s.start] = tagset.make(TagPos::kB, *cat);
      for (std::size_t t = s.start + 1; t < s.end; ++t) tags[t] = tagset.make(TagPos::kI, *cat);
      tags[s.end] = tagset.make(TagPos::kE, *cat);
    }
  }
  return tags;
}

/// Extracts spans from any tag sequence. Invalid sequences are repaired
/// left to right: an I or E with no open entity of its category opens one
/// as if it were B; an open entity is closed at the previous token by O,
/// B, S, a tag of another category, or the end of the sentence.
inline std::vector<EntitySpan> bioes_to_spans(std::span<const int> tags,
                                              const TagSet& tagset) {
  std::vector<EntitySpan> spans;
  int open_cat = -1;
  std::size_t open_start = 0;
  const auto close = [&](std::size_t end) {
    if (open_cat >= 0) {
      spans.push_back({open_start, end,
                       tagset.categories()[static_cast<std::size_t>(open_cat)]});
      open_cat = -1;
    }
  };
  for (std::size_t t = 0; t < tags.size(); ++t) {
    const TagPos p = tagset.pos(tags[t]);
    const int c = tagset.category(tags[t]);
    switch (p) {
      case TagPos::kO:
        if (t > 0) close(t - 1);
        break;
      case TagPos::kS:
        if (t > 0) close(t - 1);
        spans.push_back({t, t, tagset.categories()[static_cast<std::size_t>(c)]});
        break;
      case TagPos::kB:
        if (t > 0) close(t - 1);
        open_cat = c;
        open_start = t;
        break;
      case TagPos::kI:
      case TagPos::kE:
        if (open_cat != c) {
          if (t > 0) close(t - 1);
          open_cat = c;
          open_start = t;
        } else if (p == TagPos::kE) {
          close(t);
        }
        break;
    }
  }
  if (!tags.empty()) close(tags.size() - 1);
  return spans;
}

// Spans from IOB1 or BIO2 tag strings. An I-X continues an entity only when
// the previous tag has category X; B-X always starts a new one. This reading
// is correct for both dialects.
inline std::vector<EntitySpan> iob_to_spans(std::span<const std::string> tags,
                                            std::span<const std::size_t> lines = {}) {
  std::vector<EntitySpan> spans;
  std::string prev_cat;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    TagParts parts;
    try {
      parts = parse_tag(tags[t], "BI");
    } catch (const ParseError& e) {
      throw ParseError(e.what(), t < lines.size() ? lines[t] : 0);
    }
    if (parts.prefix == 'O') {
      prev_cat.clear();
      continue;
    }
    if (parts.prefix == 'B' || parts.category != prev_cat) {
      spans.push_back({t, t, parts.category});
    } else {
      spans.back().end = t;
    }
    prev_cat = parts.category;
  }
  return spans;
}

inline std::vector<EntitySpan> bioes_strings_to_spans(
    std::span<const std::string> tags, std::span<const std::size_t> lines = {}) {
  std::set<std::string> cats;
  std::vector<TagParts> parsed;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    try {
      parsed.push_back(parse_tag(tags[t], "BIES"));
    } catch (const ParseError& e) {
      throw ParseError(e.what(), t < lines.size() ? lines[t] : 0);
    }
    if (parsed.back().prefix != 'O') cats.insert(parsed.back().category);
  }
  const TagSet ts(std::vector<std::string>(cats.begin(), cats.end()));
  std::vector<int> ids;
  for (const std::string& tag : tags) ids.push_back(ts.id(tag));
  return bioes_to_spans(ids, ts);
}

inline std::vector<std::string> spans_to_bioes_strings(std::span<const EntitySpan> spans,
                                                       std::size_t length) {
  std::vector<std::string> out(length, "O");
  for (const EntitySpan& s : spans) {
    if (s.start == s.end) {
      out[s.start] = "S-" + s.category;
    } else {
      out[s.start] = "B-" + s.category;
      for (std::size_t t = s.start + 1; t < s.end; ++t) out[t] = "I-" + s.category;
      out[s.end] = "E-" + s.category;
    }
  }
  return out;
}

inline std::vector<std::string> convert_iob1_to_bioes(std::span<const std::string> tags,
                                                      std::span<const std::size_t> lines = {}) {
  return spans_to_bioes_strings(iob_to_spans(tags, lines), tags.size());
}

enum class TagDialect { kAuto, kIob1, kBio2, kBioes };

inline TagDialect parse_dialect(std::string_view s) {
  if (s == "auto") return TagDialect::kAuto;
  if (s == "iob1") return TagDialect::kIob1;
  if (s == "bio2" || s == "iob2") return TagDialect::kBio2;
  if (s == "bioes") return TagDialect::kBioes;
  throw ConfigError("unknown tag dialect '" + std::string(s) + "'");
}

// Auto-detection: any E- or S- tag means BIOES, otherwise IOB.
inline TagDialect detect_dialect(std::span<const std::string> tags) {
  for (const std::string& t : tags) {
    if (t.size() > 2 && t[1] == '-' && (t[0] == 'E' || t[0] == 'S')) return TagDialect::kBioes;
  }
  return TagDialect::kIob1;
}

inline std::vector<EntitySpan> tags_to_spans(std::span<const std::string> tags,
                                             TagDialect dialect,
                                             std::span<const std::size_t> lines = {}) {
  if (dialect == TagDialect::kBioes) return bioes_strings_to_spans(tags, lines);
  return iob_to_spans(tags, lines);
}

// ---------------------------------------------------------------------------
// Span-exact scoring

struct CategoryScore {
  std::size_t gold = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  double precision() const {
    return predicted == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(predicted);
  }
  double recall() const {
    return gold == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(gold);
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct EvalReport {
  CategoryScore overall;
  std::map<std::string, CategoryScore> categories;
  std::size_t sentences = 0;
  std::size_t tokens = 0;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f1() const { return overall.f1(); }
};

inline EvalReport evaluate_f1(std::span<const std::vector<EntitySpan>> gold,
                              std::span<const std::vector<EntitySpan>> predicted) {
  if (gold.size() != predicted.size()) {
    throw AlignmentError("gold has " + std::to_string(gold.size()) +
                         " sentences, predictions have " +
                         std::to_string(predicted.size()));
  }
  EvalReport report;
  report.sentences = gold.size();
  for (std::size_t s = 0; s < gold.size(); ++s) {
    std::set<std::tuple<std::size_t, std::size_t, std::string>> gold_set;
    for (const EntitySpan& g : gold[s]) {
      gold_set.emplace(g.start, g.end, g.category);
      ++report.categories[g.category].gold;
      ++report.overall.gold;
    }
    for (const EntitySpan& p : predicted[s]) {
      ++report.categories[p.category].predicted;
      ++report.overall.predicted;
      if (gold_set.count({p.start, p.end, p.category})) {
        ++report.categories[p.category].correct;
        ++report.overall.correct;
      }
    }
  }
  return report;
}

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

/// conlleval-style table followed by a key=value block.
inline std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line),
                "processed %zu tokens with %zu phrases; found: %zu phrases; correct: %zu.\n",
                r.tokens, r.overall.gold, r.overall.predicted, r.overall.correct);
  os << line;
  std::snprintf(line, sizeof(line),
                "%17s precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f\n", "overall",
                r.overall.precision(), r.overall.recall(), r.overall.f1());
  os << line;
  for (const auto& [cat, s] : r.categories) {
    std::snprintf(line, sizeof(line),
                  "%17s precision: %6.2f%%; recall: %6.2f%%; FB1: %6.2f  %zu\n",
                  cat.c_str(), s.precision(), s.recall(), s.f1(), s.predicted);
    os << line;
  }
  os << "\n";
  os << "overall_p=" << format_percent(r.overall.precision()) << "\n";
  os << "overall_r=" << format_percent(r.overall.recall()) << "\n";
  os << "overall_f1=" << format_percent(r.overall.f1()) << "\n";
  os << "gold=" << r.overall.gold << "\n";
  os << "predicted=" << r.overall.predicted << "\n";
  os << "correct=" << r.overall.correct << "\n";
  for (const auto& [cat, s] : r.categories) {
    os << "category=" << cat << " p=" << format_percent(s.precision())
       << " r=" << format_percent(s.recall()) << " f1=" << format_percent(s.f1())
       << " gold=" << s.gold << " predicted=" << s.predicted
       << " correct=" << s.correct << "\n";
  }
  return os.str();
}

}  // namespace nerkit

#endif  // NERKIT_TAGGING_HPP_
