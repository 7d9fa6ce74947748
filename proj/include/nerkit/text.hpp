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

// UTF-8 decoding and locale-independent letter case for the scripts the
// taggers see in practice (ASCII, Latin-1, Latin Extended-A, Greek,
// Cyrillic). Code points outside those blocks are caseless.

#ifndef NERKIT_TEXT_HPP_
#define NERKIT_TEXT_HPP_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace nerkit::text {

constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes UTF-8; invalid bytes decode to U+FFFD one byte at a time.
inline std::u32string decode_utf8(std::string_view s) {
  std::u32string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      extra = 1;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      extra = 2;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      extra = 3;
      cp = b0 & 0x07;
    } else {
      out.push_back(kReplacementChar);
      ++i;
      continue;
    }
    if (i + static_cast<std::size_t>(extra) >= s.size()) {
      out.push_back(kReplacementChar);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      const auto b = static_cast<unsigned char>(s[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (b & 0x3F);
    }
    if (!ok) {
      out.push_back(kReplacementChar);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += static_cast<std::size_t>(extra) + 1;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline std::string encode_utf8(std::u32string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t cp : s) append_utf8(out, cp);
  return out;
}

inline bool is_upper(char32_t c) {
  if (c >= U'A' && c <= U'Z') return true;
  if (c < 0x80) return false;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return true;
  if (c >= 0x100 && c <= 0x137) return c % 2 == 0;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 1;
  if (c >= 0x14A && c <= 0x177) return c % 2 == 0;
  if (c == 0x178 || c == 0x179 || c == 0x17B || c == 0x17D) return true;
  if (c == 0x386 || (c >= 0x388 && c <= 0x38F && c != 0x38B && c != 0x38D))
    return true;
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return true;
  if (c >= 0x400 && c <= 0x42F) return true;
  return false;
}

inline bool is_lower(char32_t c) {
  if (c >= U'a' && c <= U'z') return true;
  if (c < 0x80) return false;
  if (c == 0xB5 || c == 0xAA || c == 0xBA) return true;
  if (c >= 0xDF && c <= 0xFF && c != 0xF7) return true;
  if (c >= 0x100 && c <= 0x137) return c % 2 == 1;
  if (c == 0x138) return true;
  if (c >= 0x139 && c <= 0x148) return c % 2 == 0;
  if (c == 0x149) return true;
  if (c >= 0x14A && c <= 0x177) return c % 2 == 1;
  if (c == 0x17A || c == 0x17C || c == 0x17E || c == 0x17F) return true;
  if (c == 0x390 || (c >= 0x3AC && c <= 0x3CE)) return true;
  if (c >= 0x430 && c <= 0x45F) return true;
  return false;
}

inline bool is_letter(char32_t c) { return is_upper(c) || is_lower(c); }

inline char32_t to_lower(char32_t c) {
  if (!is_upper(c)) return c;
  if (c < 0x80) return c + 32;
  if (c <= 0xDE) return c + 32;
  if (c <= 0x177) return c + 1;
  if (c == 0x178) return 0xFF;
  if (c <= 0x17D) return c + 1;
  if (c == 0x386) return 0x3AC;
  if (c >= 0x388 && c <= 0x38A) return c + 37;
  if (c == 0x38C) return 0x3CC;
  if (c == 0x38E || c == 0x38F) return c + 63;
  if (c >= 0x391 && c <= 0x3AB) return c + 32;
  if (c >= 0x400 && c <= 0x40F) return c + 80;
  if (c >= 0x410 && c <= 0x42F) return c + 32;
  return c;
}

inline std::string to_lower(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char32_t c : decode_utf8(s)) append_utf8(out, to_lower(c));
  return out;
}

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits on runs of ASCII whitespace.
inline std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace nerkit::text

#endif  // NERKIT_TEXT_HPP_
