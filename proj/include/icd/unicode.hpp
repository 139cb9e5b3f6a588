#pragma once

// UTF-8 decoding plus the minimal Unicode machinery the tokenizer needs:
// NFC normalization, simple lowercasing, and character-class queries.
// Tables live in unicode_data.hpp and are regenerated with
// tools/gen_unicode_tables.py.

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "icd/unicode_data.hpp"

namespace icd::uni {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes UTF-8, substituting U+FFFD for malformed sequences.
inline std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    unsigned char b = static_cast<unsigned char>(s[i]);
    char32_t cp = 0;
    size_t len = 0;
    if (b < 0x80) {
      cp = b;
      len = 1;
    } else if ((b & 0xE0) == 0xC0) {
      cp = b & 0x1F;
      len = 2;
    } else if ((b & 0xF0) == 0xE0) {
      cp = b & 0x0F;
      len = 3;
    } else if ((b & 0xF8) == 0xF0) {
      cp = b & 0x07;
      len = 4;
    } else {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    if (i + len > s.size()) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    bool ok = true;
    for (size_t k = 1; k < len; ++k) {
      unsigned char c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (c & 0x3F);
    }
    if (!ok || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF) ||
        (len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) {
      out.push_back(kReplacement);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += len;
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

inline std::string encode_utf8(const std::vector<char32_t>& cps) {
  std::string out;
  out.reserve(cps.size());
  for (char32_t cp : cps) append_utf8(out, cp);
  return out;
}

inline uint8_t combining_class(char32_t cp) {
  const auto* begin = std::begin(unicode_data::kCcc);
  const auto* end = std::end(unicode_data::kCcc);
  const auto* it = std::lower_bound(begin, end, cp, [](const unicode_data::CccEntry& e, char32_t c) {
    return e.cp < c;
  });
  return (it != end && it->cp == cp) ? it->ccc : 0;
}

inline char32_t simple_lower(char32_t cp) {
  const auto* begin = std::begin(unicode_data::kLower);
  const auto* end = std::end(unicode_data::kLower);
  const auto* it = std::lower_bound(begin, end, cp, [](const unicode_data::LowerEntry& e, char32_t c) {
    return e.cp < c;
  });
  return (it != end && it->cp == cp) ? it->lower : cp;
}

inline bool in_ranges(char32_t cp, const unicode_data::Range* begin, const unicode_data::Range* end) {
  const auto* it = std::upper_bound(begin, end, cp, [](char32_t c, const unicode_data::Range& r) {
    return c < r.lo;
  });
  if (it == begin) return false;
  --it;
  return cp >= it->lo && cp <= it->hi;
}

inline bool is_space(char32_t cp) {
  return in_ranges(cp, std::begin(unicode_data::kSpace), std::end(unicode_data::kSpace));
}

// Punctuation for tokenization: ASCII punctuation/symbols plus Unicode P* and S*.
inline bool is_punct(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
           (cp >= '{' && cp <= '~');
  }
  return in_ranges(cp, std::begin(unicode_data::kPunctOrSymbol), std::end(unicode_data::kPunctOrSymbol));
}

namespace detail {

constexpr char32_t kHangulSBase = 0xAC00;
constexpr char32_t kHangulLBase = 0x1100;
constexpr char32_t kHangulVBase = 0x1161;
constexpr char32_t kHangulTBase = 0x11A7;
constexpr int kHangulLCount = 19;
constexpr int kHangulVCount = 21;
constexpr int kHangulTCount = 28;
constexpr int kHangulNCount = kHangulVCount * kHangulTCount;
constexpr int kHangulSCount = kHangulLCount * kHangulNCount;

inline bool is_hangul_syllable(char32_t cp) {
  return cp >= kHangulSBase && cp < kHangulSBase + kHangulSCount;
}

inline void decompose_one(char32_t cp, std::vector<char32_t>& out) {
  if (is_hangul_syllable(cp)) {
    char32_t s = cp - kHangulSBase;
    out.push_back(kHangulLBase + s / kHangulNCount);
    out.push_back(kHangulVBase + (s % kHangulNCount) / kHangulTCount);
    if (s % kHangulTCount != 0) out.push_back(kHangulTBase + s % kHangulTCount);
    return;
  }
  const auto* begin = std::begin(unicode_data::kDecomp);
  const auto* end = std::end(unicode_data::kDecomp);
  const auto* it = std::lower_bound(begin, end, cp, [](const unicode_data::DecompEntry& e, char32_t c) {
    return e.cp < c;
  });
  if (it != end && it->cp == cp) {
    for (uint8_t k = 0; k < it->len; ++k) out.push_back(unicode_data::kDecompPool[it->offset + k]);
  } else {
    out.push_back(cp);
  }
}

inline char32_t compose_pair(char32_t a, char32_t b) {
  // Hangul LV and LVT composition.
  if (a >= kHangulLBase && a < kHangulLBase + kHangulLCount && b >= kHangulVBase &&
      b < kHangulVBase + kHangulVCount) {
    return kHangulSBase + ((a - kHangulLBase) * kHangulVCount + (b - kHangulVBase)) * kHangulTCount;
  }
  if (is_hangul_syllable(a) && (a - kHangulSBase) % kHangulTCount == 0 && b > kHangulTBase &&
      b < kHangulTBase + kHangulTCount) {
    return a + (b - kHangulTBase);
  }
  const auto* begin = std::begin(unicode_data::kComp);
  const auto* end = std::end(unicode_data::kComp);
  const auto* it = std::lower_bound(begin, end, std::pair<char32_t, char32_t>{a, b},
                                    [](const unicode_data::CompEntry& e, const std::pair<char32_t, char32_t>& p) {
                                      return e.first != p.first ? e.first < p.first : e.second < p.second;
                                    });
  if (it != end && it->first == a && it->second == b) return it->composed;
  return 0;
}

}  // namespace detail

// Canonical decomposition + canonical ordering + canonical composition.
inline std::vector<char32_t> nfc(const std::vector<char32_t>& in) {
  std::vector<char32_t> d;
  d.reserve(in.size());
  for (char32_t cp : in) detail::decompose_one(cp, d);

  // Canonical ordering: bubble adjacent nonzero-ccc pairs that are out of order.
  for (size_t i = 1; i < d.size(); ++i) {
    uint8_t c = combining_class(d[i]);
    if (c == 0) continue;
    size_t j = i;
    while (j > 0) {
      uint8_t prev = combining_class(d[j - 1]);
      if (prev <= c) break;
      std::swap(d[j - 1], d[j]);
      --j;
    }
  }

  std::vector<char32_t> out;
  out.reserve(d.size());
  // Standard canonical composition over starter + mark runs.
  ptrdiff_t last_starter = -1;
  uint8_t last_ccc = 0;
  for (char32_t cp : d) {
    uint8_t c = combining_class(cp);
    // Not blocked: the char directly follows the starter, or every char in
    // between has a strictly smaller combining class.
    if (last_starter >= 0 && (last_ccc == 0 || last_ccc < c)) {
      if (char32_t comp = detail::compose_pair(out[last_starter], cp); comp != 0) {
        out[last_starter] = comp;
        continue;
      }
    }
    out.push_back(cp);
    if (c == 0) {
      last_starter = static_cast<ptrdiff_t>(out.size()) - 1;
      last_ccc = 0;
    } else {
      last_ccc = c;
    }
  }
  return out;
}

}  // namespace icd::uni
