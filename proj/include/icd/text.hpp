#pragma once

// Deterministic text normalization, tokenization and n-gram extraction.
// Every lexical metric in the toolkit runs on top of these primitives, so
// their behaviour is pinned down by tests rather than left to a third-party
// tokenizer.

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "icd/unicode.hpp"

namespace icd {

// Trims, collapses whitespace runs to single spaces, applies Unicode NFC,
// lowercases. Empty input stays empty.
inline std::string normalize(std::string_view raw) {
  std::vector<char32_t> cps = uni::nfc(uni::decode_utf8(raw));
  for (char32_t& cp : cps) cp = uni::simple_lower(cp);

  std::vector<char32_t> out;
  out.reserve(cps.size());
  bool pending_space = false;
  for (char32_t cp : cps) {
    if (uni::is_space(cp)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(U' ');
      pending_space = false;
    }
    out.push_back(cp);
  }
  return uni::encode_utf8(out);
}

// Whitespace split with punctuation characters detached as standalone
// single-character tokens. Expects normalized text but tolerates anything.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(word);
      word.clear();
    }
  };
  for (char32_t cp : uni::decode_utf8(text)) {
    if (uni::is_space(cp)) {
      flush();
    } else if (uni::is_punct(cp)) {
      flush();
      std::string p;
      uni::append_utf8(p, cp);
      tokens.push_back(std::move(p));
    } else {
      uni::append_utf8(word, cp);
    }
  }
  flush();
  return tokens;
}

// One candidate or reference sentence. `tokens` is always
// tokenize(normalize(raw)); construct through Sentence::make.
struct Sentence {
  std::string raw;
  std::vector<std::string> tokens;

  static Sentence make(std::string_view raw) {
    Sentence s;
    s.raw = std::string(raw);
    s.tokens = tokenize(normalize(raw));
    return s;
  }

  bool operator==(const Sentence& other) const { return raw == other.raw; }
};

// Dedup/equality key: two sentences count as "the same" when their
// normalized forms match.
inline std::string sentence_key(const Sentence& s) { return normalize(s.raw); }

inline std::vector<Sentence> make_sentences(const std::vector<std::string>& raws) {
  std::vector<Sentence> out;
  out.reserve(raws.size());
  for (const auto& r : raws) out.push_back(Sentence::make(r));
  return out;
}

using NGram = std::vector<std::string>;

// All k-grams of a token list, in order. Shorter-than-k input yields none.
inline std::vector<NGram> ngrams(const std::vector<std::string>& tokens, size_t k) {
  std::vector<NGram> out;
  if (k == 0 || tokens.size() < k) return out;
  out.reserve(tokens.size() - k + 1);
  for (size_t i = 0; i + k <= tokens.size(); ++i) {
    out.emplace_back(tokens.begin() + i, tokens.begin() + i + k);
  }
  return out;
}

struct NGramCounts {
  size_t k = 1;
  std::map<NGram, size_t> counts;
  size_t total = 0;
};

inline NGramCounts count_ngrams(const std::vector<std::vector<std::string>>& token_lists, size_t k) {
  NGramCounts c;
  c.k = k;
  for (const auto& tokens : token_lists) {
    for (auto& g : ngrams(tokens, k)) {
      ++c.counts[std::move(g)];
      ++c.total;
    }
  }
  return c;
}

}  // namespace icd
