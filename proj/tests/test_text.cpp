#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "icd/text.hpp"

using icd::count_ngrams;
using icd::ngrams;
using icd::normalize;
using icd::Sentence;
using icd::tokenize;

TEST_CASE("normalize trims, collapses and lowercases") {
  CHECK(normalize("  A  Dog runs. ") == "a dog runs.");
  CHECK(normalize("") == "");
  CHECK(normalize("Throw—catch") == "throw—catch");  // em-dash survives
  CHECK(normalize("a\tb\n c") == "a b c");
  CHECK(normalize("   ") == "");
}

TEST_CASE("normalize applies NFC so byte variants compare equal") {
  // "e" + combining acute vs precomposed U+00E9
  CHECK(normalize("Café") == normalize("Café"));
  CHECK(normalize("Café") == "café");
  // combining marks reorder canonically: dot-below (ccc 220) before acute (230)
  CHECK(normalize("q̣́") == normalize("q̣́"));
}

TEST_CASE("normalize lowercases beyond ASCII") {
  CHECK(normalize("ÄPFEL") == "äpfel");             // Ä -> ä
  CHECK(normalize("ΑΒ") == "αβ");         // Greek Alpha Beta
}

TEST_CASE("tokenize splits whitespace and detaches punctuation") {
  CHECK(tokenize("a dog runs.") == std::vector<std::string>{"a", "dog", "runs", "."});
  CHECK(tokenize("don't stop") == std::vector<std::string>{"don", "'", "t", "stop"});
  CHECK(tokenize("") == std::vector<std::string>{});
  CHECK(tokenize("throw—catch") == std::vector<std::string>{"throw", "—", "catch"});
  CHECK(tokenize("wait...") == std::vector<std::string>{"wait", ".", ".", "."});
}

TEST_CASE("tokenize never yields empty tokens") {
  for (const char* text : {"  .  ", "a  b", "!!", " ' ", "one, two"}) {
    for (const auto& tok : tokenize(normalize(text))) CHECK(!tok.empty());
  }
}

TEST_CASE("tokenize o normalize is idempotent on its own output") {
  std::vector<std::string> samples = {
      "  A  Dog runs. ", "don't STOP", "Throw—catch now!", "Café au lait, please.",
      "1. Numbered line?", "",
  };
  for (const auto& raw : samples) {
    auto first = tokenize(normalize(raw));
    std::string joined;
    for (size_t i = 0; i < first.size(); ++i) {
      if (i) joined += " ";
      joined += first[i];
    }
    CHECK(tokenize(normalize(joined)) == first);
  }
}

TEST_CASE("ngrams basics") {
  std::vector<std::string> abc = {"a", "b", "c"};
  auto grams = ngrams(abc, 2);
  REQUIRE(grams.size() == 2);
  CHECK(grams[0] == icd::NGram{"a", "b"});
  CHECK(grams[1] == icd::NGram{"b", "c"});
  CHECK(ngrams(abc, 4).empty());
  CHECK(ngrams({"a", "a", "a"}, 1).size() == 3);
}

TEST_CASE("ngram count matches max(0, len-k+1) for random inputs") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    size_t len = rng() % 12;
    size_t k = 1 + rng() % 6;
    std::vector<std::string> tokens(len, "t");
    size_t expected = len + 1 > k ? len - k + 1 : 0;
    CHECK(ngrams(tokens, k).size() == expected);
  }
}

TEST_CASE("count_ngrams aggregates across lists") {
  auto c = count_ngrams({{"a", "b"}, {"a", "b"}}, 2);
  CHECK(c.total == 2);
  REQUIRE(c.counts.size() == 1);
  CHECK(c.counts.at({"a", "b"}) == 2);

  auto c2 = count_ngrams({{"a", "b", "c"}}, 2);
  CHECK(c2.total == 2);
  CHECK(c2.counts.size() == 2);

  auto empty = count_ngrams({}, 3);
  CHECK(empty.total == 0);
  CHECK(empty.counts.empty());
}

TEST_CASE("count_ngrams totals are permutation invariant") {
  std::vector<std::vector<std::string>> lists = {
      {"a", "b", "c"}, {"b", "c"}, {"c", "a", "b", "a"}, {"z"}};
  auto base = count_ngrams(lists, 2);
  std::vector<std::vector<std::string>> shuffled = {lists[2], lists[0], lists[3], lists[1]};
  auto other = count_ngrams(shuffled, 2);
  CHECK(base.total == other.total);
  CHECK(base.counts == other.counts);
}

TEST_CASE("normalize is idempotent") {
  std::mt19937 rng(5);
  const std::vector<std::string> pieces = {"A", "dog", "  ", "\t", "Café", "Ä", "!",
                                           "—", "don't", "3.14", "Α", "q̣́"};
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    size_t len = rng() % 10;
    for (size_t i = 0; i < len; ++i) text += pieces[rng() % pieces.size()];
    std::string once = normalize(text);
    CHECK(normalize(once) == once);
  }
}

TEST_CASE("sentence invariant: tokens equal tokenize(normalize(raw))") {
  auto s = Sentence::make("  The Quick,  brown FOX! ");
  CHECK(s.tokens == tokenize(normalize(s.raw)));
  CHECK(s.raw == "  The Quick,  brown FOX! ");
  CHECK(icd::sentence_key(s) == "the quick, brown fox!");
}
