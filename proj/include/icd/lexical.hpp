#pragma once

// Lexical metrics: sentence-level BLEU against references, pairwise
// self-BLEU within a generation set, and corpus-level Distinct-k/Entropy-k.
// Scores that the literature reports as percentages live on a 0..100 scale.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <span>
#include <vector>

#include "icd/error.hpp"
#include "icd/text.hpp"

namespace icd {

struct BleuConfig {
  int max_n = 4;                  // 1..4
  double smoothing_epsilon = 0.1; // substituted for zero precisions at n >= 2
};

// Smoothed sentence BLEU with per-order clipping against the max reference
// count. A zero unigram precision collapses the score to 0; for higher
// orders a zero match count is replaced by epsilon / (candidate gram count).
// Orders for which the hypothesis is too short to produce any gram are
// dropped from the geometric mean.
inline double sentence_bleu(const Sentence& hypothesis, std::span<const Sentence> references,
                            const BleuConfig& config = {}) {
  if (config.max_n < 1 || config.max_n > 4) {
    throw EvaluationError("sentence_bleu: max_n must be in [1,4]");
  }
  if (config.smoothing_epsilon <= 0) {
    throw EvaluationError("sentence_bleu: smoothing_epsilon must be > 0");
  }
  if (references.empty()) {
    throw EvaluationError("sentence_bleu: reference list is empty");
  }
  if (hypothesis.tokens.empty()) {
    throw EvaluationError("sentence_bleu: hypothesis has no tokens");
  }
  for (const auto& r : references) {
    if (r.tokens.empty()) throw EvaluationError("sentence_bleu: reference has no tokens");
  }

  const size_t c = hypothesis.tokens.size();
  // Reference length closest to the candidate length; ties go to the shorter.
  size_t r_len = references[0].tokens.size();
  for (const auto& r : references) {
    size_t len = r.tokens.size();
    auto diff = [&](size_t x) { return x > c ? x - c : c - x; };
    if (diff(len) < diff(r_len) || (diff(len) == diff(r_len) && len < r_len)) r_len = len;
  }

  double log_sum = 0.0;
  int used_orders = 0;
  for (int n = 1; n <= config.max_n; ++n) {
    auto hyp_grams = count_ngrams({hypothesis.tokens}, static_cast<size_t>(n));
    if (hyp_grams.total == 0) continue;  // hypothesis shorter than n

    std::map<NGram, size_t> max_ref;
    for (const auto& ref : references) {
      auto rc = count_ngrams({ref.tokens}, static_cast<size_t>(n));
      for (const auto& [gram, cnt] : rc.counts) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, cnt);
      }
    }

    size_t clipped = 0;
    for (const auto& [gram, cnt] : hyp_grams.counts) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) clipped += std::min(cnt, it->second);
    }

    double p;
    if (clipped > 0) {
      p = static_cast<double>(clipped) / static_cast<double>(hyp_grams.total);
    } else if (n == 1) {
      return 0.0;  // no unigram overlap at all
    } else {
      p = config.smoothing_epsilon / static_cast<double>(hyp_grams.total);
    }
    log_sum += std::log(p);
    ++used_orders;
  }

  double score = std::exp(log_sum / used_orders);
  if (c < r_len) score *= std::exp(1.0 - static_cast<double>(r_len) / static_cast<double>(c));
  return 100.0 * score;
}

inline double sentence_bleu(const Sentence& hypothesis, const std::vector<Sentence>& references,
                            const BleuConfig& config = {}) {
  return sentence_bleu(hypothesis, std::span<const Sentence>(references), config);
}

// Mean sentence BLEU over all ordered pairs (i, j), i != j, each scored with
// the single other sentence as reference. Lower means more diverse.
inline double self_bleu(std::span<const Sentence> set, int n, double smoothing_epsilon = 0.1) {
  if (set.size() < 2) throw EvaluationError("self_bleu: need at least 2 sentences");
  BleuConfig cfg{n, smoothing_epsilon};
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < set.size(); ++i) {
    for (size_t j = 0; j < set.size(); ++j) {
      if (i == j) continue;
      sum += sentence_bleu(set[i], std::span<const Sentence>(&set[j], 1), cfg);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

inline double self_bleu(const std::vector<Sentence>& set, int n, double eps = 0.1) {
  return self_bleu(std::span<const Sentence>(set), n, eps);
}

// 100 * unique k-grams / total k-grams over the whole corpus.
inline double distinct_k(std::span<const Sentence> corpus, size_t k) {
  std::vector<std::vector<std::string>> lists;
  lists.reserve(corpus.size());
  for (const auto& s : corpus) lists.push_back(s.tokens);
  auto counts = count_ngrams(lists, k);
  if (counts.total == 0) {
    throw EvaluationError("distinct_k: no sentence yields a k-gram for k=" + std::to_string(k));
  }
  return 100.0 * static_cast<double>(counts.counts.size()) / static_cast<double>(counts.total);
}

inline double distinct_k(const std::vector<Sentence>& corpus, size_t k) {
  return distinct_k(std::span<const Sentence>(corpus), k);
}

// Shannon entropy (natural log) of the corpus k-gram distribution.
inline double entropy_k(std::span<const Sentence> corpus, size_t k) {
  std::vector<std::vector<std::string>> lists;
  lists.reserve(corpus.size());
  for (const auto& s : corpus) lists.push_back(s.tokens);
  auto counts = count_ngrams(lists, k);
  if (counts.total == 0) {
    throw EvaluationError("entropy_k: no sentence yields a k-gram for k=" + std::to_string(k));
  }
  double h = 0.0;
  const double total = static_cast<double>(counts.total);
  for (const auto& [gram, cnt] : counts.counts) {
    double p = static_cast<double>(cnt) / total;
    h -= p * std::log(p);
  }
  return h;
}

inline double entropy_k(const std::vector<Sentence>& corpus, size_t k) {
  return entropy_k(std::span<const Sentence>(corpus), k);
}

// Quality scoring keeps the best candidate, mirroring how generated sets are
// compared against references in the benchmarks this toolkit targets.
inline double best_candidate_bleu(std::span<const Sentence> candidates,
                                  std::span<const Sentence> references,
                                  const BleuConfig& config = {}) {
  if (candidates.empty()) throw EvaluationError("best_candidate_bleu: no candidates");
  double best = 0.0;
  bool first = true;
  for (const auto& cand : candidates) {
    double s = sentence_bleu(cand, references, config);
    if (first || s > best) {
      best = s;
      first = false;
    }
  }
  return best;
}

inline double best_candidate_bleu(const std::vector<Sentence>& candidates,
                                  const std::vector<Sentence>& references,
                                  const BleuConfig& config = {}) {
  return best_candidate_bleu(std::span<const Sentence>(candidates),
                             std::span<const Sentence>(references), config);
}

}  // namespace icd
