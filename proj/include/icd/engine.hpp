#pragma once

// The diversified-generation protocol: default prompting, the two-step
// diversified prompt with its low-diversity trigger, and exhaustive
// best-subset selection over the union of everything generated.

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "icd/corpus.hpp"
#include "icd/error.hpp"
#include "icd/gateway.hpp"
#include "icd/lexical.hpp"
#include "icd/provider.hpp"
#include "icd/scoring.hpp"

namespace icd {

enum class SetSource { default_prompt, step1, step2, selected };

inline const char* to_string(SetSource s) {
  switch (s) {
    case SetSource::default_prompt: return "default";
    case SetSource::step1: return "step1";
    case SetSource::step2: return "step2";
    case SetSource::selected: return "selected";
  }
  return "unknown";
}

inline SetSource set_source_from_string(std::string_view s) {
  if (s == "default") return SetSource::default_prompt;
  if (s == "step1") return SetSource::step1;
  if (s == "step2") return SetSource::step2;
  if (s == "selected") return SetSource::selected;
  throw DataError("unknown set source: " + std::string(s));
}

// An ordered, deduplicated set of candidate sentences with provenance.
struct GenerationSet {
  std::string instance_id;
  std::vector<Sentence> sentences;
  SetSource source = SetSource::default_prompt;
  bool had_duplicates = false;  // dedup removed at least one member
};

// Dedup under normalized equality, keeping first occurrences in order.
inline GenerationSet make_generation_set(std::string instance_id, std::vector<Sentence> sentences,
                                         SetSource source) {
  GenerationSet set;
  set.instance_id = std::move(instance_id);
  set.source = source;
  std::unordered_set<std::string> seen;
  for (auto& s : sentences) {
    if (seen.insert(sentence_key(s)).second) {
      set.sentences.push_back(std::move(s));
    } else {
      set.had_duplicates = true;
    }
  }
  return set;
}

enum class TriggerMode { duplicate_sentence, threshold };

struct IcdConfig {
  int n = 3;
  MetricId f = MetricId::self_bleu3;
  TriggerMode trigger = TriggerMode::duplicate_sentence;
  double trigger_tau = 50.0;  // threshold mode: fire when oriented f < tau
  size_t corpus_k = 4;        // k for distinct/entropy when used as f
  double bleu_smoothing_epsilon = 0.1;
};

// Oriented set-diversity function ("higher = more diverse").
using DiversityFn = std::function<double(std::span<const Sentence>)>;

// Builds the evaluator for a metric id. Semantic metrics need an embedding
// provider; sets too small for a pairwise metric count as maximally diverse
// so that degenerate subsets still order deterministically.
inline DiversityFn make_diversity_fn(MetricId f, const IcdConfig& config,
                                     EmbeddingProvider* provider = nullptr) {
  switch (f) {
    case MetricId::self_bleu3:
    case MetricId::self_bleu4: {
      int n = f == MetricId::self_bleu3 ? 3 : 4;
      double eps = config.bleu_smoothing_epsilon;
      return [f, n, eps](std::span<const Sentence> set) {
        double raw = set.size() < 2 ? 0.0 : self_bleu(set, n, eps);
        return diversity_score({f, raw});
      };
    }
    case MetricId::distinct_k: {
      size_t k = config.corpus_k;
      return [k](std::span<const Sentence> set) {
        return diversity_score({MetricId::distinct_k, distinct_k(set, k)});
      };
    }
    case MetricId::entropy_k: {
      size_t k = config.corpus_k;
      return [k](std::span<const Sentence> set) {
        return diversity_score({MetricId::entropy_k, entropy_k(set, k)});
      };
    }
    case MetricId::self_cos_sim: {
      if (!provider) throw ConfigError("diversity metric self_cossim requires an embedding provider");
      return [provider](std::span<const Sentence> set) {
        if (set.size() < 2) return 100.0;
        std::vector<std::string> texts;
        for (const auto& s : set) texts.push_back(s.raw);
        auto emb = provider->embed_sentences(texts, EmbeddingKind::sentence);
        return diversity_score({MetricId::self_cos_sim, self_cos_sim(emb)});
      };
    }
    case MetricId::self_bertscore: {
      if (!provider) throw ConfigError("diversity metric self_bertscore requires an embedding provider");
      return [provider](std::span<const Sentence> set) {
        if (set.size() < 2) return 100.0;
        std::vector<std::string> texts;
        for (const auto& s : set) texts.push_back(s.raw);
        auto emb = provider->embed_tokens(texts);
        return diversity_score({MetricId::self_bertscore, self_bertscore(emb)});
      };
    }
    default:
      throw ConfigError("metric " + to_string(f) + " is not a diversity metric");
  }
}

// True when the generated sentences call for the second diversification
// step. Duplicate mode fires on any normalized-equal pair; threshold mode
// fires when the oriented diversity score falls below tau.
inline bool low_diversity_trigger(std::span<const Sentence> sentences, const IcdConfig& config,
                                  const DiversityFn& f = {}) {
  if (sentences.empty()) return false;
  if (config.trigger == TriggerMode::duplicate_sentence) {
    std::unordered_set<std::string> seen;
    for (const auto& s : sentences) {
      if (!seen.insert(sentence_key(s)).second) return true;
    }
    return false;
  }
  if (sentences.size() < 2) return false;
  if (!f) throw ConfigError("threshold trigger requires a diversity function");
  return f(sentences) < config.trigger_tau;
}

// ---------------------------------------------------------------------------
// Algorithm: exhaustive size-N subset search

struct SubsetChoice {
  std::vector<size_t> indices;  // into the union, ascending
  double score = 0.0;
};

struct SelectionResult {
  GenerationSet selected;
  std::vector<Sentence> union_sentences;
  std::vector<SubsetChoice> evaluated;  // every subset in enumeration order
  size_t chosen = 0;                    // index into evaluated
};

namespace detail {

inline double combination_count(size_t n, size_t k) {
  double c = 1.0;
  for (size_t i = 0; i < k; ++i) c *= static_cast<double>(n - i) / static_cast<double>(i + 1);
  return c;
}

}  // namespace detail

// Union in canonical order (default set first, then step-1 then step-2
// members not already present), then argmax of f over all C(|union|, N)
// subsets enumerated lexicographically. Ties go to the later subset, which
// is what a ">= alpha" update yields.
inline SelectionResult subset_select(const GenerationSet& s_def, std::span<const GenerationSet> s_div,
                                     int n, const DiversityFn& f, size_t max_subsets = 1000000) {
  if (n < 1) throw ConfigError("subset_select: N must be >= 1");

  SelectionResult result;
  std::unordered_set<std::string> seen;
  auto add = [&](const Sentence& s) {
    if (seen.insert(sentence_key(s)).second) result.union_sentences.push_back(s);
  };
  for (const auto& s : s_def.sentences) add(s);
  for (const auto& set : s_div)
    for (const auto& s : set.sentences) add(s);

  const size_t u = result.union_sentences.size();
  const size_t k = static_cast<size_t>(n);
  if (u < k) {
    throw EvaluationError("subset_select: union has " + std::to_string(u) +
                          " candidates, fewer than N=" + std::to_string(n));
  }
  if (detail::combination_count(u, k) > static_cast<double>(max_subsets)) {
    throw ConfigError("subset_select: C(" + std::to_string(u) + "," + std::to_string(k) +
                      ") exceeds the enumeration guard");
  }

  std::vector<size_t> idx(k);
  for (size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<Sentence> subset(k);

  auto advance = [&]() {
    for (size_t i = k; i-- > 0;) {
      if (idx[i] != i + u - k) {
        ++idx[i];
        for (size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
        return true;
      }
    }
    return false;
  };

  bool first = true;
  double alpha = 0.0;
  do {
    for (size_t i = 0; i < k; ++i) subset[i] = result.union_sentences[idx[i]];
    double score = f(subset);
    if (first || score >= alpha) {
      alpha = score;
      result.chosen = result.evaluated.size();
      first = false;
    }
    result.evaluated.push_back(SubsetChoice{idx, score});
  } while (advance());

  std::vector<Sentence> chosen_sentences;
  for (size_t i : result.evaluated[result.chosen].indices) {
    chosen_sentences.push_back(result.union_sentences[i]);
  }
  result.selected = make_generation_set(s_def.instance_id, std::move(chosen_sentences),
                                        SetSource::selected);
  return result;
}

// ---------------------------------------------------------------------------
// Orchestration

struct PromptBundle {
  PromptTemplate default_tpl;
  PromptTemplate step1_tpl;
  PromptTemplate step2_tpl;
  std::vector<FewShotExample> few_shot;
};

struct InstanceRunResult {
  Instance instance;
  std::optional<GenerationSet> default_set;
  std::optional<GenerationSet> step1_set;
  std::optional<GenerationSet> step2_set;
  std::optional<GenerationSet> selected_set;
  bool trigger_fired = false;
  std::vector<Transcript> transcripts;
  std::vector<SubsetChoice> selection_rationale;
  std::vector<std::string> union_raws;
  size_t selection_chosen = 0;
};

class IcdEngine {
 public:
  IcdEngine(ChatBackend& backend, PromptBundle prompts, IcdConfig icd, GenerationConfig gen,
            EmbeddingProvider* provider = nullptr)
      : backend_(backend),
        prompts_(std::move(prompts)),
        icd_(icd),
        gen_(gen),
        diversity_fn_(make_diversity_fn(icd.f, icd, provider)) {}

  const IcdConfig& config() const { return icd_; }
  const DiversityFn& diversity_fn() const { return diversity_fn_; }

  GenerationSet generate_default(const Instance& instance, std::vector<Transcript>& transcripts) const {
    auto prompt = render_prompt(prompts_.default_tpl, prompts_.few_shot, instance.input_text(),
                                icd_.n, {});
    auto comp = run_completion(prompt, instance.id);
    append(transcripts, comp.transcripts);
    return make_generation_set(instance.id, comp.sentences, SetSource::default_prompt);
  }

  // Step 1 always runs; step 2 only when the trigger fires on the raw
  // (pre-dedup) step-1 sentences.
  std::pair<GenerationSet, std::optional<GenerationSet>> generate_diversified(
      const Instance& instance, std::vector<Transcript>& transcripts, bool* fired = nullptr) const {
    auto prompt1 = render_prompt(prompts_.step1_tpl, prompts_.few_shot, instance.input_text(),
                                 icd_.n, {});
    auto comp1 = run_completion(prompt1, instance.id);
    append(transcripts, comp1.transcripts);
    GenerationSet step1 = make_generation_set(instance.id, comp1.sentences, SetSource::step1);

    bool trigger = low_diversity_trigger(comp1.sentences, icd_, diversity_fn_);
    if (fired) *fired = trigger;
    if (!trigger) return {std::move(step1), std::nullopt};

    auto prompt2 = render_prompt(prompts_.step2_tpl, prompts_.few_shot, instance.input_text(),
                                 icd_.n, comp1.sentences);
    auto comp2 = run_completion(prompt2, instance.id);
    append(transcripts, comp2.transcripts);
    GenerationSet step2 = make_generation_set(instance.id, comp2.sentences, SetSource::step2);
    return {std::move(step1), std::move(step2)};
  }

  InstanceRunResult run_default(const Instance& instance) const {
    InstanceRunResult r;
    r.instance = instance;
    r.default_set = generate_default(instance, r.transcripts);
    return r;
  }

  InstanceRunResult run_diversified(const Instance& instance) const {
    InstanceRunResult r;
    r.instance = instance;
    auto [step1, step2] = generate_diversified(instance, r.transcripts, &r.trigger_fired);
    r.step1_set = std::move(step1);
    r.step2_set = std::move(step2);
    return r;
  }

  // Fills the result as it goes, so a failure part-way still leaves the
  // completed sets and transcripts behind for persistence.
  void icd_run_into(const Instance& instance, InstanceRunResult& r) const {
    r.instance = instance;
    r.default_set = generate_default(instance, r.transcripts);
    auto [step1, step2] = generate_diversified(instance, r.transcripts, &r.trigger_fired);
    r.step1_set = std::move(step1);
    r.step2_set = std::move(step2);

    std::vector<GenerationSet> div_sets;
    div_sets.push_back(*r.step1_set);
    if (r.step2_set) div_sets.push_back(*r.step2_set);
    SelectionResult sel = subset_select(*r.default_set, div_sets, icd_.n, diversity_fn_);
    r.selected_set = std::move(sel.selected);
    r.selection_rationale = std::move(sel.evaluated);
    r.selection_chosen = sel.chosen;
    for (const auto& s : sel.union_sentences) r.union_raws.push_back(s.raw);
  }

  InstanceRunResult icd_run(const Instance& instance) const {
    InstanceRunResult r;
    icd_run_into(instance, r);
    return r;
  }

 private:
  SentenceCompletion run_completion(const std::string& prompt, const std::string& instance_id) const {
    try {
      return complete_sentences(backend_, prompt, gen_, icd_.n);
    } catch (const ParseShortfallError& e) {
      throw ParseShortfallError("instance " + instance_id + ": " + e.what());
    }
  }

  static void append(std::vector<Transcript>& dst, std::vector<Transcript>& src) {
    for (auto& t : src) dst.push_back(std::move(t));
  }

  ChatBackend& backend_;
  PromptBundle prompts_;
  IcdConfig icd_;
  GenerationConfig gen_;
  DiversityFn diversity_fn_;
};

}  // namespace icd
