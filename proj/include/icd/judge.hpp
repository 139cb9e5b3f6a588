#pragma once

// LLM-as-judge diversity ratings and the agreement arithmetic used to
// compare them with human annotations: five-category parsing, repeated-run
// averaging, rating binarization and Cohen's kappa.

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "icd/error.hpp"
#include "icd/gateway.hpp"
#include "icd/text.hpp"

namespace icd {

enum class DiversityCategory {
  very_similar = 1,
  somewhat_similar = 2,
  neutral = 3,
  somewhat_diverse = 4,
  highly_diverse = 5,
};

inline const char* to_string(DiversityCategory c) {
  switch (c) {
    case DiversityCategory::very_similar: return "very similar";
    case DiversityCategory::somewhat_similar: return "somewhat similar";
    case DiversityCategory::neutral: return "neutral";
    case DiversityCategory::somewhat_diverse: return "somewhat diverse";
    case DiversityCategory::highly_diverse: return "highly diverse";
  }
  return "unknown";
}

// Case-insensitive category search anywhere in the response; the earliest
// match wins, the longer phrase on overlap. "highly similar" is accepted as
// a synonym of the lowest category.
inline std::optional<DiversityCategory> parse_category(const std::string& response) {
  std::string lower = response;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

  struct Phrase {
    const char* text;
    DiversityCategory category;
  };
  static const Phrase phrases[] = {
      {"very similar", DiversityCategory::very_similar},
      {"highly similar", DiversityCategory::very_similar},
      {"somewhat similar", DiversityCategory::somewhat_similar},
      {"neutral", DiversityCategory::neutral},
      {"somewhat diverse", DiversityCategory::somewhat_diverse},
      {"highly diverse", DiversityCategory::highly_diverse},
  };

  size_t best_pos = std::string::npos;
  size_t best_len = 0;
  std::optional<DiversityCategory> best;
  for (const auto& p : phrases) {
    size_t pos = lower.find(p.text);
    size_t len = std::string(p.text).size();
    if (pos == std::string::npos) continue;
    if (pos < best_pos || (pos == best_pos && len > best_len)) {
      best_pos = pos;
      best_len = len;
      best = p.category;
    }
  }
  return best;
}

struct DiversityRating {
  std::string set_id;
  std::vector<DiversityCategory> runs;
  double mean = 0.0;  // arithmetic mean of the per-run values, in [1,5]
};

// Renders the judge template with the sentence set in its {PRV} slot and
// asks `repeats` times under distinct attempt indices; each run gets one
// re-ask when no category token can be found.
inline DiversityRating judge_diversity(std::span<const Sentence> set, ChatBackend& backend,
                                       const PromptTemplate& judge_template,
                                       const GenerationConfig& config, int repeats,
                                       std::string set_id, std::vector<Transcript>* transcripts = nullptr) {
  if (set.empty()) throw EvaluationError("judge_diversity: empty sentence set");
  if (repeats < 1) throw ConfigError("judge_diversity: repeats must be >= 1");

  std::vector<Sentence> prior(set.begin(), set.end());
  std::string prompt = render_prompt(judge_template, {}, "", static_cast<int>(set.size()), prior);
  const int max_tokens = config.max_tokens_per_sentence;

  DiversityRating rating;
  rating.set_id = std::move(set_id);
  double sum = 0.0;
  for (int run = 0; run < repeats; ++run) {
    std::optional<DiversityCategory> category;
    for (int ask = 0; ask < 2 && !category; ++ask) {
      Transcript t = backend.complete(prompt, config, max_tokens, 2 * run + ask);
      category = parse_category(t.response_text);
      if (category) t.parsed_sentences = {std::string(to_string(*category))};
      if (transcripts) transcripts->push_back(std::move(t));
    }
    if (!category) {
      throw EvaluationError("judge_diversity: no category token in response for set " +
                            rating.set_id + ", run " + std::to_string(run));
    }
    rating.runs.push_back(*category);
    sum += static_cast<double>(static_cast<int>(*category));
  }
  rating.mean = sum / static_cast<double>(repeats);
  return rating;
}

enum class BinaryRating { low, high };

inline const char* to_string(BinaryRating b) { return b == BinaryRating::high ? "high" : "low"; }

// Mean > 3 is high, < 3 low; an exact 3 maps to low unless tie_is_high.
inline BinaryRating binarize(double mean, bool tie_is_high = false) {
  if (mean < 1.0 || mean > 5.0) throw EvaluationError("binarize: mean outside [1,5]");
  if (mean > 3.0) return BinaryRating::high;
  if (mean < 3.0) return BinaryRating::low;
  return tie_is_high ? BinaryRating::high : BinaryRating::low;
}

struct KappaReport {
  double p_observed = 0.0;
  double p_expected = 0.0;
  double kappa = 0.0;
  // counts[a][b]: rows = first rater low/high, cols = second rater low/high
  size_t counts[2][2] = {{0, 0}, {0, 0}};
};

inline KappaReport cohen_kappa_report(std::span<const BinaryRating> a, std::span<const BinaryRating> b) {
  if (a.size() != b.size()) throw EvaluationError("cohen_kappa: label lists differ in length");
  if (a.empty()) throw EvaluationError("cohen_kappa: empty label lists");
  KappaReport r;
  for (size_t i = 0; i < a.size(); ++i) {
    r.counts[a[i] == BinaryRating::high ? 1 : 0][b[i] == BinaryRating::high ? 1 : 0]++;
  }
  const double n = static_cast<double>(a.size());
  r.p_observed = (static_cast<double>(r.counts[0][0]) + static_cast<double>(r.counts[1][1])) / n;
  double a_high = static_cast<double>(r.counts[1][0] + r.counts[1][1]) / n;
  double b_high = static_cast<double>(r.counts[0][1] + r.counts[1][1]) / n;
  r.p_expected = a_high * b_high + (1.0 - a_high) * (1.0 - b_high);
  if (r.p_expected == 1.0) {
    r.kappa = 1.0;  // both raters constant and identical
  } else {
    r.kappa = (r.p_observed - r.p_expected) / (1.0 - r.p_expected);
  }
  return r;
}

inline double cohen_kappa(std::span<const BinaryRating> a, std::span<const BinaryRating> b) {
  return cohen_kappa_report(a, b).kappa;
}

inline double cohen_kappa(const std::vector<BinaryRating>& a, const std::vector<BinaryRating>& b) {
  return cohen_kappa_report(std::span<const BinaryRating>(a), std::span<const BinaryRating>(b)).kappa;
}

// ---------------------------------------------------------------------------
// Human ratings

// ratings[rater][set]; every cell must be filled with a value in {1..5}.
struct RatingTable {
  std::vector<std::string> set_ids;
  std::vector<std::string> rater_ids;
  std::vector<std::vector<std::optional<double>>> ratings;
};

// Per-set means after recentring every rater to the scale midpoint 3 (and
// clamping to [1,5]), which removes constant rater bias before averaging.
// A single rater has no one to be biased against and keeps raw ratings.
inline std::vector<double> normalize_likert(const RatingTable& table) {
  const size_t raters = table.rater_ids.size();
  const size_t sets = table.set_ids.size();
  for (size_t r = 0; r < raters; ++r) {
    for (size_t s = 0; s < sets; ++s) {
      if (!table.ratings[r][s]) {
        throw DataError("normalize_likert: missing rating for rater " + table.rater_ids[r] +
                        ", set " + table.set_ids[s]);
      }
    }
  }
  std::vector<double> out(sets, 0.0);
  for (size_t r = 0; r < raters; ++r) {
    double mean = 0.0;
    for (size_t s = 0; s < sets; ++s) mean += *table.ratings[r][s];
    mean /= static_cast<double>(sets);
    for (size_t s = 0; s < sets; ++s) {
      double adjusted = *table.ratings[r][s];
      if (raters > 1) adjusted = std::clamp(adjusted - mean + 3.0, 1.0, 5.0);
      out[s] += adjusted;
    }
  }
  for (double& v : out) v /= static_cast<double>(raters);
  return out;
}

// Delimited table: one "set_id<sep>rater_id<sep>rating" row per line, with
// tab, comma or space separators. Lines starting with '#' are skipped.
inline RatingTable load_human_ratings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("ratings file not found: " + path.string());

  std::map<std::string, size_t> set_index, rater_index;
  std::vector<std::tuple<std::string, std::string, double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    for (char& c : line)
      if (c == ',' || c == '\t') c = ' ';
    std::istringstream ss(line);
    std::string set_id, rater_id;
    double value = 0.0;
    if (!(ss >> set_id >> rater_id >> value)) {
      throw DataError("ratings line " + std::to_string(line_no) + ": expected set, rater, rating");
    }
    if (value < 1.0 || value > 5.0) {
      throw DataError("ratings line " + std::to_string(line_no) + ": rating outside [1,5]");
    }
    set_index.emplace(set_id, set_index.size());
    rater_index.emplace(rater_id, rater_index.size());
    rows.emplace_back(set_id, rater_id, value);
  }

  RatingTable table;
  table.set_ids.resize(set_index.size());
  for (const auto& [id, i] : set_index) table.set_ids[i] = id;
  table.rater_ids.resize(rater_index.size());
  for (const auto& [id, i] : rater_index) table.rater_ids[i] = id;
  table.ratings.assign(table.rater_ids.size(),
                       std::vector<std::optional<double>>(table.set_ids.size()));
  for (const auto& [set_id, rater_id, value] : rows) {
    table.ratings[rater_index[rater_id]][set_index[set_id]] = value;
  }
  return table;
}

}  // namespace icd
