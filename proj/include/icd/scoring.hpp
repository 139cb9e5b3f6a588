#pragma once

// Score orientation and the combined metrics. Diversity metrics on the
// 0..100 scale where *lower* means more diverse (self-BLEU, self-cosSim,
// self-BERTScore) are flipped to 100-raw before entering any combination,
// so that every combined score works with "higher is more diverse".

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "icd/error.hpp"

namespace icd {

enum class MetricId {
  self_bleu3,
  self_bleu4,
  distinct_k,
  entropy_k,
  self_cos_sim,
  self_bertscore,
  bleu3,
  bleu4,
  spice,
  bertscore,
};

enum class Orientation { lower_is_diverse, higher_is_diverse };

inline Orientation orientation_of(MetricId id) {
  switch (id) {
    case MetricId::self_bleu3:
    case MetricId::self_bleu4:
    case MetricId::self_cos_sim:
    case MetricId::self_bertscore:
      return Orientation::lower_is_diverse;
    default:
      return Orientation::higher_is_diverse;
  }
}

inline std::string to_string(MetricId id) {
  switch (id) {
    case MetricId::self_bleu3: return "self_bleu3";
    case MetricId::self_bleu4: return "self_bleu4";
    case MetricId::distinct_k: return "distinct_4";
    case MetricId::entropy_k: return "entropy_4";
    case MetricId::self_cos_sim: return "self_cossim";
    case MetricId::self_bertscore: return "self_bertscore";
    case MetricId::bleu3: return "bleu3";
    case MetricId::bleu4: return "bleu4";
    case MetricId::spice: return "spice";
    case MetricId::bertscore: return "bertscore";
  }
  return "unknown";
}

inline MetricId metric_from_string(std::string_view name) {
  if (name == "self_bleu3") return MetricId::self_bleu3;
  if (name == "self_bleu4") return MetricId::self_bleu4;
  if (name == "distinct_4" || name == "distinct_k") return MetricId::distinct_k;
  if (name == "entropy_4" || name == "entropy_k") return MetricId::entropy_k;
  if (name == "self_cossim") return MetricId::self_cos_sim;
  if (name == "self_bertscore") return MetricId::self_bertscore;
  if (name == "bleu3") return MetricId::bleu3;
  if (name == "bleu4") return MetricId::bleu4;
  if (name == "spice") return MetricId::spice;
  if (name == "bertscore") return MetricId::bertscore;
  throw ConfigError("unknown metric id: " + std::string(name));
}

struct DiversityScore {
  MetricId metric;
  double raw = 0.0;
};

// Oriented diversity on a "higher = more diverse" scale. A negative raw
// value (possible for a mean cosine) still flips monotonically.
inline double diversity_score(const DiversityScore& score) {
  if (orientation_of(score.metric) == Orientation::lower_is_diverse) {
    if (score.raw > 100.0) {
      throw EvaluationError("diversity_score: " + to_string(score.metric) +
                            " raw value exceeds 100");
    }
    return 100.0 - score.raw;
  }
  return score.raw;
}

// 2DQ/(D+Q) with D the oriented diversity; 0 when both vanish.
inline double harmonic_mean(const DiversityScore& diversity, double quality) {
  if (quality < 0.0) throw EvaluationError("harmonic_mean: quality must be >= 0");
  double d = diversity_score(diversity);
  if (d + quality == 0.0) return 0.0;
  return 2.0 * d * quality / (d + quality);
}

// One aggregate table row: metric id -> value.
struct ReportRow {
  std::string dataset;
  std::string method;
  std::map<std::string, double> metrics;
};

using MetricPair = std::pair<MetricId, MetricId>;  // (diversity, quality)

// Harmonic mean for each (diversity, quality) pair on each row; a row
// missing either metric is an error.
inline std::vector<std::map<std::string, double>> harmonic_pairs(
    const std::vector<ReportRow>& rows, const std::vector<MetricPair>& pairs) {
  std::vector<std::map<std::string, double>> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    std::map<std::string, double> cell;
    for (const auto& [div_id, qual_id] : pairs) {
      auto div_it = row.metrics.find(to_string(div_id));
      auto qual_it = row.metrics.find(to_string(qual_id));
      if (div_it == row.metrics.end() || qual_it == row.metrics.end()) {
        throw EvaluationError("harmonic_pairs: row " + row.dataset + "/" + row.method +
                              " is missing " +
                              (div_it == row.metrics.end() ? to_string(div_id) : to_string(qual_id)));
      }
      cell[to_string(div_id) + "+" + to_string(qual_id)] =
          harmonic_mean({div_id, div_it->second}, qual_it->second);
    }
    out.push_back(std::move(cell));
  }
  return out;
}

// Per-instance slice of an evaluation, kept in the report so every
// aggregate column can be recomputed from the file alone.
struct InstanceMetrics {
  std::string instance_id;
  std::vector<std::string> generations;
  std::map<std::string, double> values;
};

struct MetricReport {
  std::string dataset_id;
  std::string method_id;
  nlohmann::ordered_json config;               // metric configuration block
  std::map<std::string, double> columns;       // aggregate row
  std::map<std::string, double> pair_columns;  // extra harmonic-mean pairs
  std::vector<InstanceMetrics> instances;
};

// Macro-averages the per-instance values, merges corpus-level columns
// (Distinct/Entropy/FBD), and derives the combined column when both of its
// inputs are present.
inline MetricReport build_report(const std::vector<InstanceMetrics>& instances,
                                 const std::map<std::string, double>& corpus_values,
                                 std::string dataset_id, std::string method_id,
                                 nlohmann::ordered_json config = {}) {
  MetricReport report;
  report.dataset_id = std::move(dataset_id);
  report.method_id = std::move(method_id);
  report.config = std::move(config);
  report.instances = instances;

  if (!instances.empty()) {
    for (size_t i = 1; i < instances.size(); ++i) {
      if (instances[i].values.size() != instances[0].values.size() ||
          !std::equal(instances[i].values.begin(), instances[i].values.end(),
                      instances[0].values.begin(),
                      [](const auto& a, const auto& b) { return a.first == b.first; })) {
        throw EvaluationError("build_report: instance " + instances[i].instance_id +
                              " was scored with a different metric configuration");
      }
    }
    for (const auto& [key, unused] : instances[0].values) {
      double sum = 0.0;
      for (const auto& inst : instances) sum += inst.values.at(key);
      report.columns[key] = sum / static_cast<double>(instances.size());
    }
  }
  for (const auto& [key, value] : corpus_values) report.columns[key] = value;

  auto sb4 = report.columns.find(to_string(MetricId::self_bleu4));
  auto bert = report.columns.find(to_string(MetricId::bertscore));
  if (sb4 != report.columns.end() && bert != report.columns.end()) {
    report.columns["harmonic"] = harmonic_mean({MetricId::self_bleu4, sb4->second}, bert->second);
  }
  return report;
}

inline nlohmann::ordered_json report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["dataset"] = report.dataset_id;
  j["method"] = report.method_id;
  j["config"] = report.config;
  j["columns"] = report.columns;
  if (!report.pair_columns.empty()) j["harmonic_pairs"] = report.pair_columns;
  nlohmann::ordered_json insts = nlohmann::ordered_json::array();
  for (const auto& inst : report.instances) {
    nlohmann::ordered_json ji;
    ji["id"] = inst.instance_id;
    ji["generations"] = inst.generations;
    ji["values"] = inst.values;
    insts.push_back(std::move(ji));
  }
  j["instances"] = std::move(insts);
  return j;
}

// Aligned two-column text rendering of the aggregate row.
inline std::string report_to_text(const MetricReport& report) {
  std::string out;
  out += "dataset: " + report.dataset_id + "\n";
  out += "method:  " + report.method_id + "\n";
  size_t width = 0;
  for (const auto& [key, unused] : report.columns) width = std::max(width, key.size());
  for (const auto& [key, unused] : report.pair_columns) width = std::max(width, key.size());
  char buf[64];
  for (const auto& [key, value] : report.columns) {
    std::snprintf(buf, sizeof(buf), "%10.4f", value);
    out += key + std::string(width - key.size() + 2, ' ') + buf + "\n";
  }
  for (const auto& [key, value] : report.pair_columns) {
    std::snprintf(buf, sizeof(buf), "%10.4f", value);
    out += key + std::string(width - key.size() + 2, ' ') + buf + "\n";
  }
  if (!report.config.empty()) out += "config: " + report.config.dump() + "\n";
  return out;
}

}  // namespace icd
