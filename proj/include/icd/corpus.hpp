#pragma once

// Benchmark dataset loading and the mixture-of-experts training-data
// export. All inputs are line-delimited JSON; the per-benchmark field
// mapping is documented in the README.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "icd/error.hpp"
#include "icd/text.hpp"

namespace icd {

enum class TaskKind { concepts_to_sentence, statement_to_explanation, concept_pair };

inline const char* to_string(TaskKind t) {
  switch (t) {
    case TaskKind::concepts_to_sentence: return "concepts_to_sentence";
    case TaskKind::statement_to_explanation: return "statement_to_explanation";
    case TaskKind::concept_pair: return "concept_pair";
  }
  return "unknown";
}

inline TaskKind task_from_string(std::string_view s) {
  if (s == "concepts_to_sentence") return TaskKind::concepts_to_sentence;
  if (s == "statement_to_explanation") return TaskKind::statement_to_explanation;
  if (s == "concept_pair") return TaskKind::concept_pair;
  throw DataError("unknown task kind: " + std::string(s));
}

struct Instance {
  std::string id;
  TaskKind task = TaskKind::concepts_to_sentence;
  std::vector<std::string> concepts;  // concept tasks
  std::string statement;              // explanation task
  std::vector<Sentence> references;

  // The text that fills the {INPUT} slot of a prompt.
  std::string input_text() const {
    if (task == TaskKind::statement_to_explanation) return statement;
    std::string out;
    for (size_t i = 0; i < concepts.size(); ++i) {
      if (i) out += ", ";
      out += concepts[i];
    }
    return out;
  }
};

enum class DatasetFormat { commongen, comve, dimongen };

inline const char* to_string(DatasetFormat f) {
  switch (f) {
    case DatasetFormat::commongen: return "commongen";
    case DatasetFormat::comve: return "comve";
    case DatasetFormat::dimongen: return "dimongen";
  }
  return "unknown";
}

inline DatasetFormat dataset_format_from_string(std::string_view s) {
  if (s == "commongen") return DatasetFormat::commongen;
  if (s == "comve") return DatasetFormat::comve;
  if (s == "dimongen") return DatasetFormat::dimongen;
  throw ConfigError("unknown dataset format: " + std::string(s));
}

namespace detail {

inline std::vector<std::string> concept_list(const nlohmann::json& j, const char* field,
                                             const char* alt_field, int line_no) {
  const nlohmann::json* src = nullptr;
  if (j.contains(field)) src = &j.at(field);
  else if (alt_field && j.contains(alt_field)) src = &j.at(alt_field);
  if (!src) {
    throw DataError("line " + std::to_string(line_no) + ": missing field \"" + field + "\"");
  }
  std::vector<std::string> out;
  if (src->is_string()) {
    // "dog#frisbee#catch" style joined concept sets
    std::string joined = src->get<std::string>();
    std::string current;
    for (char c : joined) {
      if (c == '#') {
        if (!current.empty()) out.push_back(current);
        current.clear();
      } else {
        current.push_back(c);
      }
    }
    if (!current.empty()) out.push_back(current);
  } else if (src->is_array()) {
    out = src->get<std::vector<std::string>>();
  } else {
    throw DataError("line " + std::to_string(line_no) + ": concepts must be a string or array");
  }
  for (auto& c : out) c = normalize(c);
  return out;
}

inline std::vector<Sentence> reference_list(const nlohmann::json& j, int line_no,
                                            std::initializer_list<const char*> fields) {
  for (const char* f : fields) {
    if (j.contains(f)) {
      auto raws = j.at(f).get<std::vector<std::string>>();
      return make_sentences(raws);
    }
  }
  (void)line_no;
  return {};
}

}  // namespace detail

// Loads one of the three benchmark formats into normalized Instances.
inline std::vector<Instance> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("dataset file not found: " + path.string());

  std::vector<Instance> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    try {
      Instance inst;
      switch (format) {
        case DatasetFormat::commongen: {
          inst.task = TaskKind::concepts_to_sentence;
          inst.concepts = detail::concept_list(j, "concept_set", "concepts", line_no);
          inst.references = detail::reference_list(j, line_no, {"scene", "references"});
          break;
        }
        case DatasetFormat::comve: {
          inst.task = TaskKind::statement_to_explanation;
          if (!j.contains("statement")) {
            throw DataError("line " + std::to_string(line_no) + ": missing field \"statement\"");
          }
          inst.statement = j.at("statement").get<std::string>();
          inst.references = detail::reference_list(j, line_no, {"references", "explanations"});
          break;
        }
        case DatasetFormat::dimongen: {
          inst.task = TaskKind::concept_pair;
          inst.concepts = detail::concept_list(j, "concepts", "concept_pair", line_no);
          inst.references = detail::reference_list(j, line_no, {"references", "scene"});
          break;
        }
      }
      if (j.contains("id")) {
        const auto& idj = j.at("id");
        inst.id = idj.is_string() ? idj.get<std::string>() : idj.dump();
      } else if (!inst.concepts.empty()) {
        for (size_t i = 0; i < inst.concepts.size(); ++i) {
          if (i) inst.id += "#";
          inst.id += inst.concepts[i];
        }
      } else {
        inst.id = "line" + std::to_string(line_no);
      }
      out.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw DataError("dataset is empty: " + path.string());
  return out;
}

inline nlohmann::ordered_json instance_to_json(const Instance& inst) {
  nlohmann::ordered_json j;
  j["id"] = inst.id;
  j["task"] = to_string(inst.task);
  j["concepts"] = inst.concepts;
  j["statement"] = inst.statement;
  nlohmann::ordered_json refs = nlohmann::ordered_json::array();
  for (const auto& r : inst.references) refs.push_back(r.raw);
  j["references"] = refs;
  return j;
}

inline Instance instance_from_json(const nlohmann::json& j) {
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.task = task_from_string(j.at("task").get<std::string>());
  inst.concepts = j.at("concepts").get<std::vector<std::string>>();
  inst.statement = j.at("statement").get<std::string>();
  inst.references = make_sentences(j.at("references").get<std::vector<std::string>>());
  return inst;
}

// ---------------------------------------------------------------------------
// Mixture-of-experts training-data export

struct MoeRecord {
  int expert = 1;  // 1-based
  std::string input;
  std::string target;
};

struct RunInstanceData {
  Instance instance;
  std::vector<Sentence> generations;
};

namespace detail {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Fisher-Yates with an explicit generator so the permutation is identical
// on every platform.
template <class T>
void deterministic_shuffle(std::vector<T>& items, uint64_t& state) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(splitmix64(state) % i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace detail

// Splits each instance's generations into `experts` near-equal random
// subsets and emits one record per (expert, reference): the expert marker,
// the instance input and the expert's sentences joined with separator
// tokens, paired with the reference as target.
inline std::vector<MoeRecord> export_moe_training(std::span<const RunInstanceData> runs, int experts,
                                                  uint64_t seed) {
  if (experts < 1) throw ConfigError("export_moe_training: experts must be >= 1");
  std::vector<MoeRecord> out;
  uint64_t state = seed;
  for (const auto& run : runs) {
    const size_t n = run.generations.size();
    if (n < static_cast<size_t>(experts)) {
      throw DataError("instance " + run.instance.id + " has " + std::to_string(n) +
                      " generations, fewer than " + std::to_string(experts) + " experts");
    }
    std::vector<Sentence> shuffled = run.generations;
    detail::deterministic_shuffle(shuffled, state);

    const size_t base = n / static_cast<size_t>(experts);
    const size_t remainder = n % static_cast<size_t>(experts);
    size_t cursor = 0;
    for (int e = 0; e < experts; ++e) {
      size_t size = base + (static_cast<size_t>(e) < remainder ? 1 : 0);
      std::string input = "<EXP" + std::to_string(e + 1) + "> [CLS] " + run.instance.input_text();
      for (size_t k = 0; k < size; ++k) {
        input += " [SEP] " + shuffled[cursor + k].raw;
      }
      cursor += size;
      for (const auto& ref : run.instance.references) {
        out.push_back(MoeRecord{e + 1, input, ref.raw});
      }
    }
  }
  return out;
}

inline std::string moe_records_to_jsonl(const std::vector<MoeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["expert"] = r.expert;
    j["input"] = r.input;
    j["target"] = r.target;
    out += j.dump();
    out += "\n";
  }
  return out;
}

}  // namespace icd
