#pragma once

// Run directory persistence. A run is a manifest (config snapshot, template
// hashes, instance ids) plus one JSON record per instance holding every
// generated set, every transcript, and the subset-selection rationale, so a
// finished run can be audited or replayed exactly.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "icd/corpus.hpp"
#include "icd/engine.hpp"
#include "icd/error.hpp"
#include "icd/gateway.hpp"

namespace icd {

inline constexpr int kRunSchemaVersion = 1;

struct RunManifest {
  int schema_version = kRunSchemaVersion;
  nlohmann::ordered_json config;  // effective configuration, for provenance
  std::map<std::string, std::string> template_hashes;
  std::vector<std::string> instance_ids;  // sorted
};

inline nlohmann::ordered_json generation_set_to_json(const GenerationSet& set) {
  nlohmann::ordered_json j;
  j["source"] = to_string(set.source);
  nlohmann::ordered_json sentences = nlohmann::ordered_json::array();
  for (const auto& s : set.sentences) sentences.push_back(s.raw);
  j["sentences"] = sentences;
  j["had_duplicates"] = set.had_duplicates;
  return j;
}

inline GenerationSet generation_set_from_json(const nlohmann::json& j, const std::string& instance_id) {
  GenerationSet set;
  set.instance_id = instance_id;
  set.source = set_source_from_string(j.at("source").get<std::string>());
  for (const auto& s : j.at("sentences")) set.sentences.push_back(Sentence::make(s.get<std::string>()));
  set.had_duplicates = j.at("had_duplicates").get<bool>();
  return set;
}

inline nlohmann::ordered_json instance_result_to_json(const InstanceRunResult& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kRunSchemaVersion;
  j["instance"] = instance_to_json(r.instance);
  j["trigger_fired"] = r.trigger_fired;

  nlohmann::ordered_json sets = nlohmann::ordered_json::array();
  for (const auto* set : {&r.default_set, &r.step1_set, &r.step2_set, &r.selected_set}) {
    if (set->has_value()) sets.push_back(generation_set_to_json(**set));
  }
  j["sets"] = std::move(sets);

  nlohmann::ordered_json transcripts = nlohmann::ordered_json::array();
  for (const auto& t : r.transcripts) transcripts.push_back(transcript_to_json(t));
  j["transcripts"] = std::move(transcripts);

  if (r.selected_set) {
    nlohmann::ordered_json sel;
    sel["union"] = r.union_raws;
    sel["chosen"] = r.selection_chosen;
    nlohmann::ordered_json rationale = nlohmann::ordered_json::array();
    for (const auto& choice : r.selection_rationale) {
      rationale.push_back({{"indices", choice.indices}, {"score", choice.score}});
    }
    sel["rationale"] = std::move(rationale);
    j["selection"] = std::move(sel);
  }
  return j;
}

inline InstanceRunResult instance_result_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", -1) != kRunSchemaVersion) {
    throw DataError("instance record has unsupported schema version");
  }
  InstanceRunResult r;
  r.instance = instance_from_json(j.at("instance"));
  r.trigger_fired = j.at("trigger_fired").get<bool>();
  for (const auto& sj : j.at("sets")) {
    GenerationSet set = generation_set_from_json(sj, r.instance.id);
    switch (set.source) {
      case SetSource::default_prompt: r.default_set = std::move(set); break;
      case SetSource::step1: r.step1_set = std::move(set); break;
      case SetSource::step2: r.step2_set = std::move(set); break;
      case SetSource::selected: r.selected_set = std::move(set); break;
    }
  }
  for (const auto& tj : j.at("transcripts")) r.transcripts.push_back(transcript_from_json(tj));
  if (j.contains("selection")) {
    const auto& sel = j.at("selection");
    r.union_raws = sel.at("union").get<std::vector<std::string>>();
    r.selection_chosen = sel.at("chosen").get<size_t>();
    for (const auto& cj : sel.at("rationale")) {
      SubsetChoice choice;
      choice.indices = cj.at("indices").get<std::vector<size_t>>();
      choice.score = cj.at("score").get<double>();
      r.selection_rationale.push_back(std::move(choice));
    }
  }
  return r;
}

class RunStore {
 public:
  explicit RunStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
  std::filesystem::path instance_dir() const { return dir_ / "instances"; }

  // Instance ids become file names; anything outside [A-Za-z0-9._#-] is
  // replaced. Callers must reject colliding ids up front.
  static std::string safe_file_name(const std::string& id) {
    std::string out;
    for (char c : id) {
      bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                c == '.' || c == '_' || c == '-' || c == '#';
      out.push_back(ok ? c : '_');
    }
    return out.empty() ? "_" : out;
  }

  std::filesystem::path instance_path(const std::string& id) const {
    return instance_dir() / (safe_file_name(id) + ".json");
  }

  void write_manifest(const RunManifest& m) const {
    nlohmann::ordered_json j;
    j["schema_version"] = m.schema_version;
    j["config"] = m.config;
    j["template_hashes"] = m.template_hashes;
    j["instance_ids"] = m.instance_ids;
    atomic_write_file(manifest_path(), j.dump(2) + "\n");
  }

  RunManifest read_manifest() const {
    std::ifstream in(manifest_path());
    if (!in) throw DataError("run manifest not found: " + manifest_path().string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt run manifest " + manifest_path().string() + ": " + e.what());
    }
    int version = j.value("schema_version", -1);
    if (version != kRunSchemaVersion) {
      throw DataError("run manifest schema version " + std::to_string(version) +
                      " does not match supported version " + std::to_string(kRunSchemaVersion));
    }
    RunManifest m;
    m.schema_version = version;
    m.config = j.at("config");
    m.template_hashes = j.at("template_hashes").get<std::map<std::string, std::string>>();
    m.instance_ids = j.at("instance_ids").get<std::vector<std::string>>();
    return m;
  }

  void write_instance(const InstanceRunResult& r) const {
    atomic_write_file(instance_path(r.instance.id), instance_result_to_json(r).dump(2) + "\n");
  }

  InstanceRunResult read_instance(const std::string& id) const {
    std::ifstream in(instance_path(id));
    if (!in) throw DataError("instance record not found: " + instance_path(id).string());
    try {
      return instance_result_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt instance record " + instance_path(id).string() + ": " + e.what());
    }
  }

  std::vector<InstanceRunResult> read_all() const {
    RunManifest m = read_manifest();
    std::vector<InstanceRunResult> out;
    out.reserve(m.instance_ids.size());
    for (const auto& id : m.instance_ids) out.push_back(read_instance(id));
    return out;
  }

 private:
  std::filesystem::path dir_;
};

// A whole run in memory: the manifest plus one record per instance.
struct Run {
  RunManifest manifest;
  std::vector<InstanceRunResult> instances;
};

inline void save_run(const std::filesystem::path& dir, const Run& run) {
  RunStore store(dir);
  std::filesystem::create_directories(store.instance_dir());
  for (const auto& r : run.instances) store.write_instance(r);
  store.write_manifest(run.manifest);
}

inline Run load_run(const std::filesystem::path& dir) {
  RunStore store(dir);
  Run run;
  run.manifest = store.read_manifest();
  run.instances = store.read_all();
  return run;
}

}  // namespace icd
