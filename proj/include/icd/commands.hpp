#pragma once

// Batch commands behind the CLI: run a generation method over a dataset,
// evaluate a finished run into reports, judge sets for diversity, export
// MoE training data, and verify replay determinism. Everything here writes
// plain files so that runs are auditable and byte-reproducible.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "icd/corpus.hpp"
#include "icd/engine.hpp"
#include "icd/error.hpp"
#include "icd/gateway.hpp"
#include "icd/judge.hpp"
#include "icd/lexical.hpp"
#include "icd/provider.hpp"
#include "icd/run_store.hpp"
#include "icd/scoring.hpp"
#include "icd/semantic.hpp"

namespace icd {

enum class Method { default_only, diversified, icd };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::default_only: return "default";
    case Method::diversified: return "diversified";
    case Method::icd: return "icd";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  if (s == "default") return Method::default_only;
  if (s == "diversified") return Method::diversified;
  if (s == "icd") return Method::icd;
  throw ConfigError("unknown method: " + std::string(s));
}

enum class BackendMode { live, replay, record };

inline const char* to_string(BackendMode m) {
  switch (m) {
    case BackendMode::live: return "live";
    case BackendMode::replay: return "replay";
    case BackendMode::record: return "record";
  }
  return "unknown";
}

inline BackendMode backend_mode_from_string(std::string_view s) {
  if (s == "live") return BackendMode::live;
  if (s == "replay") return BackendMode::replay;
  if (s == "record") return BackendMode::record;
  throw ConfigError("unknown backend mode: " + std::string(s));
}

inline const char* to_string(TriggerMode m) {
  return m == TriggerMode::duplicate_sentence ? "duplicate_sentence" : "threshold";
}

inline TriggerMode trigger_mode_from_string(std::string_view s) {
  if (s == "duplicate_sentence") return TriggerMode::duplicate_sentence;
  if (s == "threshold") return TriggerMode::threshold;
  throw ConfigError("unknown trigger mode: " + std::string(s));
}

// ---------------------------------------------------------------------------
// Run specification

struct RunSpec {
  std::string dataset_path;
  DatasetFormat format = DatasetFormat::commongen;
  Method method = Method::icd;
  IcdConfig icd;
  GenerationConfig gen;
  BackendMode backend = BackendMode::replay;
  std::string fixture_dir;
  std::string base_url;
  std::string api_key;  // credentials are never persisted
  std::string template_dir;
  std::vector<FewShotExample> few_shot;
  std::string out_dir;
  std::optional<std::pair<size_t, size_t>> range;  // [begin, end) instance window
  uint64_t seed = 0;
  int parallelism = 1;
  bool fail_fast = false;

  // Provider settings are needed at generation time only when the subset
  // metric f is embedding-based.
  std::string provider_url;
  std::string provider_dir;
};

inline nlohmann::ordered_json run_spec_to_json(const RunSpec& spec) {
  nlohmann::ordered_json j;
  j["dataset_path"] = spec.dataset_path;
  j["format"] = to_string(spec.format);
  j["method"] = to_string(spec.method);
  j["icd"] = {{"n", spec.icd.n},
              {"f", to_string(spec.icd.f)},
              {"trigger", to_string(spec.icd.trigger)},
              {"trigger_tau", spec.icd.trigger_tau},
              {"corpus_k", spec.icd.corpus_k},
              {"bleu_smoothing_epsilon", spec.icd.bleu_smoothing_epsilon}};
  j["generation"] = {{"model", spec.gen.model},
                     {"temperature", spec.gen.temperature},
                     {"max_tokens_per_sentence", spec.gen.max_tokens_per_sentence},
                     {"retries", spec.gen.retries}};
  j["backend"] = to_string(spec.backend);
  j["fixture_dir"] = spec.fixture_dir;
  j["base_url"] = spec.base_url;
  j["template_dir"] = spec.template_dir;
  nlohmann::ordered_json few_shot = nlohmann::ordered_json::array();
  for (const auto& [src, tgt] : spec.few_shot) few_shot.push_back({{"src", src}, {"tgt", tgt}});
  j["few_shot"] = std::move(few_shot);
  if (spec.range) {
    j["range"] = {{"begin", spec.range->first}, {"end", spec.range->second}};
  } else {
    j["range"] = nullptr;
  }
  j["seed"] = spec.seed;
  j["fail_fast"] = spec.fail_fast;
  j["provider_url"] = spec.provider_url;
  j["provider_dir"] = spec.provider_dir;
  return j;
}

inline RunSpec run_spec_from_json(const nlohmann::json& j) {
  RunSpec spec;
  spec.dataset_path = j.at("dataset_path").get<std::string>();
  spec.format = dataset_format_from_string(j.at("format").get<std::string>());
  spec.method = method_from_string(j.at("method").get<std::string>());
  const auto& icd_j = j.at("icd");
  spec.icd.n = icd_j.at("n").get<int>();
  spec.icd.f = metric_from_string(icd_j.at("f").get<std::string>());
  spec.icd.trigger = trigger_mode_from_string(icd_j.at("trigger").get<std::string>());
  spec.icd.trigger_tau = icd_j.at("trigger_tau").get<double>();
  spec.icd.corpus_k = icd_j.at("corpus_k").get<size_t>();
  spec.icd.bleu_smoothing_epsilon = icd_j.at("bleu_smoothing_epsilon").get<double>();
  const auto& gen_j = j.at("generation");
  spec.gen.model = gen_j.at("model").get<std::string>();
  spec.gen.temperature = gen_j.at("temperature").get<double>();
  spec.gen.max_tokens_per_sentence = gen_j.at("max_tokens_per_sentence").get<int>();
  spec.gen.retries = gen_j.at("retries").get<int>();
  spec.backend = backend_mode_from_string(j.at("backend").get<std::string>());
  spec.fixture_dir = j.at("fixture_dir").get<std::string>();
  spec.base_url = j.at("base_url").get<std::string>();
  spec.template_dir = j.at("template_dir").get<std::string>();
  for (const auto& ex : j.at("few_shot")) {
    spec.few_shot.emplace_back(ex.at("src").get<std::string>(), ex.at("tgt").get<std::string>());
  }
  if (!j.at("range").is_null()) {
    spec.range = {j.at("range").at("begin").get<size_t>(), j.at("range").at("end").get<size_t>()};
  }
  spec.seed = j.at("seed").get<uint64_t>();
  spec.parallelism = j.value("parallelism", 1);
  spec.fail_fast = j.at("fail_fast").get<bool>();
  spec.provider_url = j.value("provider_url", std::string{});
  spec.provider_dir = j.value("provider_dir", std::string{});
  return spec;
}

// Applies the fields present in a JSON config document onto spec defaults.
// Flags are expected to be layered on top by the caller, and credentials
// from the environment on top of those.
inline void apply_config_json(RunSpec& spec, const nlohmann::json& j) {
  if (j.contains("dataset_path")) spec.dataset_path = j["dataset_path"].get<std::string>();
  if (j.contains("format")) spec.format = dataset_format_from_string(j["format"].get<std::string>());
  if (j.contains("method")) spec.method = method_from_string(j["method"].get<std::string>());
  if (j.contains("icd")) {
    const auto& i = j["icd"];
    if (i.contains("n")) spec.icd.n = i["n"].get<int>();
    if (i.contains("f")) spec.icd.f = metric_from_string(i["f"].get<std::string>());
    if (i.contains("trigger")) spec.icd.trigger = trigger_mode_from_string(i["trigger"].get<std::string>());
    if (i.contains("trigger_tau")) spec.icd.trigger_tau = i["trigger_tau"].get<double>();
    if (i.contains("corpus_k")) spec.icd.corpus_k = i["corpus_k"].get<size_t>();
    if (i.contains("bleu_smoothing_epsilon"))
      spec.icd.bleu_smoothing_epsilon = i["bleu_smoothing_epsilon"].get<double>();
  }
  if (j.contains("generation")) {
    const auto& g = j["generation"];
    if (g.contains("model")) spec.gen.model = g["model"].get<std::string>();
    if (g.contains("temperature")) spec.gen.temperature = g["temperature"].get<double>();
    if (g.contains("max_tokens_per_sentence"))
      spec.gen.max_tokens_per_sentence = g["max_tokens_per_sentence"].get<int>();
    if (g.contains("retries")) spec.gen.retries = g["retries"].get<int>();
  }
  if (j.contains("backend")) spec.backend = backend_mode_from_string(j["backend"].get<std::string>());
  if (j.contains("fixture_dir")) spec.fixture_dir = j["fixture_dir"].get<std::string>();
  if (j.contains("base_url")) spec.base_url = j["base_url"].get<std::string>();
  if (j.contains("api_key")) spec.api_key = j["api_key"].get<std::string>();
  if (j.contains("template_dir")) spec.template_dir = j["template_dir"].get<std::string>();
  if (j.contains("few_shot")) {
    spec.few_shot.clear();
    for (const auto& ex : j["few_shot"]) {
      spec.few_shot.emplace_back(ex.at("src").get<std::string>(), ex.at("tgt").get<std::string>());
    }
  }
  if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
  if (j.contains("parallelism")) spec.parallelism = j["parallelism"].get<int>();
  if (j.contains("fail_fast")) spec.fail_fast = j["fail_fast"].get<bool>();
  if (j.contains("provider_url")) spec.provider_url = j["provider_url"].get<std::string>();
  if (j.contains("provider_dir")) spec.provider_dir = j["provider_dir"].get<std::string>();
}

inline std::vector<FewShotExample> load_few_shot_file(const std::filesystem::path& path) {
  std::vector<FewShotExample> out;
  std::ifstream in(path);
  if (!in) throw ConfigError("few-shot file not found: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    out.emplace_back(j.at("src").get<std::string>(), j.at("tgt").get<std::string>());
  }
  return out;
}

// Resolves the spec's relative paths against a root directory, so a config
// file shipped with a repository works from any working directory.
inline void resolve_run_spec_paths(RunSpec& spec, const std::filesystem::path& root) {
  auto fix = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) {
      p = (root / p).lexically_normal().string();
    }
  };
  fix(spec.dataset_path);
  fix(spec.fixture_dir);
  fix(spec.template_dir);
  fix(spec.out_dir);
  fix(spec.provider_dir);
}

// ---------------------------------------------------------------------------
// Shared plumbing

inline std::string template_prefix(DatasetFormat format) {
  return format == DatasetFormat::comve ? "comve" : "concept";
}

inline PromptBundle load_prompt_bundle(const std::filesystem::path& template_dir, DatasetFormat format,
                                       const std::vector<FewShotExample>& few_shot) {
  const std::string prefix = template_prefix(format);
  PromptBundle bundle;
  bundle.default_tpl = PromptTemplate::load_file(template_dir / (prefix + "_default.txt"));
  bundle.step1_tpl = PromptTemplate::load_file(template_dir / (prefix + "_step1.txt"));
  bundle.step2_tpl = PromptTemplate::load_file(template_dir / (prefix + "_step2.txt"));
  bundle.few_shot = few_shot;
  return bundle;
}

inline std::unique_ptr<EmbeddingProvider> make_embedding_provider(const std::string& url,
                                                                  const std::string& dir) {
  if (!url.empty() && !dir.empty()) {
    throw ConfigError("choose either an HTTP embedding provider or a fixture directory, not both");
  }
  if (!url.empty()) return std::make_unique<HttpEmbeddingProvider>(url);
  if (!dir.empty()) return std::make_unique<FileEmbeddingProvider>(dir);
  return nullptr;
}

inline std::unique_ptr<ChatBackend> make_backend(const RunSpec& spec,
                                                 std::shared_ptr<FixtureStore>& store_out) {
  switch (spec.backend) {
    case BackendMode::replay: {
      if (spec.fixture_dir.empty() || !std::filesystem::is_directory(spec.fixture_dir)) {
        throw ConfigError("replay mode requires an existing fixture store directory");
      }
      store_out = std::make_shared<FixtureStore>(spec.fixture_dir);
      return std::make_unique<ReplayChatBackend>(store_out);
    }
    case BackendMode::live: {
      if (spec.base_url.empty()) throw ConfigError("live mode requires a base URL");
      if (spec.api_key.empty()) throw ConfigError("live mode requires an API key");
      return std::make_unique<LiveChatBackend>(spec.base_url, spec.api_key);
    }
    case BackendMode::record: {
      if (spec.base_url.empty()) throw ConfigError("record mode requires a base URL");
      if (spec.api_key.empty()) throw ConfigError("record mode requires an API key");
      if (spec.fixture_dir.empty()) throw ConfigError("record mode requires a fixture directory");
      store_out = std::make_shared<FixtureStore>(spec.fixture_dir);
      return std::make_unique<RecordChatBackend>(
          std::make_unique<LiveChatBackend>(spec.base_url, spec.api_key), store_out);
    }
  }
  throw ConfigError("unreachable backend mode");
}

inline void parallel_for(size_t count, int workers, const std::function<void(size_t)>& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> threads;
  int spawn = std::min<size_t>(static_cast<size_t>(workers), count);
  for (int w = 0; w < spawn; ++w) {
    threads.emplace_back([&] {
      for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

// ---------------------------------------------------------------------------
// generate

struct GenerateSummary {
  std::filesystem::path run_dir;
  size_t succeeded = 0;
  std::map<std::string, std::string> failures;  // instance id -> message
};

inline GenerateSummary cmd_generate(const RunSpec& spec) {
  if (spec.out_dir.empty()) throw ConfigError("generate: output directory is required");
  if (spec.dataset_path.empty()) throw ConfigError("generate: dataset path is required");
  if (spec.icd.n < 1) throw ConfigError("generate: N must be >= 1");

  // Everything that can be validated happens before the first completion.
  std::shared_ptr<FixtureStore> store;
  std::unique_ptr<ChatBackend> backend = make_backend(spec, store);
  PromptBundle prompts = load_prompt_bundle(spec.template_dir, spec.format, spec.few_shot);
  std::unique_ptr<EmbeddingProvider> provider =
      make_embedding_provider(spec.provider_url, spec.provider_dir);

  std::vector<Instance> instances = load_dataset(spec.dataset_path, spec.format);
  if (spec.range) {
    size_t begin = std::min(spec.range->first, instances.size());
    size_t end = std::min(spec.range->second, instances.size());
    if (begin > end) throw ConfigError("generate: empty instance range");
    instances = std::vector<Instance>(instances.begin() + begin, instances.begin() + end);
  }
  {
    std::set<std::string> ids;
    for (const auto& inst : instances) {
      if (!ids.insert(inst.id).second) {
        throw ConfigError("generate: duplicate instance id \"" + inst.id +
                          "\"; add explicit id fields to the dataset");
      }
    }
  }

  IcdEngine engine(*backend, prompts, spec.icd, spec.gen, provider.get());
  RunStore run_store{std::filesystem::path(spec.out_dir)};
  std::filesystem::create_directories(run_store.instance_dir());

  GenerateSummary summary;
  summary.run_dir = run_store.dir();

  struct Failure {
    Errc code;
    std::string message;
  };
  std::vector<std::optional<Failure>> errors(instances.size());
  std::atomic<bool> stop{false};
  // Replay misses are always hard failures; in live mode instances are
  // recorded and skipped unless fail-fast is requested.
  const bool hard_failures = spec.fail_fast || spec.backend == BackendMode::replay;

  parallel_for(instances.size(), spec.parallelism, [&](size_t i) {
    if (stop.load()) {
      errors[i] = Failure{Errc::generic, "skipped: an earlier instance failed and the run was aborted"};
      return;
    }
    InstanceRunResult result;
    result.instance = instances[i];
    try {
      switch (spec.method) {
        case Method::default_only:
          result.default_set = engine.generate_default(result.instance, result.transcripts);
          break;
        case Method::diversified: {
          auto [s1, s2] = engine.generate_diversified(result.instance, result.transcripts,
                                                      &result.trigger_fired);
          result.step1_set = std::move(s1);
          result.step2_set = std::move(s2);
          break;
        }
        case Method::icd:
          engine.icd_run_into(result.instance, result);
          break;
      }
      run_store.write_instance(result);
    } catch (const Error& e) {
      errors[i] = Failure{e.code(), e.what()};
      // Partial transcripts are still worth keeping for diagnosis.
      run_store.write_instance(result);
      if (hard_failures) stop.store(true);
    } catch (const std::exception& e) {
      // Nothing may escape a worker thread.
      errors[i] = Failure{Errc::generic, e.what()};
      run_store.write_instance(result);
      if (hard_failures) stop.store(true);
    }
  });

  std::vector<std::string> ok_ids;
  std::optional<Failure> first_failure;
  for (size_t i = 0; i < instances.size(); ++i) {
    if (errors[i]) {
      if (!first_failure && errors[i]->code != Errc::generic) {
        first_failure = Failure{errors[i]->code, "instance " + instances[i].id + ": " + errors[i]->message};
      }
      summary.failures[instances[i].id] = errors[i]->message;
    } else {
      ok_ids.push_back(instances[i].id);
    }
  }
  std::sort(ok_ids.begin(), ok_ids.end());
  summary.succeeded = ok_ids.size();

  RunManifest manifest;
  manifest.config = run_spec_to_json(spec);
  manifest.template_hashes = {{"default", prompts.default_tpl.content_hash()},
                              {"step1", prompts.step1_tpl.content_hash()},
                              {"step2", prompts.step2_tpl.content_hash()}};
  manifest.instance_ids = ok_ids;
  run_store.write_manifest(manifest);

  if (!summary.failures.empty()) {
    nlohmann::ordered_json errs;
    for (const auto& [id, msg] : summary.failures) errs[id] = msg;
    atomic_write_file(run_store.dir() / "errors.json", errs.dump(2) + "\n");
  }
  // Under hard-failure semantics the typed error surfaces as the exit code.
  if (hard_failures && first_failure) {
    throw Error(first_failure->code, first_failure->message + " (partial run kept in " +
                                         run_store.dir().string() + ")");
  }
  return summary;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalConfig {
  bool semantic = false;  // self-cosSim / self-BERTScore / BERTScore / FBD
  size_t corpus_k = 4;
  BleuConfig bleu;  // quality BLEU; smoothing shared with self-BLEU
  BertScoreConfig bertscore;
  std::vector<MetricPair> pairs;  // extra harmonic-mean pairs
  std::string spice_file;         // optional: {"<instance id>": score} JSON
  std::string provider_url;
  std::string provider_dir;
};

// The set a method is judged by: its selected subset for the subset-search
// method, the final (step-2 when present) set for diversified prompting,
// the default set otherwise.
inline const GenerationSet& evaluated_set(const InstanceRunResult& r, Method method) {
  auto require = [&](const std::optional<GenerationSet>& s, const char* what) -> const GenerationSet& {
    if (!s) {
      throw EvaluationError("instance " + r.instance.id + " has no " + what +
                            " set; the run is incomplete");
    }
    return *s;
  };
  switch (method) {
    case Method::default_only:
      return require(r.default_set, "default");
    case Method::diversified:
      return r.step2_set ? *r.step2_set : require(r.step1_set, "step-1");
    case Method::icd:
      return require(r.selected_set, "selected");
  }
  throw EvaluationError("unreachable method");
}

inline MetricReport evaluate_results(const std::vector<InstanceRunResult>& results, Method method,
                                     const EvalConfig& cfg, const std::string& dataset_id) {
  if (results.empty()) throw EvaluationError("evaluate: no instances in run");

  std::unique_ptr<EmbeddingProvider> provider =
      make_embedding_provider(cfg.provider_url, cfg.provider_dir);
  if (cfg.semantic && !provider) {
    throw ConfigError("semantic metrics requested but no embedding provider configured");
  }

  std::map<std::string, double> spice;
  if (!cfg.spice_file.empty()) {
    std::ifstream in(cfg.spice_file);
    if (!in) throw ConfigError("spice file not found: " + cfg.spice_file);
    nlohmann::json j = nlohmann::json::parse(in);
    for (auto it = j.begin(); it != j.end(); ++it) spice[it.key()] = it.value().get<double>();
  }

  BleuConfig bleu3 = cfg.bleu;
  bleu3.max_n = 3;
  BleuConfig bleu4 = cfg.bleu;
  bleu4.max_n = 4;

  std::vector<InstanceMetrics> per_instance;
  std::vector<Sentence> all_generations;
  std::vector<Sentence> all_references;

  for (const auto& r : results) {
    const GenerationSet& set = evaluated_set(r, method);
    if (set.sentences.size() < 2) {
      throw EvaluationError("instance " + r.instance.id +
                            " has fewer than 2 sentences; pairwise diversity is undefined");
    }
    if (r.instance.references.empty()) {
      throw EvaluationError("instance " + r.instance.id + " has no references for quality metrics");
    }

    InstanceMetrics m;
    m.instance_id = r.instance.id;
    for (const auto& s : set.sentences) m.generations.push_back(s.raw);

    m.values[to_string(MetricId::self_bleu3)] = self_bleu(set.sentences, 3, cfg.bleu.smoothing_epsilon);
    m.values[to_string(MetricId::self_bleu4)] = self_bleu(set.sentences, 4, cfg.bleu.smoothing_epsilon);
    m.values[to_string(MetricId::bleu3)] = best_candidate_bleu(set.sentences, r.instance.references, bleu3);
    m.values[to_string(MetricId::bleu4)] = best_candidate_bleu(set.sentences, r.instance.references, bleu4);

    if (cfg.semantic) {
      std::vector<std::string> texts;
      for (const auto& s : set.sentences) texts.push_back(s.raw);
      auto sentence_embs = provider->embed_sentences(texts, EmbeddingKind::sentence);
      m.values[to_string(MetricId::self_cos_sim)] = self_cos_sim(sentence_embs);

      auto token_embs = provider->embed_tokens(texts);
      m.values[to_string(MetricId::self_bertscore)] = self_bertscore(token_embs, cfg.bertscore);

      std::vector<std::string> ref_texts;
      for (const auto& s : r.instance.references) ref_texts.push_back(s.raw);
      auto ref_token_embs = provider->embed_tokens(ref_texts);
      double best = 0.0;
      for (const auto& cand : token_embs) {
        for (const auto& ref : ref_token_embs) {
          best = std::max(best, bertscore_f1(cand, ref, cfg.bertscore));
        }
      }
      m.values[to_string(MetricId::bertscore)] = best;
    }

    if (!cfg.spice_file.empty()) {
      auto it = spice.find(r.instance.id);
      if (it == spice.end()) {
        throw EvaluationError("spice file has no entry for instance " + r.instance.id);
      }
      m.values[to_string(MetricId::spice)] = it->second;
    }

    for (const auto& s : set.sentences) all_generations.push_back(s);
    for (const auto& s : r.instance.references) all_references.push_back(s);
    per_instance.push_back(std::move(m));
  }

  std::map<std::string, double> corpus_values;
  corpus_values[to_string(MetricId::distinct_k)] = distinct_k(all_generations, cfg.corpus_k);
  corpus_values[to_string(MetricId::entropy_k)] = entropy_k(all_generations, cfg.corpus_k);
  if (cfg.semantic) {
    corpus_values["fbd"] = fbd(std::span<const Sentence>(all_references),
                               std::span<const Sentence>(all_generations), *provider);
  }

  nlohmann::ordered_json config_block;
  config_block["entropy_log_base"] = "e";
  config_block["corpus_k"] = cfg.corpus_k;
  config_block["bleu_smoothing_epsilon"] = cfg.bleu.smoothing_epsilon;
  config_block["quality_aggregation"] = "best_candidate_macro_average";
  config_block["self_bleu_pairs"] = "ordered";
  config_block["orientation"] = {{"self_bleu3", "lower_is_diverse"},
                                 {"self_bleu4", "lower_is_diverse"},
                                 {"self_cossim", "lower_is_diverse"},
                                 {"self_bertscore", "lower_is_diverse"},
                                 {"distinct_4", "higher_is_diverse"},
                                 {"entropy_4", "higher_is_diverse"}};
  config_block["combined"] = "harmonic_mean(100 - self_bleu4, bertscore)";
  config_block["fbd"] = "squared_frechet_distance_pooler";
  config_block["bertscore"] = {{"idf", cfg.bertscore.use_idf},
                               {"baseline", cfg.bertscore.baseline ? nlohmann::ordered_json(*cfg.bertscore.baseline)
                                                                   : nlohmann::ordered_json(nullptr)}};
  config_block["embedding_provider"] =
      !cfg.provider_url.empty() ? cfg.provider_url : (!cfg.provider_dir.empty() ? cfg.provider_dir : "none");

  MetricReport report = build_report(per_instance, corpus_values, dataset_id, "", config_block);
  return report;
}

inline MetricReport cmd_evaluate(const std::filesystem::path& run_dir, const EvalConfig& cfg) {
  RunStore store(run_dir);
  RunManifest manifest = store.read_manifest();
  Method method = method_from_string(manifest.config.at("method").get<std::string>());
  std::string dataset_id =
      std::filesystem::path(manifest.config.at("dataset_path").get<std::string>()).stem().string();

  std::vector<InstanceRunResult> results = store.read_all();
  MetricReport report = evaluate_results(results, method, cfg, dataset_id);
  report.method_id = to_string(method);

  if (!cfg.pairs.empty()) {
    ReportRow row{report.dataset_id, report.method_id, report.columns};
    report.pair_columns = harmonic_pairs({row}, cfg.pairs).at(0);
  }

  atomic_write_file(run_dir / "report.json", report_to_json(report).dump(2) + "\n");
  atomic_write_file(run_dir / "report.txt", report_to_text(report));
  return report;
}

// ---------------------------------------------------------------------------
// judge

enum class JudgeTarget { selected, final_div, union_all };

inline const char* to_string(JudgeTarget t) {
  switch (t) {
    case JudgeTarget::selected: return "selected";
    case JudgeTarget::final_div: return "final";
    case JudgeTarget::union_all: return "union";
  }
  return "unknown";
}

inline JudgeTarget judge_target_from_string(std::string_view s) {
  if (s == "selected") return JudgeTarget::selected;
  if (s == "final") return JudgeTarget::final_div;
  if (s == "union") return JudgeTarget::union_all;
  throw ConfigError("unknown judge target: " + std::string(s));
}

struct JudgeSpec {
  int repeats = 3;
  JudgeTarget target = JudgeTarget::selected;
  BackendMode backend = BackendMode::replay;
  std::string fixture_dir;
  std::string base_url;
  std::string api_key;
  std::string template_dir;
  GenerationConfig gen;
  std::string human_ratings;  // optional delimited table for agreement
  bool tie_is_high = false;
};

inline std::vector<Sentence> judge_target_sentences(const InstanceRunResult& r, JudgeTarget target) {
  switch (target) {
    case JudgeTarget::selected: {
      if (!r.selected_set) {
        throw EvaluationError("instance " + r.instance.id + " has no selected set to judge");
      }
      return r.selected_set->sentences;
    }
    case JudgeTarget::final_div: {
      if (r.step2_set) return r.step2_set->sentences;
      if (r.step1_set) return r.step1_set->sentences;
      throw EvaluationError("instance " + r.instance.id + " has no diversified set to judge");
    }
    case JudgeTarget::union_all: {
      std::vector<Sentence> all;
      std::unordered_set<std::string> seen;
      for (const auto* set : {&r.default_set, &r.step1_set, &r.step2_set}) {
        if (!set->has_value()) continue;
        for (const auto& s : (*set)->sentences) {
          if (seen.insert(sentence_key(s)).second) all.push_back(s);
        }
      }
      if (all.empty()) throw EvaluationError("instance " + r.instance.id + " has no sets to judge");
      return all;
    }
  }
  throw EvaluationError("unreachable judge target");
}

struct JudgeOutcome {
  std::vector<DiversityRating> ratings;
  std::optional<KappaReport> agreement;
};

inline JudgeOutcome cmd_judge(const std::filesystem::path& run_dir, const JudgeSpec& spec) {
  RunStore store(run_dir);
  RunManifest manifest = store.read_manifest();
  if (manifest.instance_ids.empty()) throw EvaluationError("judge: run has no instances");

  RunSpec backend_spec;
  backend_spec.backend = spec.backend;
  backend_spec.fixture_dir = spec.fixture_dir;
  backend_spec.base_url = spec.base_url;
  backend_spec.api_key = spec.api_key;
  std::shared_ptr<FixtureStore> fixture_store;
  std::unique_ptr<ChatBackend> backend = make_backend(backend_spec, fixture_store);
  PromptTemplate judge_tpl = PromptTemplate::load_file(
      std::filesystem::path(spec.template_dir) / "judge.txt");

  JudgeOutcome outcome;
  nlohmann::ordered_json ratings_json = nlohmann::ordered_json::array();
  std::vector<Transcript> transcripts;
  for (const auto& id : manifest.instance_ids) {
    InstanceRunResult r = store.read_instance(id);
    std::vector<Sentence> sentences = judge_target_sentences(r, spec.target);
    DiversityRating rating = judge_diversity(sentences, *backend, judge_tpl, spec.gen,
                                             spec.repeats, id, &transcripts);
    nlohmann::ordered_json jr;
    jr["set_id"] = rating.set_id;
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (auto c : rating.runs) runs.push_back(to_string(c));
    jr["runs"] = std::move(runs);
    nlohmann::ordered_json values = nlohmann::ordered_json::array();
    for (auto c : rating.runs) values.push_back(static_cast<int>(c));
    jr["values"] = std::move(values);
    jr["mean"] = rating.mean;
    jr["binary"] = to_string(binarize(rating.mean, spec.tie_is_high));
    ratings_json.push_back(std::move(jr));
    outcome.ratings.push_back(std::move(rating));
  }

  std::filesystem::create_directories(run_dir / "judge" / "transcripts");
  for (const auto& t : transcripts) {
    atomic_write_file(run_dir / "judge" / "transcripts" / (t.cache_key + ".json"),
                      transcript_to_json(t).dump(2) + "\n");
  }
  nlohmann::ordered_json ratings_doc;
  ratings_doc["schema_version"] = 1;
  ratings_doc["repeats"] = spec.repeats;
  ratings_doc["target"] = to_string(spec.target);
  ratings_doc["ratings"] = std::move(ratings_json);
  atomic_write_file(run_dir / "judge" / "ratings.json", ratings_doc.dump(2) + "\n");

  if (!spec.human_ratings.empty()) {
    RatingTable table = load_human_ratings(spec.human_ratings);
    std::vector<double> human_means = normalize_likert(table);
    std::map<std::string, double> human_by_set;
    for (size_t i = 0; i < table.set_ids.size(); ++i) human_by_set[table.set_ids[i]] = human_means[i];

    std::vector<BinaryRating> llm_labels, human_labels;
    for (const auto& rating : outcome.ratings) {
      auto it = human_by_set.find(rating.set_id);
      if (it == human_by_set.end()) {
        throw DataError("human ratings are missing set " + rating.set_id);
      }
      llm_labels.push_back(binarize(rating.mean, spec.tie_is_high));
      human_labels.push_back(binarize(it->second, spec.tie_is_high));
    }
    KappaReport kappa = cohen_kappa_report(llm_labels, human_labels);
    outcome.agreement = kappa;

    nlohmann::ordered_json ag;
    ag["items"] = llm_labels.size();
    ag["counts"] = {{"low_low", kappa.counts[0][0]},
                    {"low_high", kappa.counts[0][1]},
                    {"high_low", kappa.counts[1][0]},
                    {"high_high", kappa.counts[1][1]}};
    ag["p_observed"] = kappa.p_observed;
    ag["p_expected"] = kappa.p_expected;
    ag["kappa"] = kappa.kappa;
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (size_t i = 0; i < llm_labels.size(); ++i) {
      labels.push_back({{"set_id", outcome.ratings[i].set_id},
                        {"llm", to_string(llm_labels[i])},
                        {"human", to_string(human_labels[i])}});
    }
    ag["labels"] = std::move(labels);
    atomic_write_file(run_dir / "judge" / "agreement.json", ag.dump(2) + "\n");
  }
  return outcome;
}

// ---------------------------------------------------------------------------
// export-moe

inline std::vector<Sentence> all_generated_sentences(const InstanceRunResult& r) {
  std::vector<Sentence> all;
  std::unordered_set<std::string> seen;
  for (const auto* set : {&r.default_set, &r.step1_set, &r.step2_set}) {
    if (!set->has_value()) continue;
    for (const auto& s : (*set)->sentences) {
      if (seen.insert(sentence_key(s)).second) all.push_back(s);
    }
  }
  return all;
}

inline std::vector<MoeRecord> cmd_export_moe(const std::vector<std::filesystem::path>& run_dirs,
                                             int experts, uint64_t seed,
                                             const std::filesystem::path& out_path) {
  std::vector<RunInstanceData> data;
  for (const auto& dir : run_dirs) {
    RunStore store(dir);
    for (auto& result : store.read_all()) {
      RunInstanceData d;
      d.generations = all_generated_sentences(result);
      d.instance = std::move(result.instance);
      data.push_back(std::move(d));
    }
  }
  std::vector<MoeRecord> records = export_moe_training(data, experts, seed);
  atomic_write_file(out_path, moe_records_to_jsonl(records));
  return records;
}

// ---------------------------------------------------------------------------
// replay-verify

struct ReplayVerifyResult {
  bool identical = false;
  std::string detail;  // empty when identical, else the first difference
};

namespace detail {

inline std::map<std::string, std::string> read_tree(const std::filesystem::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    files[std::filesystem::relative(entry.path(), root).generic_string()] = std::move(content);
  }
  return files;
}

}  // namespace detail

// Re-runs a finished run from its own manifest (replay mode, same fixture
// store) into a scratch directory and byte-compares the two trees.
inline ReplayVerifyResult cmd_replay_verify(const std::filesystem::path& run_dir) {
  RunStore store(run_dir);
  RunManifest manifest = store.read_manifest();
  RunSpec spec = run_spec_from_json(manifest.config);
  if (spec.fixture_dir.empty()) {
    throw ConfigError("replay-verify: the run has no fixture store to replay from");
  }
  spec.backend = BackendMode::replay;

  std::filesystem::path scratch = run_dir;
  scratch += ".replay-verify";
  std::filesystem::remove_all(scratch);
  spec.out_dir = scratch.string();

  // Only generation artifacts take part in the comparison; evaluation and
  // judge outputs may legitimately sit next to them in the run directory.
  auto generation_tree = [](const std::filesystem::path& root) {
    auto files = detail::read_tree(root);
    std::map<std::string, std::string> out;
    for (auto& [rel, content] : files) {
      if (rel == "manifest.json" || rel.rfind("instances/", 0) == 0) out[rel] = std::move(content);
    }
    return out;
  };

  ReplayVerifyResult result;
  try {
    cmd_generate(spec);
    auto original = generation_tree(run_dir);
    auto replayed = generation_tree(scratch);
    result.identical = true;
    for (const auto& [rel, content] : replayed) {
      auto it = original.find(rel);
      if (it == original.end()) {
        result.identical = false;
        result.detail = "replay produced extra file " + rel;
        break;
      }
      if (it->second != content) {
        result.identical = false;
        result.detail = "file " + rel + " differs between run and replay";
        break;
      }
    }
    if (result.identical) {
      for (const auto& [rel, content] : original) {
        if (!replayed.count(rel)) {
          result.identical = false;
          result.detail = "replay is missing file " + rel;
          break;
        }
      }
    }
  } catch (...) {
    std::filesystem::remove_all(scratch);
    throw;
  }
  std::filesystem::remove_all(scratch);
  return result;
}

}  // namespace icd
