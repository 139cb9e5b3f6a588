#pragma once

// Chat-completion gateway: prompt template rendering, an OpenAI-compatible
// live backend with retries, deterministic record/replay through a fixture
// store of transcripts, and numbered-list response parsing.

#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "icd/error.hpp"
#include "icd/sha256.hpp"
#include "icd/text.hpp"

namespace icd {

struct GenerationConfig {
  std::string model = "gpt-3.5-turbo";
  double temperature = 1.0;
  int max_tokens_per_sentence = 25;
  int retries = 2;

  // The response cap scales with the number of requested sentences.
  int max_tokens_for(int n_sentences) const { return max_tokens_per_sentence * n_sentences; }
};

// ---------------------------------------------------------------------------
// Prompt templates

// Slotted template text. Placeholders: {INPUT}, {N}, {PRV}; {SRC}/{TGT} are
// only legal inside the few-shot block, which is the region between
// [EXAMPLES] and [/EXAMPLES] lines and is repeated once per example pair.
struct PromptTemplate {
  std::string name;
  std::string body;

  static PromptTemplate from_string(std::string name, std::string body) {
    return PromptTemplate{std::move(name), std::move(body)};
  }

  static PromptTemplate load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("template file not found: " + path.string());
    std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return PromptTemplate{path.stem().string(), std::move(body)};
  }

  std::string content_hash() const { return sha256_hex(body); }
};

using FewShotExample = std::pair<std::string, std::string>;  // (src, tgt)

namespace detail {

inline size_t replace_all(std::string& text, std::string_view placeholder, std::string_view value) {
  size_t count = 0;
  size_t pos = 0;
  while ((pos = text.find(placeholder, pos)) != std::string::npos) {
    text.replace(pos, placeholder.size(), value);
    pos += value.size();
    ++count;
  }
  return count;
}

}  // namespace detail

// Deterministic textual substitution. Fails when a placeholder the template
// uses has no binding, and when a non-empty binding has nowhere to go.
inline std::string render_prompt(const PromptTemplate& tpl, const std::vector<FewShotExample>& few_shot,
                                 const std::string& input, int n, const std::vector<Sentence>& prior) {
  static constexpr std::string_view kBegin = "[EXAMPLES]\n";
  static constexpr std::string_view kEnd = "[/EXAMPLES]\n";

  std::string body = tpl.body;
  size_t begin = body.find(kBegin);
  std::string examples_block;
  if (begin != std::string::npos) {
    size_t end = body.find(kEnd, begin);
    if (end == std::string::npos) {
      throw ConfigError("template " + tpl.name + ": unterminated [EXAMPLES] block");
    }
    examples_block = body.substr(begin + kBegin.size(), end - begin - kBegin.size());
    std::string rendered;
    for (const auto& [src, tgt] : few_shot) {
      std::string one = examples_block;
      detail::replace_all(one, "{SRC}", src);
      detail::replace_all(one, "{TGT}", tgt);
      rendered += one;
    }
    body = body.substr(0, begin) + rendered + body.substr(end + kEnd.size());
  } else if (!few_shot.empty()) {
    throw ConfigError("template " + tpl.name + ": few-shot examples given but no [EXAMPLES] block");
  }

  if (body.find("{SRC}") != std::string::npos || body.find("{TGT}") != std::string::npos) {
    throw ConfigError("template " + tpl.name + ": {SRC}/{TGT} outside the [EXAMPLES] block");
  }

  bool has_input = body.find("{INPUT}") != std::string::npos;
  if (has_input && input.empty()) {
    throw ConfigError("template " + tpl.name + ": {INPUT} is unbound");
  }
  if (!has_input && !input.empty()) {
    throw ConfigError("template " + tpl.name + ": input given but template has no {INPUT}");
  }
  detail::replace_all(body, "{INPUT}", input);
  detail::replace_all(body, "{N}", std::to_string(n));

  bool has_prv = body.find("{PRV}") != std::string::npos;
  if (has_prv && prior.empty()) {
    throw ConfigError("template " + tpl.name + ": {PRV} is unbound");
  }
  if (!has_prv && !prior.empty()) {
    throw ConfigError("template " + tpl.name + ": prior sentences given but template has no {PRV}");
  }
  if (has_prv) {
    std::string numbered;
    for (size_t i = 0; i < prior.size(); ++i) {
      numbered += std::to_string(i + 1) + ". " + prior[i].raw;
      if (i + 1 < prior.size()) numbered += "\n";
    }
    detail::replace_all(body, "{PRV}", numbered);
  }
  return body;
}

// ---------------------------------------------------------------------------
// Transcripts and the fixture store

struct Transcript {
  std::string cache_key;
  std::string prompt;
  std::string model;
  double temperature = 1.0;
  int max_tokens = 0;
  int attempt = 0;
  std::string response_text;
  std::vector<std::string> parsed_sentences;
  int64_t created_unix_ms = 0;
};

inline std::string cache_key(const std::string& prompt, const std::string& model, double temperature,
                             int max_tokens, int attempt) {
  char temp_buf[32];
  std::snprintf(temp_buf, sizeof(temp_buf), "%.6g", temperature);
  std::string material = prompt;
  material += '\x1f';
  material += model;
  material += '\x1f';
  material += temp_buf;
  material += '\x1f';
  material += std::to_string(max_tokens);
  material += '\x1f';
  material += std::to_string(attempt);
  return sha256_hex(material);
}

inline nlohmann::ordered_json transcript_to_json(const Transcript& t) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["cache_key"] = t.cache_key;
  j["request"] = {{"prompt", t.prompt},
                  {"model", t.model},
                  {"temperature", t.temperature},
                  {"max_tokens", t.max_tokens},
                  {"attempt", t.attempt}};
  j["response_text"] = t.response_text;
  j["parsed_sentences"] = t.parsed_sentences;
  j["created_unix_ms"] = t.created_unix_ms;
  return j;
}

inline Transcript transcript_from_json(const nlohmann::json& j) {
  Transcript t;
  t.cache_key = j.at("cache_key").get<std::string>();
  const auto& req = j.at("request");
  t.prompt = req.at("prompt").get<std::string>();
  t.model = req.at("model").get<std::string>();
  t.temperature = req.at("temperature").get<double>();
  t.max_tokens = req.at("max_tokens").get<int>();
  t.attempt = req.at("attempt").get<int>();
  t.response_text = j.at("response_text").get<std::string>();
  if (j.contains("parsed_sentences")) {
    t.parsed_sentences = j.at("parsed_sentences").get<std::vector<std::string>>();
  }
  t.created_unix_ms = j.value("created_unix_ms", int64_t{0});
  return t;
}

inline void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }
  std::filesystem::rename(tmp, path);
}

// One JSON file per cache key; writes are serialized.
class FixtureStore {
 public:
  explicit FixtureStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  std::optional<Transcript> load(const std::string& key) const {
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
      return transcript_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt transcript fixture " + path_for(key).string() + ": " + e.what());
    }
  }

  void save(const Transcript& t) {
    std::lock_guard<std::mutex> lock(mutex_);
    atomic_write_file(path_for(t.cache_key), transcript_to_json(t).dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::mutex mutex_;
};

// ---------------------------------------------------------------------------
// Backends

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  // Issues (or replays) one completion and returns the full transcript.
  virtual Transcript complete(const std::string& prompt, const GenerationConfig& config,
                              int max_tokens, int attempt) = 0;
};

class LiveChatBackend : public ChatBackend {
 public:
  LiveChatBackend(std::string base_url, std::string api_key, int backoff_base_ms = 1000)
      : base_url_(std::move(base_url)), api_key_(std::move(api_key)), backoff_base_ms_(backoff_base_ms) {}

  Transcript complete(const std::string& prompt, const GenerationConfig& config, int max_tokens,
                      int attempt) override {
    nlohmann::json body;
    body["model"] = config.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = config.temperature;
    body["max_tokens"] = max_tokens;
    const std::string payload = body.dump();

    std::string last_error;
    for (int try_no = 0; try_no <= config.retries; ++try_no) {
      if (try_no > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_base_ms_ << (try_no - 1)));
      }
      httplib::Client client(base_url_);
      client.set_read_timeout(300, 0);
      httplib::Headers headers;
      if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
      auto res = client.Post("/v1/chat/completions", headers, payload, "application/json");
      if (!res) {
        last_error = "connection failed to " + base_url_;
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw TransportError("chat backend returned HTTP " + std::to_string(res->status) + ": " +
                             res->body);
      }
      nlohmann::json parsed = nlohmann::json::parse(res->body);
      Transcript t;
      t.prompt = prompt;
      t.model = config.model;
      t.temperature = config.temperature;
      t.max_tokens = max_tokens;
      t.attempt = attempt;
      t.cache_key = cache_key(prompt, config.model, config.temperature, max_tokens, attempt);
      t.response_text = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
      t.created_unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
      return t;
    }
    throw TransportError("chat backend failed after " + std::to_string(config.retries + 1) +
                         " attempts: " + last_error);
  }

 private:
  std::string base_url_;
  std::string api_key_;
  int backoff_base_ms_;
};

// Replays transcripts from the fixture store; a missing key is an error,
// never a silent fall-through to a live call.
class ReplayChatBackend : public ChatBackend {
 public:
  explicit ReplayChatBackend(std::shared_ptr<FixtureStore> store) : store_(std::move(store)) {}

  Transcript complete(const std::string& prompt, const GenerationConfig& config, int max_tokens,
                      int attempt) override {
    std::string key = cache_key(prompt, config.model, config.temperature, max_tokens, attempt);
    auto t = store_->load(key);
    if (!t) {
      throw ReplayMissError("replay miss for cache key " + key + " (model=" + config.model +
                            ", attempt=" + std::to_string(attempt) + ")");
    }
    return *t;
  }

 private:
  std::shared_ptr<FixtureStore> store_;
};

// Live calls persisted into the fixture store. Existing keys are reused so
// an interrupted recording run can resume without re-spending tokens.
class RecordChatBackend : public ChatBackend {
 public:
  RecordChatBackend(std::unique_ptr<ChatBackend> live, std::shared_ptr<FixtureStore> store)
      : live_(std::move(live)), store_(std::move(store)) {}

  Transcript complete(const std::string& prompt, const GenerationConfig& config, int max_tokens,
                      int attempt) override {
    std::string key = cache_key(prompt, config.model, config.temperature, max_tokens, attempt);
    if (auto cached = store_->load(key)) return *cached;
    Transcript t = live_->complete(prompt, config, max_tokens, attempt);
    store_->save(t);
    return t;
  }

 private:
  std::unique_ptr<ChatBackend> live_;
  std::shared_ptr<FixtureStore> store_;
};

// ---------------------------------------------------------------------------
// Response parsing

namespace detail {

// Strips a leading "1.", "1)" or "- " style marker; returns the remainder
// or nullopt when the line carries no marker.
inline std::optional<std::string> strip_list_marker(std::string_view line) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  size_t digits = i;
  while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
  if (digits > i && digits < line.size() && (line[digits] == '.' || line[digits] == ')')) {
    return std::string(line.substr(digits + 1));
  }
  if (i < line.size() && (line[i] == '-' || line[i] == '*') && i + 1 < line.size() &&
      line[i + 1] == ' ') {
    return std::string(line.substr(i + 2));
  }
  return std::nullopt;
}

inline std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace detail

// Pulls expected_n sentences out of a completion. Lines with a list marker
// win; if no line has one, non-empty lines are taken as-is. Fewer than
// expected_n recovered sentences is a parse shortfall.
inline std::vector<Sentence> parse_sentences(const std::string& raw, int expected_n) {
  if (expected_n < 1) throw EvaluationError("parse_sentences: expected_n must be >= 1");
  std::vector<std::string> marked, plain;
  size_t start = 0;
  while (start <= raw.size()) {
    size_t nl = raw.find('\n', start);
    std::string_view line(raw.data() + start, (nl == std::string::npos ? raw.size() : nl) - start);
    if (auto rest = detail::strip_list_marker(line)) {
      std::string t = detail::trim(*rest);
      if (!t.empty()) marked.push_back(std::move(t));
    } else {
      std::string t = detail::trim(line);
      if (!t.empty()) plain.push_back(std::move(t));
    }
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  const std::vector<std::string>& chosen = marked.empty() ? plain : marked;
  if (static_cast<int>(chosen.size()) < expected_n) {
    throw ParseShortfallError("parsed " + std::to_string(chosen.size()) + " sentences, expected " +
                              std::to_string(expected_n));
  }
  std::vector<Sentence> out;
  out.reserve(static_cast<size_t>(expected_n));
  for (int i = 0; i < expected_n; ++i) out.push_back(Sentence::make(chosen[static_cast<size_t>(i)]));
  return out;
}

struct SentenceCompletion {
  std::vector<Sentence> sentences;
  std::vector<Transcript> transcripts;
};

// One completion plus a single re-generation with a fresh attempt index if
// the first response cannot be parsed into n sentences.
inline SentenceCompletion complete_sentences(ChatBackend& backend, const std::string& prompt,
                                             const GenerationConfig& config, int n,
                                             int base_attempt = 0) {
  SentenceCompletion out;
  const int max_tokens = config.max_tokens_for(n);
  for (int attempt = base_attempt;; ++attempt) {
    Transcript t = backend.complete(prompt, config, max_tokens, attempt);
    try {
      out.sentences = parse_sentences(t.response_text, n);
      t.parsed_sentences.clear();
      for (const auto& s : out.sentences) t.parsed_sentences.push_back(s.raw);
      out.transcripts.push_back(std::move(t));
      return out;
    } catch (const ParseShortfallError&) {
      out.transcripts.push_back(std::move(t));
      if (attempt > base_attempt) throw;
    }
  }
}

}  // namespace icd
