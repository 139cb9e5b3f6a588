#pragma once

// Embedding provider clients. The toolkit never hosts a model itself: a
// provider is either an HTTP service implementing the two endpoints below
// or a directory of per-text fixture records addressed by content hash
// (the deterministic option used throughout the tests).
//
//   POST /embed/sentence  {"texts": [...], "kind": "sentence"|"pooler"}
//                         -> {"dim": d, "vectors": [[...], ...]}
//   POST /embed/tokens    {"texts": [...]}
//                         -> {"dim": d, "tokens": [[...], ...],
//                             "vectors": [[[...], ...], ...]}

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "icd/error.hpp"
#include "icd/semantic.hpp"
#include "icd/sha256.hpp"

namespace icd {

enum class EmbeddingKind { sentence, pooler };

inline const char* to_string(EmbeddingKind k) {
  return k == EmbeddingKind::sentence ? "sentence" : "pooler";
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts,
                                                       EmbeddingKind kind) = 0;
  virtual std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) = 0;

  std::vector<EmbeddingVector> embed_pooler(const std::vector<std::string>& texts) {
    return embed_sentences(texts, EmbeddingKind::pooler);
  }
};

class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string base_url) : base_url_(std::move(base_url)) {}

  std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts,
                                               EmbeddingKind kind) override {
    nlohmann::json req;
    req["texts"] = texts;
    req["kind"] = to_string(kind);
    nlohmann::json res = post("/embed/sentence", req);
    auto vectors = res.at("vectors").get<std::vector<EmbeddingVector>>();
    if (vectors.size() != texts.size()) {
      throw EvaluationError("embedding provider returned misaligned vector count");
    }
    return vectors;
  }

  std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) override {
    nlohmann::json req;
    req["texts"] = texts;
    nlohmann::json res = post("/embed/tokens", req);
    auto tokens = res.at("tokens").get<std::vector<std::vector<std::string>>>();
    auto vectors = res.at("vectors").get<std::vector<std::vector<EmbeddingVector>>>();
    if (tokens.size() != texts.size() || vectors.size() != texts.size()) {
      throw EvaluationError("embedding provider returned misaligned token payload");
    }
    std::vector<TokenEmbeddings> out(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
      out[i].tokens = std::move(tokens[i]);
      out[i].vectors = std::move(vectors[i]);
    }
    return out;
  }

 private:
  nlohmann::json post(const std::string& path, const nlohmann::json& body) {
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res) {
      throw TransportError("embedding provider unreachable at " + base_url_ + path);
    }
    if (res->status != 200) {
      throw TransportError("embedding provider " + path + " returned HTTP " +
                           std::to_string(res->status));
    }
    return nlohmann::json::parse(res->body);
  }

  std::string base_url_;
};

// Fixture records on disk, one JSON file per text named by sha256(text).
class FileEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(std::filesystem::path dir) : dir_(std::move(dir)) {
    if (!std::filesystem::is_directory(dir_)) {
      throw ConfigError("embedding fixture directory not found: " + dir_.string());
    }
  }

  static std::filesystem::path record_path(const std::filesystem::path& dir, const std::string& text) {
    return dir / (sha256_hex(text) + ".json");
  }

  std::vector<EmbeddingVector> embed_sentences(const std::vector<std::string>& texts,
                                               EmbeddingKind kind) override {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      nlohmann::json rec = load(t);
      out.push_back(rec.at(to_string(kind)).get<EmbeddingVector>());
    }
    return out;
  }

  std::vector<TokenEmbeddings> embed_tokens(const std::vector<std::string>& texts) override {
    std::vector<TokenEmbeddings> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      nlohmann::json rec = load(t);
      TokenEmbeddings te;
      te.tokens = rec.at("tokens").get<std::vector<std::string>>();
      te.vectors = rec.at("token_vectors").get<std::vector<EmbeddingVector>>();
      out.push_back(std::move(te));
    }
    return out;
  }

 private:
  nlohmann::json load(const std::string& text) {
    auto path = record_path(dir_, text);
    std::ifstream in(path);
    if (!in) {
      throw EvaluationError("no embedding fixture for text \"" + text + "\" (expected " +
                            path.string() + ")");
    }
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corrupt embedding fixture " + path.string() + ": " + e.what());
    }
  }

  std::filesystem::path dir_;
};

}  // namespace icd
