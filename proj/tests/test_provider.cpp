#include <doctest.h>

#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "icd/commands.hpp"
#include "icd/provider.hpp"

namespace fs = std::filesystem;

using icd::EmbeddingKind;
using icd::FileEmbeddingProvider;
using icd::HttpEmbeddingProvider;

namespace {

// Serves both embedding endpoints with transparent synthetic vectors: the
// i-th text maps to a one-hot-ish vector so tests can predict outputs.
class EmbeddingServer {
 public:
  EmbeddingServer() {
    server_.Post("/embed/sentence", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      auto texts = body.at("texts").get<std::vector<std::string>>();
      CHECK(body.at("kind").is_string());
      nlohmann::json vectors = nlohmann::json::array();
      for (size_t i = 0; i < texts.size(); ++i) {
        std::vector<double> v(4, 0.0);
        v[i % 4] = 1.0;
        if (body.at("kind") == "pooler") v[(i + 1) % 4] = 0.5;
        vectors.push_back(v);
      }
      res.set_content(nlohmann::json{{"dim", 4}, {"vectors", vectors}}.dump(), "application/json");
    });
    server_.Post("/embed/tokens", [](const httplib::Request& req, httplib::Response& res) {
      auto body = nlohmann::json::parse(req.body);
      auto texts = body.at("texts").get<std::vector<std::string>>();
      nlohmann::json tokens = nlohmann::json::array();
      nlohmann::json vectors = nlohmann::json::array();
      for (const auto& text : texts) {
        auto toks = icd::tokenize(icd::normalize(text));
        nlohmann::json per_text = nlohmann::json::array();
        for (size_t t = 0; t < toks.size(); ++t) {
          std::vector<double> v(4, 0.0);
          v[t % 4] = 1.0;
          per_text.push_back(v);
        }
        tokens.push_back(toks);
        vectors.push_back(per_text);
      }
      res.set_content(nlohmann::json{{"dim", 4}, {"tokens", tokens}, {"vectors", vectors}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~EmbeddingServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_CASE("http embedding provider round-trips both endpoints") {
  EmbeddingServer server;
  HttpEmbeddingProvider provider(server.url());

  auto sent = provider.embed_sentences({"a b", "c d"}, EmbeddingKind::sentence);
  REQUIRE(sent.size() == 2);
  CHECK(sent[0] == icd::EmbeddingVector{1, 0, 0, 0});
  CHECK(sent[1] == icd::EmbeddingVector{0, 1, 0, 0});

  auto pooler = provider.embed_pooler({"a b"});
  CHECK(pooler[0] == icd::EmbeddingVector{1, 0.5, 0, 0});

  auto tokens = provider.embed_tokens({"a b", "one two three"});
  REQUIRE(tokens.size() == 2);
  CHECK(tokens[0].tokens == std::vector<std::string>{"a", "b"});
  CHECK(tokens[0].vectors.size() == 2);
  CHECK(tokens[1].vectors.size() == 3);
}

TEST_CASE("http embedding provider surfaces transport failures") {
  HttpEmbeddingProvider provider("http://127.0.0.1:1");
  CHECK_THROWS_AS(provider.embed_sentences({"x"}, EmbeddingKind::sentence), icd::TransportError);
}

TEST_CASE("file embedding provider reads fixture records and misses loudly") {
  fs::path dir = fs::temp_directory_path() / "icd_prov_files";
  fs::remove_all(dir);
  fs::create_directories(dir);

  nlohmann::ordered_json rec;
  rec["text"] = "hello world";
  rec["dim"] = 2;
  rec["sentence"] = {1.0, 0.0};
  rec["pooler"] = {0.0, 1.0};
  rec["tokens"] = {"hello", "world"};
  rec["token_vectors"] = {{1.0, 0.0}, {0.0, 1.0}};
  icd::atomic_write_file(FileEmbeddingProvider::record_path(dir, "hello world"), rec.dump());

  FileEmbeddingProvider provider(dir);
  auto s = provider.embed_sentences({"hello world"}, EmbeddingKind::sentence);
  CHECK(s[0] == icd::EmbeddingVector{1.0, 0.0});
  auto p = provider.embed_pooler({"hello world"});
  CHECK(p[0] == icd::EmbeddingVector{0.0, 1.0});
  auto t = provider.embed_tokens({"hello world"});
  CHECK(t[0].tokens.size() == 2);

  CHECK_THROWS_AS(provider.embed_sentences({"unknown text"}, EmbeddingKind::sentence),
                  icd::EvaluationError);
  CHECK_THROWS_AS(FileEmbeddingProvider(dir / "missing"), icd::ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("record mode against a live server replays identically afterwards") {
  // A stub chat server with deterministic responses keyed by a request
  // counter embedded in the completion text would break replay; instead the
  // response depends only on the prompt, which is what a temperature-0
  // deployment looks like.
  httplib::Server server;
  server.Post("/v1/chat/completions", [](const httplib::Request& req, httplib::Response& res) {
    auto body = nlohmann::json::parse(req.body);
    std::string prompt = body.at("messages").at(0).at("content").get<std::string>();
    std::string marker = prompt.find("different") != std::string::npos ? "varied" : "plain";
    std::string text = "1. The " + marker + " dog plays with a frisbee.\n2. A " + marker +
                       " man makes a throw.\n3. The catch ends the " + marker + " game.";
    nlohmann::json out = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  const fs::path root = ICD_REPO_ROOT;
  fs::path fixtures = fs::temp_directory_path() / "icd_record_fixtures";
  fs::path recorded = fs::temp_directory_path() / "icd_record_run";
  fs::path replayed = fs::temp_directory_path() / "icd_replay_run";
  fs::remove_all(fixtures);
  fs::remove_all(recorded);
  fs::remove_all(replayed);
  fs::create_directories(fixtures);

  icd::RunSpec spec;
  spec.dataset_path = (root / "data" / "demo" / "commongen_demo.jsonl").string();
  spec.format = icd::DatasetFormat::commongen;
  spec.method = icd::Method::icd;
  spec.backend = icd::BackendMode::record;
  spec.base_url = "http://127.0.0.1:" + std::to_string(port);
  spec.api_key = "test-key";
  spec.fixture_dir = fixtures.string();
  spec.template_dir = (root / "data" / "templates").string();
  spec.range = {{0, 2}};
  spec.out_dir = recorded.string();

  auto summary = icd::cmd_generate(spec);
  REQUIRE(summary.failures.empty());
  CHECK(summary.succeeded == 2);
  CHECK(!fs::is_empty(fixtures));

  server.stop();
  thread.join();

  // with the server gone, replay must reproduce the identical run
  icd::RunSpec replay = spec;
  replay.backend = icd::BackendMode::replay;
  replay.base_url.clear();
  replay.api_key.clear();
  replay.out_dir = replayed.string();
  auto replay_summary = icd::cmd_generate(replay);
  REQUIRE(replay_summary.failures.empty());

  auto tree_a = icd::detail::read_tree(recorded / "instances");
  auto tree_b = icd::detail::read_tree(replayed / "instances");
  CHECK(!tree_a.empty());
  CHECK(tree_a == tree_b);

  fs::remove_all(fixtures);
  fs::remove_all(recorded);
  fs::remove_all(replayed);
}
