#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "icd/gateway.hpp"

using icd::cache_key;
using icd::complete_sentences;
using icd::FewShotExample;
using icd::FixtureStore;
using icd::GenerationConfig;
using icd::parse_sentences;
using icd::PromptTemplate;
using icd::render_prompt;
using icd::Sentence;
using icd::Transcript;

namespace {

const char* kTemplateBody =
    "Write {N} sentences for the given concepts.\n"
    "[EXAMPLES]\n"
    "Concepts: {SRC}\n"
    "Sentence: {TGT}\n"
    "[/EXAMPLES]\n"
    "Concepts: {INPUT}\n"
    "Sentences:\n";

const char* kStep2Body =
    "Previously generated:\n"
    "{PRV}\n"
    "Write {N} different sentences.\n"
    "Concepts: {INPUT}\n";

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("icd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Backend stub that replays scripted responses in call order.
struct ScriptedBackend : icd::ChatBackend {
  std::vector<std::string> responses;
  size_t calls = 0;

  Transcript complete(const std::string& prompt, const GenerationConfig& config, int max_tokens,
                      int attempt) override {
    Transcript t;
    t.prompt = prompt;
    t.model = config.model;
    t.temperature = config.temperature;
    t.max_tokens = max_tokens;
    t.attempt = attempt;
    t.cache_key = cache_key(prompt, config.model, config.temperature, max_tokens, attempt);
    t.response_text = responses.at(calls++);
    return t;
  }
};

}  // namespace

TEST_CASE("render_prompt performs deterministic substitution") {
  auto tpl = PromptTemplate::from_string("t", kTemplateBody);
  std::vector<FewShotExample> shots = {{"cat, sun", "The cat naps in the sun."},
                                       {"boy, hill", "A boy runs down the hill."}};
  std::string a = render_prompt(tpl, shots, "dog, frisbee", 3, {});
  std::string b = render_prompt(tpl, shots, "dog, frisbee", 3, {});
  CHECK(a == b);
  CHECK(a.find("Write 3 sentences") != std::string::npos);
  CHECK(a.find("Concepts: cat, sun") != std::string::npos);
  CHECK(a.find("Sentence: A boy runs down the hill.") != std::string::npos);
  CHECK(a.find("Concepts: dog, frisbee") != std::string::npos);
  CHECK(a.find("{") == std::string::npos);
  // examples render in the given order
  CHECK(a.find("cat, sun") < a.find("boy, hill"));
}

TEST_CASE("render_prompt numbers prior sentences for {PRV}") {
  auto tpl = PromptTemplate::from_string("step2", kStep2Body);
  std::vector<Sentence> prior = {Sentence::make("First one."), Sentence::make("Second one."),
                                 Sentence::make("Third one.")};
  std::string text = render_prompt(tpl, {}, "dog", 3, prior);
  CHECK(text.find("1. First one.") != std::string::npos);
  CHECK(text.find("2. Second one.") != std::string::npos);
  CHECK(text.find("3. Third one.") != std::string::npos);
}

TEST_CASE("render_prompt rejects unbound or misbound placeholders") {
  auto tpl = PromptTemplate::from_string("t", kTemplateBody);
  auto step2 = PromptTemplate::from_string("s2", kStep2Body);
  // {PRV} present but no prior sentences
  CHECK_THROWS_AS(render_prompt(step2, {}, "dog", 3, {}), icd::ConfigError);
  // prior given but the template has no {PRV}
  CHECK_THROWS_AS(render_prompt(tpl, {}, "dog", 3, {Sentence::make("x")}), icd::ConfigError);
  // {INPUT} unbound
  CHECK_THROWS_AS(render_prompt(tpl, {}, "", 3, {}), icd::ConfigError);
  // few-shot examples without an [EXAMPLES] block
  auto no_block = PromptTemplate::from_string("nb", "Concepts: {INPUT}\n");
  CHECK_THROWS_AS(render_prompt(no_block, {{"a", "b"}}, "dog", 3, {}), icd::ConfigError);
  // {SRC} outside the block
  auto stray = PromptTemplate::from_string("s", "{SRC} and {INPUT}");
  CHECK_THROWS_AS(render_prompt(stray, {}, "dog", 3, {}), icd::ConfigError);
}

TEST_CASE("render_prompt distinguishes distinct bindings") {
  auto tpl = PromptTemplate::from_string("t", kTemplateBody);
  std::string a = render_prompt(tpl, {}, "dog, frisbee", 3, {});
  std::string b = render_prompt(tpl, {}, "dog, kite", 3, {});
  std::string c = render_prompt(tpl, {}, "dog, frisbee", 4, {});
  CHECK(a != b);
  CHECK(a != c);
  CHECK(cache_key(a, "m", 1.0, 75, 0) != cache_key(b, "m", 1.0, 75, 0));
}

TEST_CASE("cache_key separates model, temperature, max_tokens and attempt") {
  std::string base = cache_key("p", "m", 1.0, 75, 0);
  CHECK(cache_key("p", "m2", 1.0, 75, 0) != base);
  CHECK(cache_key("p", "m", 0.5, 75, 0) != base);
  CHECK(cache_key("p", "m", 1.0, 76, 0) != base);
  CHECK(cache_key("p", "m", 1.0, 75, 1) != base);
  CHECK(cache_key("p", "m", 1.0, 75, 0) == base);
}

TEST_CASE("parse_sentences handles markers, fallback and shortfall") {
  auto two = parse_sentences("1. A dog runs.\n2. A man throws.", 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].raw == "A dog runs.");
  CHECK(two[1].raw == "A man throws.");

  auto bullets = parse_sentences("- first line\n- second line", 2);
  CHECK(bullets[0].raw == "first line");

  auto parens = parse_sentences("1) one\n2) two\n3) three", 3);
  CHECK(parens[2].raw == "three");

  auto fallback = parse_sentences("plain first\nplain second", 2);
  CHECK(fallback[0].raw == "plain first");

  // markers win over preamble lines
  auto mixed = parse_sentences("Sure, here you go:\n1. real one\n2. real two", 2);
  CHECK(mixed[0].raw == "real one");

  CHECK_THROWS_AS(parse_sentences("1. only one", 3), icd::ParseShortfallError);
  CHECK_THROWS_AS(parse_sentences("", 1), icd::ParseShortfallError);
}

TEST_CASE("parse_sentences strips markers and never returns empties") {
  auto parsed = parse_sentences("1.   padded   \n2. ok\n3. \n4. last", 3);
  for (const auto& s : parsed) {
    CHECK(!s.raw.empty());
    CHECK(s.raw.find("1.") != 0);
  }
  CHECK(parsed[0].raw == "padded");
  CHECK(parsed[2].raw == "last");  // the empty "3." line is skipped
}

TEST_CASE("parse_sentences tolerates arbitrary junk without crashing") {
  std::mt19937 rng(23);
  const std::string alphabet = "ab1. )-*\n\t e\r";
  for (int trial = 0; trial < 300; ++trial) {
    std::string junk;
    size_t len = rng() % 60;
    for (size_t i = 0; i < len; ++i) junk += alphabet[rng() % alphabet.size()];
    try {
      auto parsed = parse_sentences(junk, 1 + static_cast<int>(rng() % 4));
      for (const auto& s : parsed) CHECK(!s.raw.empty());
    } catch (const icd::ParseShortfallError&) {
      // acceptable outcome for junk
    }
  }
}

TEST_CASE("fixture store round-trips transcripts") {
  auto dir = temp_dir("store");
  FixtureStore store(dir);
  Transcript t;
  t.prompt = "hello";
  t.model = "m";
  t.temperature = 1.0;
  t.max_tokens = 75;
  t.attempt = 0;
  t.cache_key = cache_key(t.prompt, t.model, t.temperature, t.max_tokens, t.attempt);
  t.response_text = "1. hi\n";
  t.parsed_sentences = {"hi"};
  t.created_unix_ms = 1234;
  store.save(t);

  auto back = store.load(t.cache_key);
  REQUIRE(back.has_value());
  CHECK(back->prompt == t.prompt);
  CHECK(back->response_text == t.response_text);
  CHECK(back->parsed_sentences == t.parsed_sentences);
  CHECK(back->created_unix_ms == 1234);
  CHECK(!store.load("missing-key").has_value());
  std::filesystem::remove_all(dir);
}

TEST_CASE("a corrupt fixture file surfaces as a data error, not a crash") {
  auto dir = temp_dir("corrupt");
  FixtureStore store(dir);
  GenerationConfig cfg;
  std::string key = cache_key("p", cfg.model, cfg.temperature, 75, 0);
  icd::atomic_write_file(store.path_for(key), "this is not json");
  CHECK_THROWS_AS(store.load(key), icd::DataError);
  icd::ReplayChatBackend replay(std::make_shared<FixtureStore>(dir));
  CHECK_THROWS_AS(replay.complete("p", cfg, 75, 0), icd::DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("replay backend returns fixtures verbatim and fails loudly on misses") {
  auto dir = temp_dir("replay");
  auto store = std::make_shared<FixtureStore>(dir);
  GenerationConfig cfg;
  Transcript t;
  t.prompt = "p";
  t.model = cfg.model;
  t.temperature = cfg.temperature;
  t.max_tokens = 75;
  t.attempt = 0;
  t.cache_key = cache_key(t.prompt, t.model, t.temperature, t.max_tokens, t.attempt);
  t.response_text = "fixture text";
  store->save(t);

  icd::ReplayChatBackend replay(store);
  CHECK(replay.complete("p", cfg, 75, 0).response_text == "fixture text");
  CHECK_THROWS_AS(replay.complete("other prompt", cfg, 75, 0), icd::ReplayMissError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("record backend stores live responses and reuses existing keys") {
  auto dir = temp_dir("record");
  auto store = std::make_shared<FixtureStore>(dir);
  auto scripted = std::make_unique<ScriptedBackend>();
  scripted->responses = {"1. first\n2. second\n3. third"};
  auto* raw = scripted.get();
  icd::RecordChatBackend record(std::move(scripted), store);

  GenerationConfig cfg;
  auto t1 = record.complete("p", cfg, 75, 0);
  CHECK(raw->calls == 1);
  CHECK(store->load(t1.cache_key).has_value());
  auto t2 = record.complete("p", cfg, 75, 0);  // served from the store
  CHECK(raw->calls == 1);
  CHECK(t2.response_text == t1.response_text);
  std::filesystem::remove_all(dir);
}

TEST_CASE("complete_sentences retries once with a fresh attempt on parse shortfall") {
  ScriptedBackend backend;
  backend.responses = {"only one line", "1. one\n2. two\n3. three"};
  GenerationConfig cfg;
  auto out = complete_sentences(backend, "prompt", cfg, 3);
  CHECK(backend.calls == 2);
  REQUIRE(out.sentences.size() == 3);
  CHECK(out.transcripts.size() == 2);
  CHECK(out.transcripts[0].attempt == 0);
  CHECK(out.transcripts[1].attempt == 1);
  CHECK(out.transcripts[1].parsed_sentences.size() == 3);

  ScriptedBackend hopeless;
  hopeless.responses = {"nothing", "still nothing"};
  CHECK_THROWS_AS(complete_sentences(hopeless, "prompt", cfg, 3), icd::ParseShortfallError);
}

TEST_CASE("live backend retries through 429 and recovers") {
  std::atomic<int> hits{0};
  httplib::Server server;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    int n = ++hits;
    if (n <= 2) {
      res.status = 429;
      res.set_content("slow down", "text/plain");
      return;
    }
    auto body = nlohmann::json::parse(req.body);
    CHECK(body.at("model") == "test-model");
    CHECK(body.at("max_tokens") == 75);
    CHECK(req.get_header_value("Authorization") == "Bearer test-key");
    nlohmann::json out = {
        {"choices", {{{"message", {{"role", "assistant"}, {"content", "1. a\n2. b\n3. c"}}}}}}};
    res.set_content(out.dump(), "application/json");
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  GenerationConfig cfg;
  cfg.model = "test-model";
  cfg.retries = 2;
  icd::LiveChatBackend backend("http://127.0.0.1:" + std::to_string(port), "test-key",
                               /*backoff_base_ms=*/1);
  auto t = backend.complete("prompt", cfg, 75, 0);
  CHECK(t.response_text == "1. a\n2. b\n3. c");
  CHECK(hits.load() == 3);

  // exhausting retries surfaces a transport error
  hits.store(-100);
  GenerationConfig tight = cfg;
  tight.retries = 1;
  CHECK_THROWS_AS(backend.complete("prompt2", tight, 75, 0), icd::TransportError);

  server.stop();
  thread.join();
}
