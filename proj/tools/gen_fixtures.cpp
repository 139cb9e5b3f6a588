// Builds the deterministic demo assets under data/demo: a transcript
// fixture store covering the default / step-1 / step-2 / judge calls for
// the demo dataset, synthetic embedding fixture records for every text the
// evaluation touches, the run config the fixtures were produced for, and a
// small human-ratings table for the agreement report.
//
// The generator drives the real pipeline: it writes the generation
// transcripts, replays them through cmd_generate to learn the selected
// sets, and only then fabricates the judge fixtures for those sets, so the
// shipped store is complete by construction.
//
// Run from the repository root: build/tools/icd_gen_fixtures

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "icd/commands.hpp"

namespace fs = std::filesystem;
using icd::Sentence;

namespace {

struct CannedInstance {
  std::string id;
  std::vector<std::string> default_resp;
  std::vector<std::string> step1_resp;
  std::vector<std::string> step2_resp;  // empty when step 1 has no duplicates
  std::vector<std::string> judge_resp;  // one per judge repeat
};

std::vector<CannedInstance> canned() {
  return {
      {"dog#frisbee#throw#catch",
       {"A man throws a frisbee and his dog catches it.",
        "A man throws a frisbee and his dog catches it in the air.",
        "A man throws the frisbee and his dog catches it at the park."},
       {"A dog catches the frisbee that a man throws.",
        "The dog leaps to catch the frisbee after the throw.",
        "A dog catches the frisbee that a man throws."},
       {"From the dog's point of view, every throw is an invitation to catch the flying frisbee.",
        "Kids take turns throwing a frisbee while the neighbour's dog tries to catch every toss.",
        "After a long throw, the frisbee hangs in the wind until the dog jumps and catches it."},
       {"somewhat diverse", "highly diverse", "Category: neutral"}},
      {"book#shelf#read#quiet",
       {"She takes a book from the shelf and reads in the quiet room.",
        "She takes a book off the shelf and reads in the quiet room.",
        "He takes a book from the shelf to read in the quiet library."},
       {"A student reads a borrowed book beside the quiet shelf.",
        "In the quiet attic, an old shelf holds the book she reads every winter.",
        "He reads so softly that the quiet around the book shelf never breaks."},
       {},
       {"somewhat diverse", "somewhat diverse", "somewhat diverse"}},
      {"rain#umbrella#street#walk",
       {"A woman walks down the street with an umbrella in the rain.",
        "A man walks down the street holding an umbrella in the rain.",
        "People walk down the street with umbrellas in the rain."},
       {"Rain drums on the umbrella as she walks up the street.",
        "rain drums on the umbrella as she walks up the street.",
        "The street shines while walkers pass with umbrellas in the rain."},
       {"Halfway down the street he gives his umbrella away and walks on through the rain.",
        "Children walk barefoot in the rain, spinning a broken umbrella along the street.",
        "An old couple walks arm in arm, one umbrella between them, as rain floods the street."},
       {"highly diverse", "somewhat diverse", "highly diverse"}},
      {"chef#knife#onion#chop",
       {"The chef chops an onion with a sharp knife.",
        "The chef chops onions with his knife.",
        "A chef uses a knife to chop an onion."},
       {"Before service, the chef sharpens the knife he will use to chop a crate of onions.",
        "The young chef cries while the knife chops through her first onion.",
        "With one clean chop of the knife, the chef splits the onion in half."},
       {},
       {"neutral", "somewhat diverse", "neutral"}},
      {"kid#kite#wind#fly",
       {"A kid flies a kite in the strong wind.",
        "A kid flies his kite in the wind.",
        "The kid flies a kite as the wind blows."},
       {"The kid repairs the kite before the wind lets it fly again.",
        "High wind almost pulls the kite from the kid's hands as it flies.",
        "On the beach a kid teaches her brother to fly a kite against the wind."},
       {},
       {"somewhat similar", "neutral", "neutral"}},
  };
}

std::string numbered(const std::vector<std::string>& sentences) {
  std::string out;
  for (size_t i = 0; i < sentences.size(); ++i) {
    out += std::to_string(i + 1) + ". " + sentences[i] + "\n";
  }
  return out;
}

uint64_t seed_from_text(const std::string& tag, const std::string& text) {
  std::string hex = icd::sha256_hex(tag + ":" + text).substr(0, 16);
  return std::stoull(hex, nullptr, 16);
}

std::vector<double> synth_vector(const std::string& tag, const std::string& text, size_t dim) {
  uint64_t state = seed_from_text(tag, text);
  std::vector<double> v(dim);
  for (auto& x : v) {
    uint64_t bits = icd::detail::splitmix64(state);
    x = 2.0 * (static_cast<double>(bits >> 11) / 9007199254740992.0) - 1.0;
  }
  return v;
}

void write_embedding_record(const fs::path& dir, const std::string& text, size_t dim) {
  nlohmann::ordered_json rec;
  rec["text"] = text;
  rec["dim"] = dim;
  rec["sentence"] = synth_vector("sentence", text, dim);
  rec["pooler"] = synth_vector("pooler", text, dim);
  auto tokens = icd::tokenize(icd::normalize(text));
  rec["tokens"] = tokens;
  nlohmann::ordered_json token_vectors = nlohmann::ordered_json::array();
  for (const auto& tok : tokens) token_vectors.push_back(synth_vector("token", tok, dim));
  rec["token_vectors"] = std::move(token_vectors);
  icd::atomic_write_file(icd::FileEmbeddingProvider::record_path(dir, text),
                         rec.dump(2) + "\n");
}

void store_response(icd::FixtureStore& store, const std::string& prompt,
                    const icd::GenerationConfig& gen, int max_tokens, int attempt,
                    const std::string& response) {
  icd::Transcript t;
  t.prompt = prompt;
  t.model = gen.model;
  t.temperature = gen.temperature;
  t.max_tokens = max_tokens;
  t.attempt = attempt;
  t.cache_key = icd::cache_key(prompt, gen.model, gen.temperature, max_tokens, attempt);
  t.response_text = response;
  t.created_unix_ms = 0;
  store.save(t);
}

}  // namespace

int main(int argc, char** argv) {
  fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path(".");
  fs::path data = root / "data";
  fs::path demo = data / "demo";
  fs::path fixture_dir = demo / "fixtures";
  fs::path embedding_dir = demo / "embeddings";

  try {
    fs::remove_all(fixture_dir);
    fs::remove_all(embedding_dir);
    fs::create_directories(fixture_dir);
    fs::create_directories(embedding_dir);

    icd::RunSpec spec;
    spec.dataset_path = (demo / "commongen_demo.jsonl").string();
    spec.format = icd::DatasetFormat::commongen;
    spec.method = icd::Method::icd;
    spec.backend = icd::BackendMode::replay;
    spec.fixture_dir = fixture_dir.string();
    spec.template_dir = (data / "templates").string();
    spec.few_shot = icd::load_few_shot_file(demo / "few_shot.jsonl");

    auto instances = icd::load_dataset(spec.dataset_path, spec.format);
    auto prompts = icd::load_prompt_bundle(spec.template_dir, spec.format, spec.few_shot);
    auto plan = canned();
    if (instances.size() != plan.size()) {
      std::cerr << "demo dataset and canned plan disagree\n";
      return 1;
    }

    icd::FixtureStore store(fixture_dir);
    const int n = spec.icd.n;
    const int max_tokens = spec.gen.max_tokens_for(n);
    for (size_t i = 0; i < instances.size(); ++i) {
      const auto& inst = instances[i];
      const auto& c = plan[i];
      if (inst.id != c.id) {
        std::cerr << "instance order mismatch: " << inst.id << " vs " << c.id << "\n";
        return 1;
      }
      std::string default_prompt =
          icd::render_prompt(prompts.default_tpl, prompts.few_shot, inst.input_text(), n, {});
      store_response(store, default_prompt, spec.gen, max_tokens, 0, numbered(c.default_resp));

      std::string step1_prompt =
          icd::render_prompt(prompts.step1_tpl, prompts.few_shot, inst.input_text(), n, {});
      store_response(store, step1_prompt, spec.gen, max_tokens, 0, numbered(c.step1_resp));

      if (!c.step2_resp.empty()) {
        std::vector<Sentence> prior;
        for (const auto& s : c.step1_resp) prior.push_back(Sentence::make(s));
        std::string step2_prompt =
            icd::render_prompt(prompts.step2_tpl, prompts.few_shot, inst.input_text(), n, prior);
        store_response(store, step2_prompt, spec.gen, max_tokens, 0, numbered(c.step2_resp));
      }
    }

    // Replay the pipeline to learn the selected sets, then fabricate the
    // judge fixtures for exactly those sets.
    fs::path scratch = fs::temp_directory_path() / "icd_fixture_gen";
    fs::remove_all(scratch);
    spec.out_dir = scratch.string();
    auto summary = icd::cmd_generate(spec);
    if (!summary.failures.empty()) {
      for (const auto& [id, msg] : summary.failures) std::cerr << id << ": " << msg << "\n";
      return 1;
    }

    icd::PromptTemplate judge_tpl =
        icd::PromptTemplate::load_file(fs::path(spec.template_dir) / "judge.txt");
    icd::RunStore run_store(scratch);
    std::vector<std::string> all_texts;
    for (size_t i = 0; i < instances.size(); ++i) {
      auto result = run_store.read_instance(instances[i].id);
      const auto& c = plan[i];

      std::string judge_prompt = icd::render_prompt(
          judge_tpl, {}, "", static_cast<int>(result.selected_set->sentences.size()),
          result.selected_set->sentences);
      for (size_t run = 0; run < c.judge_resp.size(); ++run) {
        store_response(store, judge_prompt, spec.gen, spec.gen.max_tokens_per_sentence,
                       static_cast<int>(2 * run), c.judge_resp[run]);
      }

      for (const auto& raw : result.union_raws) all_texts.push_back(raw);
      for (const auto& ref : instances[i].references) all_texts.push_back(ref.raw);
    }
    fs::remove_all(scratch);

    for (const auto& text : all_texts) write_embedding_record(embedding_dir, text, 16);

    // Paths are repository-root relative; run the CLI from the repo root or
    // resolve them with resolve_run_spec_paths.
    nlohmann::ordered_json config;
    config["dataset_path"] = "data/demo/commongen_demo.jsonl";
    config["format"] = "commongen";
    config["method"] = "icd";
    config["backend"] = "replay";
    config["fixture_dir"] = "data/demo/fixtures";
    config["template_dir"] = "data/templates";
    nlohmann::ordered_json few_shot = nlohmann::ordered_json::array();
    for (const auto& [src, tgt] : spec.few_shot) few_shot.push_back({{"src", src}, {"tgt", tgt}});
    config["few_shot"] = std::move(few_shot);
    icd::atomic_write_file(demo / "run_config.json", config.dump(2) + "\n");

    std::string ratings;
    ratings += "# set_id rater_id rating\n";
    struct Row { const char* id; int r1; int r2; };
    for (const Row& row : std::initializer_list<Row>{{"dog#frisbee#throw#catch", 4, 5},
                                                     {"book#shelf#read#quiet", 4, 4},
                                                     {"rain#umbrella#street#walk", 5, 5},
                                                     {"chef#knife#onion#chop", 3, 4},
                                                     {"kid#kite#wind#fly", 2, 2}}) {
      ratings += std::string(row.id) + " rater1 " + std::to_string(row.r1) + "\n";
      ratings += std::string(row.id) + " rater2 " + std::to_string(row.r2) + "\n";
    }
    icd::atomic_write_file(demo / "human_ratings.tsv", ratings);

    std::cout << "fixtures written under " << demo.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
