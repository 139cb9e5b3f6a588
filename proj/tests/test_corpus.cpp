#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "icd/corpus.hpp"

using icd::DatasetFormat;
using icd::export_moe_training;
using icd::Instance;
using icd::load_dataset;
using icd::MoeRecord;
using icd::RunInstanceData;
using icd::Sentence;
using icd::TaskKind;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  auto path = std::filesystem::temp_directory_path() / ("icd_corpus_" + name);
  std::ofstream out(path, std::ios::trunc);
  out << content;
  return path;
}

RunInstanceData run_data(std::initializer_list<const char*> gens,
                         std::initializer_list<const char*> refs) {
  RunInstanceData d;
  d.instance.id = "inst";
  d.instance.task = TaskKind::concepts_to_sentence;
  d.instance.concepts = {"dog", "frisbee"};
  for (const char* r : refs) d.instance.references.push_back(Sentence::make(r));
  for (const char* g : gens) d.generations.push_back(Sentence::make(g));
  return d;
}

}  // namespace

TEST_CASE("load_dataset parses the three benchmark formats") {
  auto cg = write_temp("cg.jsonl",
                       R"({"concept_set": "Dog#Frisbee#Throw#Catch", "scene": ["A dog catches.", "A man throws."]})"
                       "\n"
                       R"({"concept_set": ["book", "shelf"], "scene": ["Books sit on a shelf."]})"
                       "\n");
  auto instances = load_dataset(cg, DatasetFormat::commongen);
  REQUIRE(instances.size() == 2);
  CHECK(instances[0].task == TaskKind::concepts_to_sentence);
  CHECK(instances[0].concepts == std::vector<std::string>{"dog", "frisbee", "throw", "catch"});
  CHECK(instances[0].references.size() == 2);
  CHECK(instances[0].id == "dog#frisbee#throw#catch");
  CHECK(instances[0].input_text() == "dog, frisbee, throw, catch");

  auto comve = write_temp("comve.jsonl",
                          R"({"id": "s1", "statement": "He ate a car for lunch.", "references": ["Cars are not food.", "A car cannot be eaten.", "Nobody eats cars."]})"
                          "\n");
  auto cv = load_dataset(comve, DatasetFormat::comve);
  REQUIRE(cv.size() == 1);
  CHECK(cv[0].task == TaskKind::statement_to_explanation);
  CHECK(cv[0].references.size() == 3);
  CHECK(cv[0].input_text() == "He ate a car for lunch.");
  CHECK(cv[0].id == "s1");

  auto dg = write_temp("dg.jsonl", R"({"concepts": ["cloud", "mountain"], "references": ["Clouds wrap the mountain."]})"
                                   "\n");
  auto dim = load_dataset(dg, DatasetFormat::dimongen);
  REQUIRE(dim.size() == 1);
  CHECK(dim[0].task == TaskKind::concept_pair);
  CHECK(dim[0].concepts.size() == 2);
}

TEST_CASE("load_dataset reports malformed lines and empty files") {
  auto bad = write_temp("bad.jsonl", "{\"concept_set\": \"a#b\", \"scene\": [\"x\"]}\nnot json\n");
  try {
    load_dataset(bad, DatasetFormat::commongen);
    FAIL("expected DataError");
  } catch (const icd::DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  auto empty = write_temp("empty.jsonl", "\n\n");
  CHECK_THROWS_AS(load_dataset(empty, DatasetFormat::commongen), icd::DataError);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.jsonl", DatasetFormat::commongen), icd::DataError);

  auto missing = write_temp("missing.jsonl", R"({"scene": ["x"]})" "\n");
  CHECK_THROWS_AS(load_dataset(missing, DatasetFormat::commongen), icd::DataError);
}

TEST_CASE("instance json round trip") {
  Instance inst;
  inst.id = "x";
  inst.task = TaskKind::statement_to_explanation;
  inst.statement = "Fish drive buses.";
  inst.references = {Sentence::make("Fish cannot drive."), Sentence::make("Buses need drivers.")};
  auto j = icd::instance_to_json(inst);
  Instance back = icd::instance_from_json(j);
  CHECK(back.id == inst.id);
  CHECK(back.task == inst.task);
  CHECK(back.statement == inst.statement);
  REQUIRE(back.references.size() == 2);
  CHECK(back.references[0].raw == inst.references[0].raw);
  CHECK(back.references[0].tokens == inst.references[0].tokens);
}

TEST_CASE("export_moe_training splits near-equally and pairs every reference") {
  auto d = run_data({"g one", "g two", "g three", "g four", "g five", "g six"},
                    {"ref a", "ref b"});
  std::vector<RunInstanceData> runs = {d};
  auto records = export_moe_training(runs, 3, 42);
  // 3 experts x 2 references
  REQUIRE(records.size() == 6);
  std::map<int, int> per_expert;
  for (const auto& r : records) per_expert[r.expert]++;
  CHECK(per_expert[1] == 2);
  CHECK(per_expert[2] == 2);
  CHECK(per_expert[3] == 2);
  for (const auto& r : records) {
    CHECK(r.input.find("<EXP" + std::to_string(r.expert) + ">") == 0);
    CHECK(r.input.find("[CLS] dog, frisbee") != std::string::npos);
    CHECK((r.target == "ref a" || r.target == "ref b"));
  }
  // six sentences over three experts: two [SEP]-joined sentences per expert
  for (const auto& r : records) {
    size_t seps = 0;
    for (size_t pos = 0; (pos = r.input.find("[SEP]", pos)) != std::string::npos; pos += 5) ++seps;
    CHECK(seps == 2);
  }
}

TEST_CASE("export_moe_training puts remainders on low-index experts") {
  auto d = run_data({"s1", "s2", "s3", "s4", "s5", "s6", "s7"}, {"r"});
  auto records = export_moe_training(std::vector<RunInstanceData>{d}, 3, 0);
  REQUIRE(records.size() == 3);
  auto sep_count = [](const std::string& s) {
    size_t n = 0;
    for (size_t pos = 0; (pos = s.find("[SEP]", pos)) != std::string::npos; pos += 5) ++n;
    return n;  // sentences per expert = seps - 0 (input x uses no [SEP] prefix)
  };
  // subset sizes 3, 2, 2 -> separator counts 3, 2, 2
  CHECK(sep_count(records[0].input) == 3);
  CHECK(sep_count(records[1].input) == 2);
  CHECK(sep_count(records[2].input) == 2);
}

TEST_CASE("every generation lands in exactly one expert subset") {
  auto d = run_data({"s1", "s2", "s3", "s4", "s5", "s6", "s7"}, {"r"});
  auto records = export_moe_training(std::vector<RunInstanceData>{d}, 3, 99);
  std::map<std::string, int> seen;
  for (const auto& r : records) {
    for (const auto& g : d.generations) {
      if (r.input.find("[SEP] " + g.raw) != std::string::npos) seen[g.raw]++;
    }
  }
  REQUIRE(seen.size() == 7);
  for (const auto& [raw, count] : seen) CHECK(count == 1);
}

TEST_CASE("export_moe_training is deterministic in (runs, E, seed)") {
  auto d = run_data({"s1", "s2", "s3", "s4", "s5"}, {"r1", "r2"});
  std::vector<RunInstanceData> runs = {d};
  auto a = export_moe_training(runs, 2, 7);
  auto b = export_moe_training(runs, 2, 7);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].expert == b[i].expert);
    CHECK(a[i].input == b[i].input);
    CHECK(a[i].target == b[i].target);
  }
  CHECK(icd::moe_records_to_jsonl(a) == icd::moe_records_to_jsonl(b));
}

TEST_CASE("export_moe_training errors on too few sentences") {
  auto d = run_data({"s1", "s2"}, {"r"});
  CHECK_THROWS_AS(export_moe_training(std::vector<RunInstanceData>{d}, 3, 0), icd::DataError);
}

TEST_CASE("single-expert export groups everything under one marker") {
  auto d = run_data({"s1", "s2", "s3"}, {"r"});
  auto records = export_moe_training(std::vector<RunInstanceData>{d}, 1, 5);
  REQUIRE(records.size() == 1);
  CHECK(records[0].expert == 1);
  size_t seps = 0;
  for (size_t pos = 0; (pos = records[0].input.find("[SEP]", pos)) != std::string::npos; pos += 5) ++seps;
  CHECK(seps == 3);
}
