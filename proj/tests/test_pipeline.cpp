#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "icd/commands.hpp"
#include "icd/run_store.hpp"

namespace fs = std::filesystem;

using icd::cmd_evaluate;
using icd::cmd_export_moe;
using icd::cmd_generate;
using icd::cmd_judge;
using icd::cmd_replay_verify;
using icd::EvalConfig;
using icd::JudgeSpec;
using icd::RunSpec;
using icd::RunStore;

namespace {

const fs::path kRoot = ICD_REPO_ROOT;

RunSpec demo_spec(const fs::path& out_dir) {
  RunSpec spec;
  std::ifstream in(kRoot / "data" / "demo" / "run_config.json");
  REQUIRE(in);
  icd::apply_config_json(spec, nlohmann::json::parse(in));
  icd::resolve_run_spec_paths(spec, kRoot);
  spec.out_dir = out_dir.string();
  return spec;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("icd_pipe_" + name);
  fs::remove_all(dir);
  return dir;
}

fs::path demo_run() {
  static fs::path dir = [] {
    fs::path d = fresh_dir("shared_run");
    auto summary = cmd_generate(demo_spec(d));
    REQUIRE(summary.failures.empty());
    REQUIRE(summary.succeeded == 5);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("generate over the shipped fixtures is deterministic") {
  fs::path a = fresh_dir("gen_a");
  fs::path b = fresh_dir("gen_b");
  REQUIRE(cmd_generate(demo_spec(a)).failures.empty());
  REQUIRE(cmd_generate(demo_spec(b)).failures.empty());
  auto ta = icd::detail::read_tree(a);
  auto tb = icd::detail::read_tree(b);
  REQUIRE(ta.size() == tb.size());
  CHECK(ta == tb);
  CHECK(ta.count("manifest.json") == 1);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("generated run contains full provenance") {
  RunStore store(demo_run());
  auto manifest = store.read_manifest();
  CHECK(manifest.instance_ids.size() == 5);
  CHECK(manifest.template_hashes.at("default").size() == 64);
  CHECK(manifest.config.at("method") == "icd");
  // credentials never land in the manifest
  CHECK(manifest.config.dump().find("api_key") == std::string::npos);

  auto result = store.read_instance("rain#umbrella#street#walk");
  CHECK(result.trigger_fired);  // case-variant duplicate in the step-1 fixture
  REQUIRE(result.step2_set.has_value());
  REQUIRE(result.selected_set.has_value());
  CHECK(result.selected_set->sentences.size() == 3);
  CHECK(!result.selection_rationale.empty());

  auto quiet = store.read_instance("book#shelf#read#quiet");
  CHECK(!quiet.trigger_fired);
  CHECK(!quiet.step2_set.has_value());
}

TEST_CASE("run store round-trips instance records") {
  RunStore store(demo_run());
  auto result = store.read_instance("dog#frisbee#throw#catch");
  auto j = icd::instance_result_to_json(result);
  auto back = icd::instance_result_from_json(j);
  CHECK(icd::instance_result_to_json(back).dump(2) == j.dump(2));

  nlohmann::json drifted = j;
  drifted["schema_version"] = 99;
  CHECK_THROWS_AS(icd::instance_result_from_json(drifted), icd::DataError);
}

TEST_CASE("save_run / load_run round-trips a whole run field-for-field") {
  icd::Run run = icd::load_run(demo_run());
  REQUIRE(run.instances.size() == 5);
  fs::path dir = fresh_dir("roundtrip");
  icd::save_run(dir, run);
  icd::Run back = icd::load_run(dir);

  CHECK(back.manifest.schema_version == run.manifest.schema_version);
  CHECK(back.manifest.instance_ids == run.manifest.instance_ids);
  CHECK(back.manifest.template_hashes == run.manifest.template_hashes);
  CHECK(back.manifest.config.dump() == run.manifest.config.dump());
  REQUIRE(back.instances.size() == run.instances.size());
  for (size_t i = 0; i < run.instances.size(); ++i) {
    CHECK(icd::instance_result_to_json(back.instances[i]).dump() ==
          icd::instance_result_to_json(run.instances[i]).dump());
  }
  fs::remove_all(dir);
}

TEST_CASE("manifest schema drift is rejected") {
  fs::path dir = fresh_dir("drift");
  fs::create_directories(dir);
  icd::atomic_write_file(dir / "manifest.json",
                         R"({"schema_version": 2, "config": {}, "template_hashes": {}, "instance_ids": []})");
  RunStore store(dir);
  CHECK_THROWS_AS(store.read_manifest(), icd::DataError);
  fs::remove_all(dir);
}

TEST_CASE("lexical evaluation needs no provider and derives its combined column") {
  EvalConfig cfg;  // lexical only
  auto report = cmd_evaluate(demo_run(), cfg);
  CHECK(report.columns.count("self_bleu3") == 1);
  CHECK(report.columns.count("distinct_4") == 1);
  CHECK(report.columns.count("bertscore") == 0);
  CHECK(report.columns.count("harmonic") == 0);  // no quality column without a provider
  CHECK(fs::exists(demo_run() / "report.json"));
  CHECK(fs::exists(demo_run() / "report.txt"));
}

TEST_CASE("semantic evaluation without a provider is a config error") {
  EvalConfig cfg;
  cfg.semantic = true;
  CHECK_THROWS_AS(cmd_evaluate(demo_run(), cfg), icd::ConfigError);
}

TEST_CASE("semantic evaluation against embedding fixtures") {
  EvalConfig cfg;
  cfg.semantic = true;
  cfg.provider_dir = (kRoot / "data" / "demo" / "embeddings").string();
  auto report = cmd_evaluate(demo_run(), cfg);
  for (const char* col : {"self_cossim", "self_bertscore", "bertscore", "fbd", "harmonic"}) {
    CHECK(report.columns.count(col) == 1);
  }
  // the combined column is reproducible from the report's own aggregates
  double recomputed = icd::harmonic_mean({icd::MetricId::self_bleu4, report.columns.at("self_bleu4")},
                                         report.columns.at("bertscore"));
  CHECK(report.columns.at("harmonic") == doctest::Approx(recomputed).epsilon(1e-12));

  // determinism of the serialized report
  auto again = cmd_evaluate(demo_run(), cfg);
  CHECK(icd::report_to_json(report).dump(2) == icd::report_to_json(again).dump(2));
}

TEST_CASE("evaluation with imported spice and extra harmonic pairs") {
  fs::path spice = fs::temp_directory_path() / "icd_spice.json";
  {
    nlohmann::json j;
    for (const char* id : {"book#shelf#read#quiet", "chef#knife#onion#chop", "dog#frisbee#throw#catch",
                           "kid#kite#wind#fly", "rain#umbrella#street#walk"}) {
      j[id] = 29.1;
    }
    std::ofstream out(spice, std::ios::trunc);
    out << j.dump();
  }
  EvalConfig cfg;
  cfg.semantic = true;
  cfg.provider_dir = (kRoot / "data" / "demo" / "embeddings").string();
  cfg.spice_file = spice.string();
  cfg.pairs = {{icd::MetricId::self_cos_sim, icd::MetricId::spice},
               {icd::MetricId::self_bertscore, icd::MetricId::bleu3}};
  auto report = cmd_evaluate(demo_run(), cfg);
  CHECK(report.columns.at("spice") == doctest::Approx(29.1));
  CHECK(report.pair_columns.count("self_cossim+spice") == 1);
  CHECK(report.pair_columns.count("self_bertscore+bleu3") == 1);
}

TEST_CASE("judge over fixtures is deterministic and feeds the agreement report") {
  JudgeSpec spec;
  spec.fixture_dir = (kRoot / "data" / "demo" / "fixtures").string();
  spec.template_dir = (kRoot / "data" / "templates").string();
  spec.human_ratings = (kRoot / "data" / "demo" / "human_ratings.tsv").string();
  auto outcome = cmd_judge(demo_run(), spec);
  REQUIRE(outcome.ratings.size() == 5);

  // manifest order is sorted by instance id
  CHECK(outcome.ratings[0].set_id == "book#shelf#read#quiet");
  CHECK(outcome.ratings[0].mean == doctest::Approx(4.0));
  CHECK(outcome.ratings[1].mean == doctest::Approx(10.0 / 3.0));  // chef
  CHECK(outcome.ratings[2].mean == doctest::Approx(4.0));         // dog
  CHECK(outcome.ratings[3].mean == doctest::Approx(8.0 / 3.0));   // kid
  CHECK(outcome.ratings[4].mean == doctest::Approx(14.0 / 3.0));  // rain

  REQUIRE(outcome.agreement.has_value());
  CHECK(outcome.agreement->p_observed == doctest::Approx(0.8));
  CHECK(outcome.agreement->p_expected == doctest::Approx(0.56));
  CHECK(outcome.agreement->kappa == doctest::Approx(6.0 / 11.0).epsilon(1e-12));
  CHECK(fs::exists(demo_run() / "judge" / "ratings.json"));
  CHECK(fs::exists(demo_run() / "judge" / "agreement.json"));

  auto again = cmd_judge(demo_run(), spec);
  for (size_t i = 0; i < 5; ++i) CHECK(again.ratings[i].mean == outcome.ratings[i].mean);
}

TEST_CASE("moe export from a run directory is seed-deterministic") {
  fs::path out1 = fs::temp_directory_path() / "icd_moe_1.jsonl";
  fs::path out2 = fs::temp_directory_path() / "icd_moe_2.jsonl";
  auto r1 = cmd_export_moe({demo_run()}, 3, 7, out1);
  auto r2 = cmd_export_moe({demo_run()}, 3, 7, out2);
  CHECK(!r1.empty());
  std::ifstream a(out1), b(out2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  auto r3 = cmd_export_moe({demo_run()}, 3, 8, out2);
  REQUIRE(r3.size() == r1.size());
  bool any_difference = false;
  for (size_t i = 0; i < r1.size(); ++i) any_difference |= r1[i].input != r3[i].input;
  CHECK(any_difference);
}

TEST_CASE("replay-verify confirms byte-identical regeneration") {
  auto result = cmd_replay_verify(demo_run());
  CHECK(result.identical);
  CHECK(result.detail.empty());
}

TEST_CASE("a replay miss fails loudly with its typed code and is recorded") {
  RunSpec spec = demo_spec(fresh_dir("miss"));
  spec.gen.model = "some-other-model";  // every cache key changes
  try {
    cmd_generate(spec);
    FAIL("expected a replay-miss error");
  } catch (const icd::Error& e) {
    CHECK(e.code() == icd::Errc::replay_miss);
    CHECK(std::string(e.what()).find("replay miss") != std::string::npos);
  }
  CHECK(fs::exists(fs::path(spec.out_dir) / "errors.json"));
  // the manifest still exists and lists no completed instances
  RunStore store(spec.out_dir);
  CHECK(store.read_manifest().instance_ids.empty());
  fs::remove_all(spec.out_dir);
}

TEST_CASE("method=default produces only default sets") {
  fs::path dir = fresh_dir("method_default");
  auto spec = demo_spec(dir);
  spec.method = icd::Method::default_only;
  REQUIRE(cmd_generate(spec).succeeded == 5);
  RunStore store(dir);
  auto result = store.read_instance("dog#frisbee#throw#catch");
  CHECK(result.default_set.has_value());
  CHECK(!result.step1_set.has_value());
  CHECK(!result.selected_set.has_value());
  CHECK(result.selection_rationale.empty());

  // judging a run that has no selected sets is an evaluation error
  JudgeSpec judge;
  judge.fixture_dir = (kRoot / "data" / "demo" / "fixtures").string();
  judge.template_dir = (kRoot / "data" / "templates").string();
  CHECK_THROWS_AS(cmd_judge(dir, judge), icd::EvaluationError);
  fs::remove_all(dir);
}

TEST_CASE("method=diversified evaluates the final diversified set") {
  fs::path dir = fresh_dir("method_div");
  auto spec = demo_spec(dir);
  spec.method = icd::Method::diversified;
  REQUIRE(cmd_generate(spec).succeeded == 5);
  RunStore store(dir);
  auto rain = store.read_instance("rain#umbrella#street#walk");
  CHECK(rain.trigger_fired);
  CHECK(rain.step2_set.has_value());
  CHECK(!rain.default_set.has_value());
  CHECK(!rain.selected_set.has_value());

  EvalConfig cfg;
  auto report = cmd_evaluate(dir, cfg);
  CHECK(report.method_id == "diversified");
  // the rain instance is scored on its step-2 sentences
  for (const auto& inst : report.instances) {
    if (inst.instance_id == "rain#umbrella#street#walk") {
      CHECK(inst.generations.size() == 3);
      CHECK(inst.generations[0] == rain.step2_set->sentences[0].raw);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("judge with repeats=1 takes the single run as the mean") {
  JudgeSpec spec;
  spec.repeats = 1;
  spec.fixture_dir = (kRoot / "data" / "demo" / "fixtures").string();
  spec.template_dir = (kRoot / "data" / "templates").string();
  auto outcome = cmd_judge(demo_run(), spec);
  REQUIRE(outcome.ratings.size() == 5);
  for (const auto& rating : outcome.ratings) {
    REQUIRE(rating.runs.size() == 1);
    CHECK(rating.mean == doctest::Approx(static_cast<double>(static_cast<int>(rating.runs[0]))));
  }
}

TEST_CASE("configuration problems are rejected before any generation") {
  RunSpec spec = demo_spec(fresh_dir("cfgerr"));
  spec.fixture_dir = "/nonexistent/fixtures";
  CHECK_THROWS_AS(cmd_generate(spec), icd::ConfigError);

  RunSpec live = demo_spec(fresh_dir("cfgerr2"));
  live.backend = icd::BackendMode::live;
  live.base_url = "";
  CHECK_THROWS_AS(cmd_generate(live), icd::ConfigError);

  RunSpec record = demo_spec(fresh_dir("cfgerr3"));
  record.backend = icd::BackendMode::record;
  record.base_url = "http://127.0.0.1:1";
  record.api_key = "";  // record requires credentials
  CHECK_THROWS_AS(cmd_generate(record), icd::ConfigError);
}

TEST_CASE("cli binary wires exit codes") {
  const std::string cli = ICD_CLI_PATH;
  fs::path out = fresh_dir("cli_run");
  std::string base = "cd " + kRoot.string() + " && " + cli;

  int ok = std::system((base + " generate --config data/demo/run_config.json --out " + out.string() +
                        " > /dev/null 2>&1")
                           .c_str());
  CHECK(WEXITSTATUS(ok) == 0);

  int eval = std::system((base + " evaluate --run " + out.string() +
                          " --semantic --provider-dir data/demo/embeddings > /dev/null 2>&1")
                             .c_str());
  CHECK(WEXITSTATUS(eval) == 0);

  int verify = std::system((base + " replay-verify --run " + out.string() + " > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(verify) == 0);

  // configuration error -> exit 2
  int bad = std::system((base + " generate --config data/demo/run_config.json --fixtures /nope --out " +
                         out.string() + "2 > /dev/null 2>&1")
                            .c_str());
  CHECK(WEXITSTATUS(bad) == 2);

  // semantic metrics without a provider -> exit 2 as well
  int noprov = std::system((base + " evaluate --run " + out.string() + " --semantic > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(noprov) == 2);

  // replay miss -> exit 6
  int miss = std::system((base + " generate --config data/demo/run_config.json --model other --out " +
                          out.string() + "3 > /dev/null 2>&1")
                             .c_str());
  CHECK(WEXITSTATUS(miss) == 6);

  // unreachable live backend with the key from the environment -> exit 3
  int transport = std::system(("cd " + kRoot.string() + " && ICD_API_KEY=dummy " + cli +
                               " generate --config data/demo/run_config.json --backend live"
                               " --base-url http://127.0.0.1:1 --retries 0 --fail-fast --range 0:1 --out " +
                               out.string() + "4 > /dev/null 2>&1")
                                  .c_str());
  CHECK(WEXITSTATUS(transport) == 3);

  fs::remove_all(out);
  fs::remove_all(out.string() + "3");
  fs::remove_all(out.string() + "4");
}

TEST_CASE("parallel generation produces the same artifacts as serial") {
  fs::path serial = fresh_dir("serial");
  fs::path parallel = fresh_dir("parallel");
  auto s1 = demo_spec(serial);
  s1.parallelism = 1;
  auto s2 = demo_spec(parallel);
  s2.parallelism = 4;
  REQUIRE(cmd_generate(s1).failures.empty());
  REQUIRE(cmd_generate(s2).failures.empty());
  CHECK(icd::detail::read_tree(serial) == icd::detail::read_tree(parallel));
  fs::remove_all(serial);
  fs::remove_all(parallel);
}

TEST_CASE("the committed demo fixtures are exactly what the generator produces") {
  // Copy the static inputs to a scratch root, regenerate, and compare the
  // produced fixture and embedding stores byte-for-byte with the repo.
  fs::path scratch = fresh_dir("fixture_provenance");
  fs::create_directories(scratch / "data" / "demo");
  fs::copy(kRoot / "data" / "templates", scratch / "data" / "templates",
           fs::copy_options::recursive);
  for (const char* f : {"commongen_demo.jsonl", "few_shot.jsonl"}) {
    fs::copy_file(kRoot / "data" / "demo" / f, scratch / "data" / "demo" / f);
  }
  int rc = std::system((std::string(ICD_GEN_FIXTURES_PATH) + " " + scratch.string() +
                        " > /dev/null 2>&1")
                           .c_str());
  REQUIRE(WEXITSTATUS(rc) == 0);
  for (const char* dir : {"fixtures", "embeddings"}) {
    auto fresh = icd::detail::read_tree(scratch / "data" / "demo" / dir);
    auto committed = icd::detail::read_tree(kRoot / "data" / "demo" / dir);
    CHECK(!fresh.empty());
    CHECK(fresh == committed);
  }
  fs::remove_all(scratch);
}

TEST_CASE("instance range filter narrows the run") {
  fs::path dir = fresh_dir("range");
  auto spec = demo_spec(dir);
  spec.range = {{1, 3}};
  auto summary = cmd_generate(spec);
  CHECK(summary.succeeded == 2);
  RunStore store(dir);
  CHECK(store.read_manifest().instance_ids.size() == 2);
  fs::remove_all(dir);
}
