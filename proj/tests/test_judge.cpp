#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "icd/judge.hpp"

using icd::BinaryRating;
using icd::binarize;
using icd::cohen_kappa;
using icd::cohen_kappa_report;
using icd::DiversityCategory;
using icd::GenerationConfig;
using icd::judge_diversity;
using icd::load_human_ratings;
using icd::normalize_likert;
using icd::parse_category;
using icd::RatingTable;
using icd::Sentence;
using icd::Transcript;

namespace {

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
    t.cache_key = icd::cache_key(prompt, config.model, config.temperature, max_tokens, attempt);
    t.response_text = responses.at(calls++);
    return t;
  }
};

std::vector<BinaryRating> labels(std::initializer_list<char> cs) {
  std::vector<BinaryRating> out;
  for (char c : cs) out.push_back(c == 'H' ? BinaryRating::high : BinaryRating::low);
  return out;
}

icd::PromptTemplate judge_template() {
  return icd::PromptTemplate::from_string("judge", "Rate the diversity.\nSentences:\n{PRV}\nAnswer:");
}

std::vector<Sentence> demo_set() {
  return {Sentence::make("A dog runs."), Sentence::make("A cat naps."), Sentence::make("Fish swim.")};
}

}  // namespace

TEST_CASE("parse_category finds phrases case-insensitively anywhere") {
  CHECK(parse_category("somewhat diverse") == DiversityCategory::somewhat_diverse);
  CHECK(parse_category("Category: Highly Diverse!") == DiversityCategory::highly_diverse);
  CHECK(parse_category("these are VERY SIMILAR sentences") == DiversityCategory::very_similar);
  CHECK(parse_category("I would call this highly similar") == DiversityCategory::very_similar);
  CHECK(parse_category("neutral") == DiversityCategory::neutral);
  CHECK(parse_category("Somewhat Similar.") == DiversityCategory::somewhat_similar);
  CHECK(!parse_category("no rating at all").has_value());
  // earliest mention wins
  CHECK(parse_category("neutral, though nearly somewhat diverse") == DiversityCategory::neutral);
}

TEST_CASE("judge_diversity averages the repeated runs") {
  ScriptedBackend backend;
  backend.responses = {"somewhat diverse", "highly diverse", "neutral"};
  std::vector<Transcript> transcripts;
  auto rating = judge_diversity(demo_set(), backend, judge_template(), GenerationConfig{}, 3,
                                "set1", &transcripts);
  CHECK(rating.mean == doctest::Approx(4.0));  // (4 + 5 + 3) / 3
  REQUIRE(rating.runs.size() == 3);
  CHECK(rating.runs[1] == DiversityCategory::highly_diverse);
  CHECK(transcripts.size() == 3);
  // distinct attempt indices per run
  CHECK(transcripts[0].attempt == 0);
  CHECK(transcripts[1].attempt == 2);
  CHECK(transcripts[2].attempt == 4);

  ScriptedBackend constant;
  constant.responses = {"very similar", "very similar", "very similar"};
  auto low = judge_diversity(demo_set(), constant, judge_template(), GenerationConfig{}, 3, "s");
  CHECK(low.mean == doctest::Approx(1.0));
}

TEST_CASE("judge_diversity re-asks once per run, then errors") {
  ScriptedBackend flaky;
  flaky.responses = {"hmm", "somewhat diverse"};
  auto rating = judge_diversity(demo_set(), flaky, judge_template(), GenerationConfig{}, 1, "s");
  CHECK(rating.mean == doctest::Approx(4.0));
  CHECK(flaky.calls == 2);

  ScriptedBackend hopeless;
  hopeless.responses = {"hmm", "still nothing"};
  CHECK_THROWS_AS(judge_diversity(demo_set(), hopeless, judge_template(), GenerationConfig{}, 1, "s"),
                  icd::EvaluationError);

  ScriptedBackend empty_backend;
  CHECK_THROWS_AS(
      judge_diversity({}, empty_backend, judge_template(), GenerationConfig{}, 3, "s"),
      icd::EvaluationError);
}

TEST_CASE("binarize splits at 3 with a documented tie rule") {
  CHECK(binarize(4.0) == BinaryRating::high);
  CHECK(binarize(2.33) == BinaryRating::low);
  CHECK(binarize(3.0) == BinaryRating::low);
  CHECK(binarize(3.0, /*tie_is_high=*/true) == BinaryRating::high);
  CHECK_THROWS_AS(binarize(0.5), icd::EvaluationError);
  // monotone in the mean
  double prev = -1;
  for (double mean : {1.0, 2.0, 2.9, 3.0, 3.01, 4.0, 5.0}) {
    double v = binarize(mean) == BinaryRating::high ? 1 : 0;
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("cohen_kappa on the worked examples") {
  CHECK(cohen_kappa(labels({'H', 'L', 'H'}), labels({'H', 'L', 'H'})) == doctest::Approx(1.0));

  auto report = cohen_kappa_report(labels({'H', 'H', 'L', 'L'}), labels({'H', 'L', 'L', 'L'}));
  CHECK(report.p_observed == doctest::Approx(0.75));
  CHECK(report.p_expected == doctest::Approx(0.5));
  CHECK(report.kappa == 0.5);  // exact in binary floating point

  // disjoint constant raters: p_o = 0, p_e = 0 -> kappa 0
  CHECK(cohen_kappa(labels({'H', 'H', 'H'}), labels({'L', 'L', 'L'})) == doctest::Approx(0.0));
  // both constant and identical: p_e = 1 handled as perfect agreement
  CHECK(cohen_kappa(labels({'H', 'H'}), labels({'H', 'H'})) == doctest::Approx(1.0));

  CHECK_THROWS_AS(cohen_kappa(labels({'H'}), labels({'H', 'L'})), icd::EvaluationError);
  CHECK_THROWS_AS(cohen_kappa(labels({}), labels({})), icd::EvaluationError);
}

TEST_CASE("cohen_kappa is symmetric") {
  auto a = labels({'H', 'L', 'H', 'H', 'L', 'L', 'H'});
  auto b = labels({'H', 'H', 'L', 'H', 'L', 'H', 'L'});
  CHECK(cohen_kappa(a, b) == doctest::Approx(cohen_kappa(b, a)).epsilon(1e-12));
}

TEST_CASE("normalize_likert recenters raters to the scale midpoint") {
  RatingTable table;
  table.set_ids = {"s1", "s2", "s3"};
  table.rater_ids = {"r1", "r2"};
  table.ratings = {{2.0, 3.0, 4.0}, {3.0, 4.0, 5.0}};  // r2 = r1 + 1 everywhere
  auto means = normalize_likert(table);
  REQUIRE(means.size() == 3);
  CHECK(means[0] == doctest::Approx(2.0));
  CHECK(means[1] == doctest::Approx(3.0));
  CHECK(means[2] == doctest::Approx(4.0));

  RatingTable flat;
  flat.set_ids = {"a", "b"};
  flat.rater_ids = {"r1", "r2", "r3"};
  flat.ratings = {{3.0, 3.0}, {3.0, 3.0}, {3.0, 3.0}};
  for (double m : normalize_likert(flat)) CHECK(m == doctest::Approx(3.0));

  RatingTable single;
  single.set_ids = {"a", "b", "c"};
  single.rater_ids = {"only"};
  single.ratings = {{1.0, 4.0, 5.0}};
  auto raw = normalize_likert(single);
  // a single rater keeps raw ratings
  CHECK(raw[0] == doctest::Approx(1.0));
  CHECK(raw[1] == doctest::Approx(4.0));
  CHECK(raw[2] == doctest::Approx(5.0));

  RatingTable missing;
  missing.set_ids = {"a"};
  missing.rater_ids = {"r1"};
  missing.ratings = {{std::nullopt}};
  CHECK_THROWS_AS(normalize_likert(missing), icd::DataError);
}

TEST_CASE("load_human_ratings parses delimited tables") {
  auto path = std::filesystem::temp_directory_path() / "icd_ratings.tsv";
  {
    std::ofstream out(path, std::ios::trunc);
    out << "# comment\n";
    out << "set1\tr1\t4\n";
    out << "set1,r2,5\n";
    out << "set2 r1 2\n";
    out << "set2 r2 1\n";
  }
  auto table = load_human_ratings(path);
  REQUIRE(table.set_ids.size() == 2);
  REQUIRE(table.rater_ids.size() == 2);
  CHECK(*table.ratings[0][0] == 4.0);
  CHECK(*table.ratings[1][0] == 5.0);
  CHECK(*table.ratings[0][1] == 2.0);

  {
    std::ofstream out(path, std::ios::trunc);
    out << "set1 r1 9\n";
  }
  CHECK_THROWS_AS(load_human_ratings(path), icd::DataError);
}
