#include <doctest.h>

#include <random>
#include <vector>

#include "icd/scoring.hpp"

using icd::build_report;
using icd::diversity_score;
using icd::DiversityScore;
using icd::harmonic_mean;
using icd::harmonic_pairs;
using icd::InstanceMetrics;
using icd::MetricId;
using icd::ReportRow;

TEST_CASE("diversity_score flips lower-is-diverse metrics") {
  CHECK(diversity_score({MetricId::self_bleu4, 72.4}) == doctest::Approx(27.6));
  CHECK(diversity_score({MetricId::self_cos_sim, 100.0}) == doctest::Approx(0.0));
  CHECK(diversity_score({MetricId::entropy_k, 2.08}) == doctest::Approx(2.08));
  CHECK(diversity_score({MetricId::distinct_k, 88.5}) == doctest::Approx(88.5));
  CHECK_THROWS_AS(diversity_score({MetricId::self_bleu3, 100.5}), icd::EvaluationError);
}

TEST_CASE("harmonic_mean on published combined scores") {
  // self-BLEU-4 = 72.4 with BERTScore 70.4 gives the printed 39.6
  CHECK(harmonic_mean({MetricId::self_bleu4, 72.4}, 70.4) == doctest::Approx(39.6).epsilon(0.0015));
  CHECK(harmonic_mean({MetricId::self_bleu4, 21.0}, 67.4) == doctest::Approx(72.7).epsilon(0.0015));
  CHECK(harmonic_mean({MetricId::self_bleu4, 100.0}, 55.0) == doctest::Approx(0.0));
  CHECK(harmonic_mean({MetricId::self_bleu4, 50.0}, 0.0) == doctest::Approx(0.0));
  CHECK_THROWS_AS(harmonic_mean({MetricId::self_bleu4, 50.0}, -1.0), icd::EvaluationError);
}

TEST_CASE("harmonic mean bounds") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    double raw = u(rng), q = u(rng);
    double d = 100.0 - raw;
    double hm = harmonic_mean({MetricId::self_bleu4, raw}, q);
    CHECK(hm <= 2.0 * std::min(d, q) + 1e-9);
    CHECK(hm <= (d + q) / 2.0 + 1e-9);
    CHECK(hm >= 0.0);
    // symmetric in (D, Q): compare against the flipped computation
    double mirrored = harmonic_mean({MetricId::self_bleu4, 100.0 - q}, d);
    CHECK(hm == doctest::Approx(mirrored).epsilon(1e-12));
  }
}

TEST_CASE("harmonic_pairs reproduces alternate metric combinations") {
  ReportRow row;
  row.dataset = "x";
  row.method = "icd";
  row.metrics = {{"self_cossim", 83.5}, {"spice", 29.1}, {"self_bertscore", 66.2}, {"bleu3", 47.4}};
  auto cells = harmonic_pairs({row}, {{MetricId::self_cos_sim, MetricId::spice},
                                      {MetricId::self_bertscore, MetricId::bleu3}});
  REQUIRE(cells.size() == 1);
  CHECK(cells[0].at("self_cossim+spice") == doctest::Approx(21.1).epsilon(0.0025));
  CHECK(cells[0].at("self_bertscore+bleu3") == doctest::Approx(39.5).epsilon(0.0025));

  ReportRow degenerate;
  degenerate.metrics = {{"self_cossim", 100.0}, {"spice", 42.0}};
  auto zero = harmonic_pairs({degenerate}, {{MetricId::self_cos_sim, MetricId::spice}});
  CHECK(zero[0].at("self_cossim+spice") == doctest::Approx(0.0));

  CHECK_THROWS_AS(harmonic_pairs({row}, {{MetricId::self_bleu4, MetricId::bertscore}}),
                  icd::EvaluationError);
}

TEST_CASE("build_report aggregates instance and corpus values") {
  InstanceMetrics a;
  a.instance_id = "one";
  a.values = {{"self_bleu4", 0.0}, {"bertscore", 70.0}};
  InstanceMetrics b;
  b.instance_id = "two";
  b.values = {{"self_bleu4", 100.0}, {"bertscore", 50.0}};

  auto single = build_report({a}, {}, "ds", "m");
  CHECK(single.columns.at("self_bleu4") == doctest::Approx(0.0));
  CHECK(single.columns.at("bertscore") == doctest::Approx(70.0));

  auto both = build_report({a, b}, {{"distinct_4", 91.0}}, "ds", "m");
  CHECK(both.columns.at("self_bleu4") == doctest::Approx(50.0));
  CHECK(both.columns.at("distinct_4") == doctest::Approx(91.0));
  // derived combined column from its own aggregates
  double expect_hm = harmonic_mean({MetricId::self_bleu4, 50.0}, 60.0);
  CHECK(both.columns.at("harmonic") == doctest::Approx(expect_hm).epsilon(1e-12));
}

TEST_CASE("build_report rejects mismatched metric configurations") {
  InstanceMetrics a;
  a.instance_id = "one";
  a.values = {{"self_bleu4", 1.0}};
  InstanceMetrics b;
  b.instance_id = "two";
  b.values = {{"self_bleu3", 1.0}};
  CHECK_THROWS_AS(build_report({a, b}, {}, "ds", "m"), icd::EvaluationError);
}

TEST_CASE("report serialization is deterministic") {
  InstanceMetrics a;
  a.instance_id = "one";
  a.generations = {"x y", "z w"};
  a.values = {{"self_bleu4", 12.5}, {"bertscore", 66.25}};
  auto r1 = build_report({a}, {{"entropy_4", 2.0794}}, "ds", "m");
  auto r2 = build_report({a}, {{"entropy_4", 2.0794}}, "ds", "m");
  CHECK(icd::report_to_json(r1).dump(2) == icd::report_to_json(r2).dump(2));
  CHECK(icd::report_to_text(r1) == icd::report_to_text(r2));
  CHECK(icd::report_to_text(r1).find("entropy_4") != std::string::npos);
}
