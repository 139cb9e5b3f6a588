// Acceptance suite: one check per release criterion, each printed as a
// single PASS/FAIL line with its runtime. The reference values in criteria
// 1 and 2 are published combined-score tables this toolkit is expected to
// reproduce from their printed inputs within one rounding unit (0.1).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "icd/commands.hpp"
#include "icd/judge.hpp"
#include "icd/lexical.hpp"
#include "icd/linalg.hpp"
#include "icd/run_store.hpp"
#include "icd/scoring.hpp"
#include "icd/semantic.hpp"

namespace fs = std::filesystem;
using icd::Sentence;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& message) {
    pass = false;
    if (detail.find(message) != std::string::npos) return;  // dedup repeats
    if (!detail.empty()) detail += "; ";
    detail += message;
  }
};

struct ReferenceRow {
  const char* table;
  const char* method;
  double self_bleu4;
  double bertscore;
  double printed_harmonic;
};

// Combined-score rows published with both inputs: three datasets by four
// methods from the primary results table, plus the four rows of the
// second (open-model) table.
const std::vector<ReferenceRow>& harmonic_rows() {
  static const std::vector<ReferenceRow> rows = {
      {"commongen", "fine-tune", 17.9, 64.2, 72.1},
      {"commongen", "default", 72.4, 70.4, 39.6},
      {"commongen", "diversified", 34.9, 65.0, 65.4},
      {"commongen", "icd", 21.0, 67.4, 72.7},
      {"comve", "fine-tune", 10.3, 53.7, 67.2},
      {"comve", "default", 45.2, 55.1, 54.9},
      {"comve", "diversified", 16.5, 56.5, 67.4},
      {"comve", "icd", 8.7, 55.5, 69.0},
      {"dimongen", "fine-tune", 3.4, 42.0, 58.5},
      {"dimongen", "default", 37.3, 44.5, 52.1},
      {"dimongen", "diversified", 6.5, 39.9, 55.9},
      {"dimongen", "icd", 3.5, 41.7, 58.2},
      {"commongen-openmodel", "fine-tune", 14.5, 59.1, 69.9},
      {"commongen-openmodel", "default", 45.4, 67.1, 60.2},
      {"commongen-openmodel", "diversified", 16.4, 58.2, 68.6},
      {"commongen-openmodel", "icd", 5.8, 60.1, 73.4},
  };
  return rows;
}

struct PairCell {
  const char* dataset;
  const char* method;
  icd::MetricId diversity;
  double diversity_raw;
  icd::MetricId quality;
  double quality_raw;
  double printed;
};

// The alternate metric-pair table: three (diversity, quality) pairs over
// every dataset/method row, with inputs taken from the primary table.
const std::vector<PairCell>& pair_cells() {
  using icd::MetricId;
  static const std::vector<PairCell> cells = {
      // self-BLEU4 + BERTScore row (repeats the primary combined column)
      {"commongen", "fine-tune", MetricId::self_bleu4, 17.9, MetricId::bertscore, 64.2, 72.1},
      {"commongen", "default", MetricId::self_bleu4, 72.4, MetricId::bertscore, 70.4, 39.6},
      {"commongen", "diversified", MetricId::self_bleu4, 34.9, MetricId::bertscore, 65.0, 65.4},
      {"commongen", "icd", MetricId::self_bleu4, 21.0, MetricId::bertscore, 67.4, 72.7},
      {"comve", "fine-tune", MetricId::self_bleu4, 10.3, MetricId::bertscore, 53.7, 67.2},
      {"comve", "default", MetricId::self_bleu4, 45.2, MetricId::bertscore, 55.1, 54.9},
      {"comve", "diversified", MetricId::self_bleu4, 16.5, MetricId::bertscore, 56.5, 67.4},
      {"comve", "icd", MetricId::self_bleu4, 8.7, MetricId::bertscore, 55.5, 69.0},
      {"dimongen", "fine-tune", MetricId::self_bleu4, 3.4, MetricId::bertscore, 42.0, 58.5},
      {"dimongen", "default", MetricId::self_bleu4, 37.3, MetricId::bertscore, 44.5, 52.1},
      {"dimongen", "diversified", MetricId::self_bleu4, 6.5, MetricId::bertscore, 39.9, 55.9},
      {"dimongen", "icd", MetricId::self_bleu4, 3.5, MetricId::bertscore, 41.7, 58.2},
      // self-cosSim + SPICE row
      {"commongen", "fine-tune", MetricId::self_cos_sim, 64.7, MetricId::spice, 30.3, 32.6},
      {"commongen", "default", MetricId::self_cos_sim, 93.3, MetricId::spice, 30.1, 11.0},
      {"commongen", "diversified", MetricId::self_cos_sim, 85.2, MetricId::spice, 28.5, 19.5},
      {"commongen", "icd", MetricId::self_cos_sim, 83.5, MetricId::spice, 29.1, 21.1},
      {"comve", "fine-tune", MetricId::self_cos_sim, 59.8, MetricId::spice, 33.1, 36.3},
      {"comve", "default", MetricId::self_cos_sim, 83.9, MetricId::spice, 36.2, 22.3},
      {"comve", "diversified", MetricId::self_cos_sim, 76.1, MetricId::spice, 35.8, 28.7},
      {"comve", "icd", MetricId::self_cos_sim, 72.5, MetricId::spice, 36.1, 31.2},
      {"dimongen", "fine-tune", MetricId::self_cos_sim, 43.4, MetricId::spice, 15.5, 24.3},
      {"dimongen", "default", MetricId::self_cos_sim, 75.7, MetricId::spice, 16.4, 19.6},
      {"dimongen", "diversified", MetricId::self_cos_sim, 57.1, MetricId::spice, 15.2, 22.4},
      {"dimongen", "icd", MetricId::self_cos_sim, 56.7, MetricId::spice, 15.4, 22.7},
      // self-BERTScore + BLEU3 row
      {"commongen", "fine-tune", MetricId::self_bertscore, 55.9, MetricId::bleu3, 41.2, 42.6},
      {"commongen", "default", MetricId::self_bertscore, 88.7, MetricId::bleu3, 50.8, 18.5},
      {"commongen", "diversified", MetricId::self_bertscore, 69.8, MetricId::bleu3, 44.3, 35.9},
      {"commongen", "icd", MetricId::self_bertscore, 66.2, MetricId::bleu3, 47.4, 39.5},
      {"comve", "fine-tune", MetricId::self_bertscore, 42.6, MetricId::bleu3, 27.4, 37.1},
      {"comve", "default", MetricId::self_bertscore, 73.5, MetricId::bleu3, 27.5, 27.0},
      {"comve", "diversified", MetricId::self_bertscore, 56.5, MetricId::bleu3, 30.5, 35.9},
      {"comve", "icd", MetricId::self_bertscore, 51.1, MetricId::bleu3, 29.0, 36.4},
      {"dimongen", "fine-tune", MetricId::self_bertscore, 33.0, MetricId::bleu3, 17.7, 28.0},
      {"dimongen", "default", MetricId::self_bertscore, 71.3, MetricId::bleu3, 15.9, 20.5},
      {"dimongen", "diversified", MetricId::self_bertscore, 46.9, MetricId::bleu3, 11.4, 18.8},
      {"dimongen", "icd", MetricId::self_bertscore, 45.7, MetricId::bleu3, 13.2, 21.2},
  };
  return cells;
}

char fmt_buf[512];

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  vsnprintf(fmt_buf, sizeof(fmt_buf), format, args);
  va_end(args);
  return fmt_buf;
}

// ---------------------------------------------------------------------------

Outcome criterion1_harmonic_rows() {
  Outcome out;
  int ok = 0;
  for (const auto& row : harmonic_rows()) {
    double computed = icd::harmonic_mean({icd::MetricId::self_bleu4, row.self_bleu4}, row.bertscore);
    if (std::abs(computed - row.printed_harmonic) <= 0.1) {
      ++ok;
    } else {
      out.fail(fmt("%s/%s: HM(100-%.1f, %.1f)=%.2f vs printed %.1f (printed value is inconsistent "
                   "with its own inputs: HM cannot exceed (D+Q)/2=%.2f)",
                   row.table, row.method, row.self_bleu4, row.bertscore, computed,
                   row.printed_harmonic, (100.0 - row.self_bleu4 + row.bertscore) / 2.0));
    }
  }
  std::string summary = fmt("%d/%zu rows within 0.1", ok, harmonic_rows().size());
  if (!out.detail.empty()) summary += "; " + out.detail;
  out.detail = summary;
  return out;
}

Outcome criterion2_pair_cells() {
  Outcome out;
  // Exercise the harmonic_pairs operation itself: one synthetic report row
  // per (dataset, method) carrying the printed metric inputs.
  std::map<std::pair<std::string, std::string>, icd::ReportRow> rows;
  for (const auto& cell : pair_cells()) {
    auto& row = rows[{cell.dataset, cell.method}];
    row.dataset = cell.dataset;
    row.method = cell.method;
    row.metrics[icd::to_string(cell.diversity)] = cell.diversity_raw;
    row.metrics[icd::to_string(cell.quality)] = cell.quality_raw;
  }
  int ok = 0;
  for (const auto& cell : pair_cells()) {
    const auto& row = rows.at({cell.dataset, cell.method});
    auto table = icd::harmonic_pairs({row}, {{cell.diversity, cell.quality}});
    double computed = table.at(0).at(icd::to_string(cell.diversity) + "+" + icd::to_string(cell.quality));
    if (std::abs(computed - cell.printed) <= 0.1) {
      ++ok;
    } else {
      out.fail(fmt("%s/%s %s+%s: computed %.2f vs printed %.1f", cell.dataset, cell.method,
                   icd::to_string(cell.diversity).c_str(), icd::to_string(cell.quality).c_str(),
                   computed, cell.printed));
    }
  }
  std::string summary = fmt("%d/%zu cells within 0.1", ok, pair_cells().size());
  if (!out.detail.empty()) summary += "; " + out.detail;
  out.detail = summary;
  return out;
}

// Independent recursive enumeration used as the argmax oracle.
void enumerate_subsets(size_t u, size_t k, size_t start, std::vector<size_t>& current,
                       const std::function<void(const std::vector<size_t>&)>& visit) {
  if (current.size() == k) {
    visit(current);
    return;
  }
  for (size_t i = start; i + (k - current.size()) <= u; ++i) {
    current.push_back(i);
    enumerate_subsets(u, k, i + 1, current, visit);
    current.pop_back();
  }
}

Outcome criterion3_subset_oracle() {
  Outcome out;
  std::mt19937_64 rng(20240817);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    size_t n = 1 + rng() % 6;
    size_t u = n + rng() % (13 - n);

    std::vector<Sentence> pool;
    for (size_t i = 0; i < u; ++i) pool.push_back(Sentence::make("w" + std::to_string(i)));

    // random f table over subsets, coarse values so ties are frequent
    std::map<std::vector<size_t>, double> table;
    {
      std::vector<size_t> current;
      enumerate_subsets(u, n, 0, current, [&](const std::vector<size_t>& subset) {
        table[subset] = static_cast<double>(rng() % 7) / 2.0;
      });
    }

    icd::DiversityFn f = [&](std::span<const Sentence> set) {
      std::vector<size_t> indices;
      for (const auto& s : set) indices.push_back(std::stoul(s.raw.substr(1)));
      return table.at(indices);
    };

    // split the pool across a "default" and a "diversified" set
    size_t split = 1 + rng() % u;
    auto s_def = icd::make_generation_set(
        "t", std::vector<Sentence>(pool.begin(), pool.begin() + split), icd::SetSource::default_prompt);
    std::vector<icd::GenerationSet> s_div;
    if (split < u) {
      s_div.push_back(icd::make_generation_set(
          "t", std::vector<Sentence>(pool.begin() + split, pool.end()), icd::SetSource::step1));
    }
    auto result = icd::subset_select(s_def, s_div, static_cast<int>(n), f);

    // oracle: lexicographic scan, replace on >=, i.e. the last argmax wins
    std::vector<size_t> best;
    double alpha = -1.0;
    std::vector<size_t> current;
    enumerate_subsets(u, n, 0, current, [&](const std::vector<size_t>& subset) {
      double score = table.at(subset);
      if (best.empty() || score >= alpha) {
        alpha = score;
        best = subset;
      }
    });

    if (result.evaluated[result.chosen].indices != best) {
      ++mismatches;
      if (mismatches == 1) {
        out.fail(fmt("first mismatch at trial %d (u=%zu, N=%zu)", trial, u, n));
      }
    }
  }
  if (mismatches > 0) out.fail(fmt("%d/1000 trials disagreed with the oracle", mismatches));
  if (out.pass) out.detail = "1000/1000 random instances match the independent argmax (ties included)";
  return out;
}

Outcome criterion4_lexical_invariants() {
  Outcome out;
  std::mt19937 rng(99);

  // plain alphanumeric tokens so distinct salts give token-disjoint sentences
  auto random_sentence = [&](int salt) {
    std::string text;
    size_t len = 4 + rng() % 5;
    for (size_t t = 0; t < len; ++t) text += "w" + std::to_string(salt) + "q" + std::to_string(t) + " ";
    return Sentence::make(text);
  };

  for (int trial = 0; trial < 50; ++trial) {
    // duplicate set: every sentence identical
    size_t m = 2 + rng() % 4;
    std::vector<Sentence> dup(m, random_sentence(static_cast<int>(rng() % 1000)));
    if (icd::self_bleu(dup, 4) != 100.0) out.fail("duplicate-set self-BLEU is not exactly 100");

    // pairwise token-disjoint set
    std::vector<Sentence> disjoint;
    for (size_t i = 0; i < m; ++i) disjoint.push_back(random_sentence(static_cast<int>(1000 + trial * 10 + i)));
    if (icd::self_bleu(disjoint, 4) != 0.0) out.fail("disjoint-set self-BLEU is not exactly 0");

    // permutation invariance
    std::vector<Sentence> shuffled = disjoint;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    if (std::abs(icd::self_bleu(shuffled, 3) - icd::self_bleu(disjoint, 3)) > 1e-9)
      out.fail("self-BLEU changed under permutation");
    if (std::abs(icd::distinct_k(shuffled, 4) - icd::distinct_k(disjoint, 4)) > 1e-12)
      out.fail("distinct-k changed under permutation");
    if (std::abs(icd::entropy_k(shuffled, 4) - icd::entropy_k(disjoint, 4)) > 1e-12)
      out.fail("entropy-k changed under permutation");

    // duplication never increases distinct-k
    double before = icd::distinct_k(disjoint, 4);
    auto extended = disjoint;
    extended.push_back(disjoint[rng() % disjoint.size()]);
    if (icd::distinct_k(extended, 4) > before + 1e-12) out.fail("distinct-k increased under duplication");
  }

  // uniform entropy fixture: M distinct grams, each exactly once
  for (size_t m : {1u, 2u, 8u, 33u}) {
    std::vector<Sentence> corpus;
    for (size_t i = 0; i < m; ++i) {
      std::string text;
      for (int t = 0; t < 4; ++t) text += "u" + std::to_string(i) + "q" + std::to_string(t) + " ";
      corpus.push_back(Sentence::make(text));
    }
    double h = icd::entropy_k(corpus, 4);
    if (std::abs(h - std::log(static_cast<double>(m))) > 1e-12)
      out.fail(fmt("uniform entropy deviates from ln(%zu)", m));
  }
  if (out.pass) out.detail = "exact poles, permutation invariance and duplication monotonicity hold";
  return out;
}

Outcome criterion5_fbd_numerics() {
  Outcome out;
  std::mt19937_64 rng(4242);
  auto unit = [&]() { return 2.0 * (static_cast<double>(rng() >> 11) / 9007199254740992.0) - 1.0; };

  // matrix square root residuals on 100 random SPD matrices up to 16x16
  for (int trial = 0; trial < 100; ++trial) {
    size_t d = 1 + rng() % 16;
    icd::Matrix b(d, d);
    for (size_t i = 0; i < d; ++i)
      for (size_t j = 0; j < d; ++j) b(i, j) = unit();
    icd::Matrix sigma = b * b.transposed();
    for (size_t i = 0; i < d; ++i) sigma(i, i) += 0.05;
    icd::Matrix root = icd::matrix_sqrt_psd(sigma);
    double residual = (root * root - sigma).frobenius_norm();
    if (residual > 1e-8 * (1.0 + sigma.frobenius_norm())) {
      out.fail(fmt("sqrt residual %.3e beyond tolerance at d=%zu", residual, d));
    }
  }

  // identity, symmetry and the 1-D closed form
  for (int trial = 0; trial < 25; ++trial) {
    size_t d = 1 + rng() % 8;
    std::vector<icd::EmbeddingVector> xs, ys;
    for (int i = 0; i < 6; ++i) {
      icd::EmbeddingVector x(d), y(d);
      for (auto& v : x) v = unit();
      for (auto& v : y) v = unit();
      xs.push_back(x);
      ys.push_back(y);
    }
    auto ga = icd::fit_gaussian(xs);
    auto gb = icd::fit_gaussian(ys);
    if (icd::frechet_distance(ga, ga) > 1e-6) out.fail("distance(a,a) above 1e-6");
    double ab = icd::frechet_distance(ga, gb);
    double ba = icd::frechet_distance(gb, ga);
    if (std::abs(ab - ba) > 1e-8) out.fail(fmt("asymmetry %.3e above 1e-8", std::abs(ab - ba)));
    if (ab < 0.0) out.fail("negative distance");
  }

  icd::GaussianSummary a, b;
  a.mu = {0.0};
  b.mu = {3.0};
  a.sigma = icd::Matrix(1, 1);
  b.sigma = icd::Matrix(1, 1);
  a.sigma(0, 0) = 1.0;
  b.sigma(0, 0) = 4.0;
  double oned = icd::frechet_distance(a, b);
  if (std::abs(oned - 10.0) > 1e-6) out.fail(fmt("1-D closed form gave %.8f, expected 10", oned));

  if (out.pass)
    out.detail = "identity/symmetry/closed-form within tolerance; 100 SPD square roots within residual bound";
  return out;
}

Outcome criterion6_agreement() {
  Outcome out;
  using icd::BinaryRating;
  std::vector<BinaryRating> same = {BinaryRating::high, BinaryRating::low, BinaryRating::high};
  if (icd::cohen_kappa(same, same) != 1.0) out.fail("kappa on identical labels is not 1.0");

  std::vector<BinaryRating> a = {BinaryRating::high, BinaryRating::high, BinaryRating::low,
                                 BinaryRating::low};
  std::vector<BinaryRating> b = {BinaryRating::high, BinaryRating::low, BinaryRating::low,
                                 BinaryRating::low};
  double kappa = icd::cohen_kappa(a, b);
  if (kappa != 0.5) out.fail(fmt("4-item example gave %.17g, expected exactly 0.5", kappa));

  if (icd::binarize(3.0) != BinaryRating::low) out.fail("tie rule: mean 3 must map to low");
  if (icd::binarize(3.0, true) != BinaryRating::high) out.fail("tie override failed");
  if (icd::binarize(4.0) != BinaryRating::high || icd::binarize(2.33) != BinaryRating::low)
    out.fail("binarize thresholds wrong");

  if (out.pass) out.detail = "kappa identities, the exact 0.5 example and the tie rule hold";
  return out;
}

Outcome criterion7_replay_determinism() {
  Outcome out;
  const fs::path root = ICD_REPO_ROOT;
  icd::RunSpec spec;
  {
    std::ifstream in(root / "data" / "demo" / "run_config.json");
    if (!in) {
      out.fail("demo run config missing");
      return out;
    }
    icd::apply_config_json(spec, nlohmann::json::parse(in));
    icd::resolve_run_spec_paths(spec, root);
  }

  fs::path run_a = fs::temp_directory_path() / "icd_accept_a";
  fs::path run_b = fs::temp_directory_path() / "icd_accept_b";
  fs::remove_all(run_a);
  fs::remove_all(run_b);

  auto one_pass = [&](const fs::path& dir) {
    icd::RunSpec s = spec;
    s.out_dir = dir.string();
    auto summary = icd::cmd_generate(s);
    if (!summary.failures.empty()) out.fail("generation failed under replay");

    icd::EvalConfig eval;
    eval.semantic = true;
    eval.provider_dir = (root / "data" / "demo" / "embeddings").string();
    icd::cmd_evaluate(dir, eval);

    icd::JudgeSpec judge;
    judge.fixture_dir = spec.fixture_dir;
    judge.template_dir = spec.template_dir;
    icd::cmd_judge(dir, judge);
  };
  one_pass(run_a);
  one_pass(run_b);

  auto ta = icd::detail::read_tree(run_a);
  auto tb = icd::detail::read_tree(run_b);
  if (ta.empty() || ta.size() != tb.size()) {
    out.fail(fmt("run trees differ in size (%zu vs %zu)", ta.size(), tb.size()));
  } else {
    for (const auto& [rel, content] : ta) {
      auto it = tb.find(rel);
      if (it == tb.end() || it->second != content) {
        out.fail("file " + rel + " differs between the two executions");
        break;
      }
    }
  }

  // the selected subset never scores below the truncated default subset
  icd::RunStore store(run_a);
  auto manifest = store.read_manifest();
  icd::IcdConfig icd_cfg;
  auto f = icd::make_diversity_fn(icd::MetricId::self_bleu3, icd_cfg);
  for (const auto& id : manifest.instance_ids) {
    auto result = store.read_instance(id);
    if (!result.selected_set || !result.default_set) {
      out.fail("instance " + id + " is missing sets");
      continue;
    }
    const auto& def = result.default_set->sentences;
    if (def.size() < 3) continue;  // truncation is not a candidate subset
    std::vector<Sentence> truncated(def.begin(), def.begin() + 3);
    double selected_score = f(result.selected_set->sentences);
    double truncated_score = f(truncated);
    if (selected_score + 1e-9 < truncated_score) {
      out.fail(fmt("instance %s: selected %.4f < truncated default %.4f", id.c_str(),
                   selected_score, truncated_score));
    }
  }

  fs::remove_all(run_a);
  fs::remove_all(run_b);
  if (out.pass)
    out.detail = "two generate+evaluate+judge passes are byte-identical; selected >= truncated default";
  return out;
}

Outcome criterion8_declaration() {
  Outcome out;
  out.detail =
      "declared: absolute diversity/quality values from the published experiments depend on closed "
      "models and specific embedding checkpoints and are not reproduction targets; criteria 3-7 "
      "stand in as property-based acceptance";
  return out;
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* name;
    double time_limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "harmonic-mean reproduction", 1.0, criterion1_harmonic_rows},
      {2, "metric-pair reproduction", 1.0, criterion2_pair_cells},
      {3, "subset-selection oracle equivalence", 5.0, criterion3_subset_oracle},
      {4, "lexical metric invariants", 30.0, criterion4_lexical_invariants},
      {5, "gaussian-distance numerics", 5.0, criterion5_fbd_numerics},
      {6, "agreement arithmetic", 5.0, criterion6_agreement},
      {7, "end-to-end replay determinism", 10.0, criterion7_replay_determinism},
      {8, "absolute published values are out of scope", 5.0, criterion8_declaration},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criterion.run();
    } catch (const std::exception& e) {
      outcome.fail(std::string("exception: ") + e.what());
    }
    double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (seconds > criterion.time_limit_s) {
      outcome.fail(fmt("runtime %.2fs exceeds the %.0fs limit", seconds, criterion.time_limit_s));
    }
    if (!outcome.pass) ++failures;
    std::printf("[%s] criterion %d: %s (%.2fs) %s\n", outcome.pass ? "PASS" : "FAIL",
                criterion.number, criterion.name, seconds,
                outcome.detail.empty() ? "" : ("- " + outcome.detail).c_str());
  }
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
