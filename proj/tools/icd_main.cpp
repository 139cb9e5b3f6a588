// icd: diversified generation over a pluggable chat backend, diversity /
// quality evaluation, LLM-as-judge ratings, and MoE training-data export.
//
// Configuration layering: JSON config file < command-line flags < the
// ICD_API_KEY environment variable (credentials only).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icd/commands.hpp"

namespace {

using nlohmann::json;

std::optional<std::pair<size_t, size_t>> parse_range(const std::string& text) {
  if (text.empty()) return std::nullopt;
  auto colon = text.find(':');
  if (colon == std::string::npos) throw icd::ConfigError("range must look like BEGIN:END");
  try {
    return std::make_pair(static_cast<size_t>(std::stoull(text.substr(0, colon))),
                          static_cast<size_t>(std::stoull(text.substr(colon + 1))));
  } catch (const std::exception&) {
    throw icd::ConfigError("range bounds must be non-negative integers: " + text);
  }
}

std::vector<icd::MetricPair> parse_pairs(const std::string& text) {
  std::vector<icd::MetricPair> pairs;
  if (text.empty()) return pairs;
  size_t start = 0;
  while (start <= text.size()) {
    size_t comma = text.find(',', start);
    std::string item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) {
      auto plus = item.find('+');
      if (plus == std::string::npos) {
        throw icd::ConfigError("pair must look like DIVERSITY+QUALITY: " + item);
      }
      pairs.emplace_back(icd::metric_from_string(item.substr(0, plus)),
                         icd::metric_from_string(item.substr(plus + 1)));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return pairs;
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return argv[i + 1];
    if (arg.rfind("--config=", 0) == 0) return arg.substr(9);
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"in-context diversification toolkit"};
  app.require_subcommand(1);

  icd::RunSpec spec;
  std::string config_path = find_config_arg(argc, argv);
  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw icd::ConfigError("config file not found: " + config_path);
      icd::apply_config_json(spec, json::parse(in));
    }
  } catch (const icd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: bad config file: " << e.what() << "\n";
    return static_cast<int>(icd::Errc::config);
  }

  std::string config_dummy, format_str = to_string(spec.format), method_str = to_string(spec.method);
  std::string backend_str = to_string(spec.backend), f_str = to_string(spec.icd.f);
  std::string trigger_str = to_string(spec.icd.trigger), range_str, few_shot_path;

  auto* gen = app.add_subcommand("generate", "run a generation method over a dataset");
  gen->add_option("--config", config_dummy, "JSON config file (applied before flags)");
  gen->add_option("--dataset", spec.dataset_path, "dataset file (line-delimited JSON)");
  gen->add_option("--format", format_str, "commongen|comve|dimongen");
  gen->add_option("--method", method_str, "default|diversified|icd");
  gen->add_option("--out", spec.out_dir, "run output directory");
  gen->add_option("--backend", backend_str, "live|replay|record");
  gen->add_option("--fixtures", spec.fixture_dir, "transcript fixture store directory");
  gen->add_option("--base-url", spec.base_url, "chat backend base URL (scheme://host[:port])");
  gen->add_option("--model", spec.gen.model, "model id");
  gen->add_option("--temperature", spec.gen.temperature, "sampling temperature");
  gen->add_option("--max-tokens-per-sentence", spec.gen.max_tokens_per_sentence,
                  "response length cap per requested sentence");
  gen->add_option("--retries", spec.gen.retries, "transport retries");
  gen->add_option("--n", spec.icd.n, "number of output sentences per instance");
  gen->add_option("--f", f_str, "diversity metric for trigger/selection");
  gen->add_option("--trigger", trigger_str, "duplicate_sentence|threshold");
  gen->add_option("--tau", spec.icd.trigger_tau, "threshold trigger cutoff on the oriented score");
  gen->add_option("--templates", spec.template_dir, "prompt template directory");
  gen->add_option("--few-shot", few_shot_path, "few-shot examples file (JSONL with src/tgt)");
  gen->add_option("--range", range_str, "instance window BEGIN:END");
  gen->add_option("--seed", spec.seed, "run seed (recorded in the manifest)");
  gen->add_option("--parallel", spec.parallelism, "concurrent instances");
  gen->add_flag("--fail-fast", spec.fail_fast, "abort on the first instance failure");
  gen->add_option("--provider-url", spec.provider_url, "embedding provider URL (semantic f only)");
  gen->add_option("--provider-dir", spec.provider_dir, "embedding fixture directory (semantic f only)");

  std::string eval_run;
  icd::EvalConfig eval_cfg;
  std::string pairs_str;
  double bertscore_baseline = -1.0;
  auto* eval = app.add_subcommand("evaluate", "score a run into report.json / report.txt");
  eval->add_option("--run", eval_run, "run directory")->required();
  eval->add_flag("--semantic", eval_cfg.semantic, "compute embedding-based metrics");
  eval->add_option("--provider-url", eval_cfg.provider_url, "embedding provider URL");
  eval->add_option("--provider-dir", eval_cfg.provider_dir, "embedding fixture directory");
  eval->add_option("--corpus-k", eval_cfg.corpus_k, "k for Distinct-k / Entropy-k");
  eval->add_option("--smoothing", eval_cfg.bleu.smoothing_epsilon, "BLEU smoothing epsilon");
  eval->add_option("--pairs", pairs_str, "extra harmonic pairs, e.g. self_cossim+spice,...");
  eval->add_option("--spice", eval_cfg.spice_file, "imported SPICE scores (JSON id->value)");
  eval->add_option("--bertscore-baseline", bertscore_baseline,
                   "affine baseline rescaling constant in [0,1)");
  std::string idf_path;
  eval->add_option("--idf", idf_path, "BERTScore idf weights (JSON token->weight)");

  std::string judge_run, judge_target_str = "selected";
  icd::JudgeSpec judge_spec;
  std::string judge_backend_str = "replay";
  auto* judge = app.add_subcommand("judge", "rate set diversity with an LLM judge");
  judge->add_option("--run", judge_run, "run directory")->required();
  judge->add_option("--repeats", judge_spec.repeats, "judge runs per set");
  judge->add_option("--target", judge_target_str, "selected|final|union");
  judge->add_option("--backend", judge_backend_str, "live|replay|record");
  judge->add_option("--fixtures", judge_spec.fixture_dir, "transcript fixture store directory");
  judge->add_option("--base-url", judge_spec.base_url, "chat backend base URL");
  judge->add_option("--model", judge_spec.gen.model, "model id");
  judge->add_option("--temperature", judge_spec.gen.temperature, "sampling temperature");
  judge->add_option("--templates", judge_spec.template_dir, "prompt template directory");
  judge->add_option("--human-ratings", judge_spec.human_ratings,
                    "delimited table (set rater rating) for the agreement report");
  judge->add_flag("--tie-high", judge_spec.tie_is_high, "map a mean of exactly 3 to high");

  std::vector<std::string> moe_runs;
  std::string moe_out;
  int moe_experts = 3;
  uint64_t moe_seed = 0;
  auto* moe = app.add_subcommand("export-moe", "export mixture-of-experts training data");
  moe->add_option("--run", moe_runs, "run directories")->required();
  moe->add_option("--out", moe_out, "output JSONL path")->required();
  moe->add_option("--experts", moe_experts, "number of experts");
  moe->add_option("--seed", moe_seed, "shuffle seed");

  std::string verify_run;
  auto* verify = app.add_subcommand("replay-verify", "re-run a run from its manifest and compare bytes");
  verify->add_option("--run", verify_run, "run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      spec.format = icd::dataset_format_from_string(format_str);
      spec.method = icd::method_from_string(method_str);
      spec.backend = icd::backend_mode_from_string(backend_str);
      spec.icd.f = icd::metric_from_string(f_str);
      spec.icd.trigger = icd::trigger_mode_from_string(trigger_str);
      spec.range = parse_range(range_str);
      if (!few_shot_path.empty()) spec.few_shot = icd::load_few_shot_file(few_shot_path);
      if (const char* key = std::getenv("ICD_API_KEY")) spec.api_key = key;

      auto summary = icd::cmd_generate(spec);
      std::cout << "run directory: " << summary.run_dir.string() << "\n";
      std::cout << "instances succeeded: " << summary.succeeded << "\n";
      if (!summary.failures.empty()) {
        std::cout << "instances failed: " << summary.failures.size() << " (see errors.json)\n";
        for (const auto& [id, msg] : summary.failures) {
          std::cerr << "  " << id << ": " << msg << "\n";
        }
        return 1;
      }
      return 0;
    }

    if (eval->parsed()) {
      eval_cfg.pairs = parse_pairs(pairs_str);
      if (bertscore_baseline >= 0.0) eval_cfg.bertscore.baseline = bertscore_baseline;
      if (!idf_path.empty()) {
        std::ifstream idf_in(idf_path);
        if (!idf_in) throw icd::ConfigError("idf file not found: " + idf_path);
        json idf_doc = json::parse(idf_in);
        for (const auto& [token, weight] : idf_doc.items()) {
          eval_cfg.bertscore.idf[token] = weight.get<double>();
        }
        eval_cfg.bertscore.use_idf = true;
      }
      auto report = icd::cmd_evaluate(eval_run, eval_cfg);
      std::cout << icd::report_to_text(report);
      return 0;
    }

    if (judge->parsed()) {
      judge_spec.target = icd::judge_target_from_string(judge_target_str);
      judge_spec.backend = icd::backend_mode_from_string(judge_backend_str);
      if (const char* key = std::getenv("ICD_API_KEY")) judge_spec.api_key = key;
      auto outcome = icd::cmd_judge(judge_run, judge_spec);
      std::cout << "rated sets: " << outcome.ratings.size() << "\n";
      if (outcome.agreement) {
        std::cout << "kappa: " << outcome.agreement->kappa << " (p_o=" << outcome.agreement->p_observed
                  << ", p_e=" << outcome.agreement->p_expected << ")\n";
      }
      return 0;
    }

    if (moe->parsed()) {
      std::vector<std::filesystem::path> dirs(moe_runs.begin(), moe_runs.end());
      auto records = icd::cmd_export_moe(dirs, moe_experts, moe_seed, moe_out);
      std::cout << "exported records: " << records.size() << "\n";
      return 0;
    }

    if (verify->parsed()) {
      auto result = icd::cmd_replay_verify(verify_run);
      if (result.identical) {
        std::cout << "replay verified: byte-identical\n";
        return 0;
      }
      std::cerr << "replay mismatch: " << result.detail << "\n";
      return static_cast<int>(icd::Errc::evaluation);
    }
  } catch (const icd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
