#include <algorithm>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"

namespace {

using dip::cli::kExitConfig;
using nlohmann::json;

/// Turns a JSON config file ({"flag-name": value, ...}) into CLI tokens.
/// They are injected before the user's flags; with TakeLast options the
/// command line wins on conflict.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CLI::FileError("config file not found: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw CLI::FileError(std::string("config file is not valid JSON: ") +
                         e.what());
  }
  if (!j.is_object()) throw CLI::FileError("config file must hold an object");
  std::vector<std::string> tokens;
  for (const auto& [key, value] : j.items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) tokens.push_back("--" + key);
      continue;
    }
    if (value.is_array()) {
      for (const auto& item : value) {
        tokens.push_back("--" + key);
        tokens.push_back(item.is_string() ? item.get<std::string>()
                                          : item.dump());
      }
      continue;
    }
    tokens.push_back("--" + key);
    tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
  }
  return tokens;
}

void take_last_everywhere(CLI::App* app) {
  for (CLI::Option* opt : app->get_options()) {
    if (opt->get_expected_max() <= 1) {
      opt->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    }
  }
  for (CLI::App* sub : app->get_subcommands({})) take_last_everywhere(sub);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diverse precondition generation pipeline"};
  app.require_subcommand(1);

  dip::cli::SynthOptions synth;
  dip::cli::TrainOptions train;
  dip::cli::GenerateOptions generate;
  dip::cli::EvaluateOptions evaluate;
  dip::cli::CompareOptions compare;

  auto* synth_cmd = app.add_subcommand("synth", "synthesize a templated corpus");
  synth_cmd->add_option("--out", synth.out, "corpus JSONL output")->required();
  synth_cmd->add_option("--pretrain-out", synth.pretrain_out,
                        "write temporal records to a separate file");
  synth_cmd->add_option("--targets", synth.targets, "number of target types");
  synth_cmd->add_option("--preconditions-per-target", synth.preconditions,
                        "valid precondition triggers per target");
  synth_cmd->add_option("--templates", synth.templates,
                        "sentence instances per (target, trigger) pair");
  synth_cmd->add_option("--vocab", synth.vocab, "vocabulary budget");
  synth_cmd->add_option("--seed", synth.seed, "generation seed")->required();

  auto* train_cmd = app.add_subcommand("train", "train sampler/generator/ranker");
  train_cmd->add_option("--corpus", train.corpus, "precondition corpus JSONL")
      ->required();
  train_cmd->add_option("--pretrain", train.pretrain, "temporal corpus JSONL");
  train_cmd->add_option("--out", train.out, "model output directory")->required();
  train_cmd->add_option("--windows", train.windows,
                        "sampler context windows (subset of 0 3 5)");
  train_cmd->add_option("--sampler-order", train.sampler_order, "sampler n-gram order");
  train_cmd->add_option("--generator-order", train.generator_order,
                        "generator n-gram order");
  train_cmd->add_option("--add-k", train.add_k, "smoothing constant");
  train_cmd->add_option("--gamma", train.gamma, "control-code copy bias");
  train_cmd->add_option("--pretrain-weight", train.pretrain_weight,
                        "weight of the temporal corpus counts");
  train_cmd->add_option("--seed", train.seed, "training seed")->required();
  train_cmd->add_flag("--quiet", train.quiet, "suppress progress output");

  auto* gen_cmd = app.add_subcommand("generate", "generate candidate preconditions");
  gen_cmd->add_option("--models", generate.models, "model directory")->required();
  gen_cmd->add_option("--corpus", generate.corpus, "corpus JSONL")->required();
  gen_cmd->add_option("--out", generate.out, "run-record output directory")
      ->required();
  gen_cmd->add_option("--strategy", generate.strategy, "beam|rps|rps_post|dip");
  gen_cmd->add_option("--window", generate.window, "sampler window (dip)");
  gen_cmd->add_option("--n-triggers", generate.num_triggers,
                      "triggers sampled per target (dip)");
  gen_cmd->add_option("--beam-k", generate.beam_k, "beam width (beam)");
  gen_cmd->add_option("--nucleus-p", generate.nucleus_p, "nucleus mass");
  gen_cmd->add_option("--lambda", generate.lambda, "repetition penalty (rps)");
  gen_cmd->add_option("--top-k", generate.top_k, "candidates kept per target");
  gen_cmd->add_option("--max-len", generate.max_len, "decode length cap");
  gen_cmd->add_option("--num-iterations", generate.num_iterations,
                      "RPS iterations per target");
  gen_cmd->add_option("--limit", generate.limit, "cap on test targets (0 = all)");
  gen_cmd->add_option("--threads", generate.threads, "worker threads");
  gen_cmd->add_option("--seed", generate.seed, "generation seed")->required();
  gen_cmd->add_flag("--quiet", generate.quiet, "suppress progress output");

  auto* eval_cmd = app.add_subcommand("evaluate", "diversity reports over run records");
  eval_cmd->add_option("--runs", evaluate.runs, "run-record JSONL files")
      ->required();
  eval_cmd->add_option("--models", evaluate.models, "model directory")->required();
  eval_cmd->add_option("--out", evaluate.out, "report output directory")
      ->required();
  eval_cmd->add_option("--self-bleu-mode", evaluate.self_bleu_mode,
                       "pairwise|vs-rest");
  eval_cmd->add_flag("--allow-ragged", evaluate.allow_ragged,
                     "permit unequal candidate counts");
  eval_cmd->add_flag("--quiet", evaluate.quiet, "suppress progress output");

  auto* cmp_cmd = app.add_subcommand("compare", "cross-strategy comparison tables");
  cmp_cmd->add_option("--runs", compare.runs, "run-record JSONL files")->required();
  cmp_cmd->add_option("--models", compare.models, "model directory")->required();
  cmp_cmd->add_option("--out", compare.out, "comparison output directory")
      ->required();
  cmp_cmd->add_option("--self-bleu-mode", compare.self_bleu_mode,
                      "pairwise|vs-rest");
  cmp_cmd->add_flag("--allow-ragged", compare.allow_ragged,
                    "permit unequal candidate counts");
  cmp_cmd->add_flag("--quiet", compare.quiet, "suppress progress output");

  // Document --config in every subcommand's help; the flag itself is
  // consumed before CLI11 parses.
  std::string config_doc;
  for (CLI::App* sub : app.get_subcommands({})) {
    sub->add_option("--config", config_doc,
                    "JSON config file; keys mirror flag names, flags win");
  }
  take_last_everywhere(&app);

  // Splice config-file tokens in right after the subcommand name so that
  // explicit flags, parsed later, take precedence.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    auto config_it = std::find(args.begin(), args.end(), "--config");
    if (config_it != args.end()) {
      if (config_it + 1 == args.end()) {
        std::cerr << "config error: --config needs a file path\n";
        return kExitConfig;
      }
      const std::vector<std::string> extra = config_tokens(*(config_it + 1));
      args.erase(config_it, config_it + 2);
      // Insert after the first token that names a subcommand.
      auto insert_at = args.begin();
      for (auto it = args.begin(); it != args.end(); ++it) {
        if (!it->empty() && (*it)[0] != '-') {
          insert_at = it + 1;
          break;
        }
      }
      args.insert(insert_at, extra.begin(), extra.end());
    }
    std::vector<const char*> cargs{argv[0]};
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  if (synth_cmd->parsed()) return dip::cli::cmd_synth(synth);
  if (train_cmd->parsed()) return dip::cli::cmd_train(train);
  if (gen_cmd->parsed()) return dip::cli::cmd_generate(generate);
  if (eval_cmd->parsed()) return dip::cli::cmd_evaluate(evaluate);
  if (cmp_cmd->parsed()) return dip::cli::cmd_compare(compare);
  return kExitConfig;
}
