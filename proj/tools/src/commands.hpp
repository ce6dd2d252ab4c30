#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace dip::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitModelFormat = 4;
inline constexpr int kExitEvalInput = 5;

struct SynthOptions {
  std::filesystem::path out;
  std::optional<std::filesystem::path> pretrain_out;
  int targets = 5;
  int preconditions = 4;
  int templates = 3;
  int vocab = 200;
  uint64_t seed = 0;
};

struct TrainOptions {
  std::filesystem::path corpus;
  std::optional<std::filesystem::path> pretrain;
  std::filesystem::path out;
  std::vector<int> windows = {0, 3, 5};
  int sampler_order = 3;
  // The control code sits three tokens before the trigger position
  // (<E> e <sep> <pre> _); order 4 keeps it inside the generator's context.
  int generator_order = 4;
  double add_k = 0.01;
  double gamma = 0.3;
  double pretrain_weight = 0.5;
  uint64_t seed = 0;
  bool quiet = false;
};

struct GenerateOptions {
  std::filesystem::path models;
  std::filesystem::path corpus;
  std::filesystem::path out;
  std::string strategy = "dip";  // beam | rps | rps_post | dip
  int window = 0;
  int num_triggers = 20;
  int beam_k = 10;
  double nucleus_p = 0.9;
  double lambda = 1.2;
  int top_k = 10;
  int max_len = 16;
  int num_iterations = 10;
  int limit = 0;  // 0 = every test-split target
  int threads = 1;
  uint64_t seed = 0;
  bool quiet = false;
};

struct EvaluateOptions {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path models;
  std::filesystem::path out;
  std::string self_bleu_mode = "pairwise";
  bool allow_ragged = false;
  bool quiet = false;
};

struct CompareOptions {
  std::vector<std::filesystem::path> runs;
  std::filesystem::path models;
  std::filesystem::path out;
  std::string self_bleu_mode = "pairwise";
  bool allow_ragged = false;
  bool quiet = false;
};

int cmd_synth(const SynthOptions& options);
int cmd_train(const TrainOptions& options);
int cmd_generate(const GenerateOptions& options);
int cmd_evaluate(const EvaluateOptions& options);
int cmd_compare(const CompareOptions& options);

}  // namespace dip::cli
