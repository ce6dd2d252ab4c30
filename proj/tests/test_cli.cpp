#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "dip/corpus.hpp"
#include "dip/pipeline.hpp"

using namespace dip;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dip_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

cli::SynthOptions small_synth(const fs::path& dir) {
  cli::SynthOptions o;
  o.out = dir / "corpus.jsonl";
  o.pretrain_out = dir / "temporal.jsonl";
  o.targets = 5;
  o.preconditions = 4;
  o.templates = 8;
  o.vocab = 200;
  o.seed = 7;
  return o;
}

cli::TrainOptions small_train(const fs::path& dir) {
  cli::TrainOptions o;
  o.corpus = dir / "corpus.jsonl";
  o.pretrain = dir / "temporal.jsonl";
  o.out = dir / "models";
  o.windows = {0};
  o.seed = 7;
  o.quiet = true;
  return o;
}

cli::GenerateOptions small_generate(const fs::path& dir,
                                    const std::string& strategy) {
  cli::GenerateOptions o;
  o.models = dir / "models";
  o.corpus = dir / "corpus.jsonl";
  o.out = dir / "runs";
  o.strategy = strategy;
  o.seed = 11;
  o.limit = 8;
  o.quiet = true;
  return o;
}

}  // namespace

TEST_CASE("synth + train + generate + evaluate round trip") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  REQUIRE(fs::exists(dir.path / "corpus.jsonl"));
  REQUIRE(fs::exists(dir.path / "temporal.jsonl"));

  REQUIRE(cli::cmd_train(small_train(dir.path)) == cli::kExitOk);
  for (const char* component :
       {"generator", "infill", "sampler_w0"}) {
    CHECK(fs::exists(dir.path / "models" / component / "manifest.json"));
    CHECK(fs::exists(dir.path / "models" / component / "payload.json"));
  }
  CHECK(fs::exists(dir.path / "models" / "ranker.json"));
  CHECK(fs::exists(dir.path / "models" / "manifest.json"));
  CHECK_FALSE(fs::exists(dir.path / "models" / ".dip.lock"));

  REQUIRE(cli::cmd_generate(small_generate(dir.path, "dip")) == cli::kExitOk);
  REQUIRE(cli::cmd_generate(small_generate(dir.path, "beam")) == cli::kExitOk);

  const auto records = read_run_records(dir.path / "runs" / "dip.jsonl");
  REQUIRE(records.size() == 8);
  for (const auto& r : records) {
    CHECK(r.strategy == "dip");
    CHECK(!r.triggers.empty());
    CHECK(r.filter.has_value());
    CHECK(r.kept().size() <= 10);
    CHECK(r.kept().size() >= 2);
    for (const auto& c : r.candidates) {
      CHECK(c.rank_score.has_value());
    }
  }
  const auto beam_records = read_run_records(dir.path / "runs" / "beam.jsonl");
  for (const auto& r : beam_records) {
    CHECK_FALSE(r.filter.has_value());
    CHECK(r.triggers.empty());
    for (const auto& c : r.candidates) CHECK_FALSE(c.rank_score.has_value());
  }

  cli::EvaluateOptions eval;
  eval.runs = {dir.path / "runs" / "dip.jsonl", dir.path / "runs" / "beam.jsonl"};
  eval.models = dir.path / "models";
  eval.out = dir.path / "reports";
  eval.allow_ragged = true;
  eval.quiet = true;
  REQUIRE(cli::cmd_evaluate(eval) == cli::kExitOk);
  CHECK(fs::exists(dir.path / "reports" / "dip_report.json"));
  CHECK(fs::exists(dir.path / "reports" / "beam_report.json"));
  CHECK(fs::exists(dir.path / "reports" / "comparison.md"));

  const json cmp = json::parse(slurp(dir.path / "reports" / "comparison.json"));
  REQUIRE(cmp["rows"].size() == 2);

  cli::CompareOptions cmp_opts;
  cmp_opts.runs = eval.runs;
  cmp_opts.models = eval.models;
  cmp_opts.out = dir.path / "comparison";
  cmp_opts.allow_ragged = true;
  cmp_opts.quiet = true;
  REQUIRE(cli::cmd_compare(cmp_opts) == cli::kExitOk);
  CHECK(fs::exists(dir.path / "comparison" / "comparison.md"));
}

TEST_CASE("commands never mutate their input files") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  const std::string corpus_before = slurp(dir.path / "corpus.jsonl");
  const std::string temporal_before = slurp(dir.path / "temporal.jsonl");

  REQUIRE(cli::cmd_train(small_train(dir.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_generate(small_generate(dir.path, "dip")) == cli::kExitOk);
  const std::string runs_before = slurp(dir.path / "runs" / "dip.jsonl");

  cli::EvaluateOptions eval;
  eval.runs = {dir.path / "runs" / "dip.jsonl"};
  eval.models = dir.path / "models";
  eval.out = dir.path / "reports";
  eval.allow_ragged = true;
  eval.quiet = true;
  eval.self_bleu_mode = "vs-rest";
  REQUIRE(cli::cmd_evaluate(eval) == cli::kExitOk);

  CHECK(slurp(dir.path / "corpus.jsonl") == corpus_before);
  CHECK(slurp(dir.path / "temporal.jsonl") == temporal_before);
  CHECK(slurp(dir.path / "runs" / "dip.jsonl") == runs_before);
  const std::string report = slurp(dir.path / "reports" / "dip_report.json");
  CHECK(report.find("\"vs-rest\"") != std::string::npos);
}

TEST_CASE("identical seeds give byte-identical artifacts") {
  TempDir a, b;
  REQUIRE(cli::cmd_synth(small_synth(a.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_synth(small_synth(b.path)) == cli::kExitOk);
  CHECK(slurp(a.path / "corpus.jsonl") == slurp(b.path / "corpus.jsonl"));
  CHECK(slurp(a.path / "temporal.jsonl") == slurp(b.path / "temporal.jsonl"));

  REQUIRE(cli::cmd_train(small_train(a.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_train(small_train(b.path)) == cli::kExitOk);
  for (const auto& rel :
       {"models/manifest.json", "models/generator/manifest.json",
        "models/generator/payload.json", "models/sampler_w0/payload.json",
        "models/ranker.json"}) {
    CHECK(slurp(a.path / rel) == slurp(b.path / rel));
  }

  REQUIRE(cli::cmd_generate(small_generate(a.path, "dip")) == cli::kExitOk);
  REQUIRE(cli::cmd_generate(small_generate(b.path, "dip")) == cli::kExitOk);
  CHECK(slurp(a.path / "runs" / "dip.jsonl") ==
        slurp(b.path / "runs" / "dip.jsonl"));
}

TEST_CASE("multithreaded generation matches single-threaded output") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_train(small_train(dir.path)) == cli::kExitOk);

  auto serial = small_generate(dir.path, "dip");
  REQUIRE(cli::cmd_generate(serial) == cli::kExitOk);
  const std::string baseline = slurp(dir.path / "runs" / "dip.jsonl");

  fs::remove_all(dir.path / "runs");
  auto parallel = small_generate(dir.path, "dip");
  parallel.threads = 4;
  REQUIRE(cli::cmd_generate(parallel) == cli::kExitOk);
  CHECK(slurp(dir.path / "runs" / "dip.jsonl") == baseline);
}

TEST_CASE("missing pretrain corpus is fine at weight zero") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);

  auto train = small_train(dir.path);
  train.pretrain.reset();

  SUBCASE("nonzero weight demands the corpus") {
    CHECK(cli::cmd_train(train) == cli::kExitConfig);
    CHECK_FALSE(fs::exists(dir.path / "models" / "manifest.json"));
  }
  SUBCASE("weight zero trains from the finetune corpus alone") {
    train.pretrain_weight = 0.0;
    CHECK(cli::cmd_train(train) == cli::kExitOk);
    CHECK(fs::exists(dir.path / "models" / "manifest.json"));
  }
}

TEST_CASE("bad records abort training without a partial model directory") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);

  // Corrupt one record with overlapping spans.
  std::ifstream in(dir.path / "corpus.jsonl");
  std::string line;
  std::getline(in, line);
  in.close();
  json j = json::parse(line);
  j["precondition"] = j["target"];
  j["id"] = "broken";
  std::ofstream app(dir.path / "corpus.jsonl", std::ios::app);
  app << j.dump() << "\n";
  app.close();

  auto train = small_train(dir.path);
  CHECK(cli::cmd_train(train) == cli::kExitData);
  CHECK_FALSE(fs::exists(dir.path / "models"));
}

TEST_CASE("manifest version mismatch exits with the model-format code") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_train(small_train(dir.path)) == cli::kExitOk);

  const fs::path manifest = dir.path / "models" / "infill" / "manifest.json";
  json j = json::parse(slurp(manifest));
  j["format_version"] = 99;
  std::ofstream(manifest, std::ios::trunc) << j.dump(2) << "\n";

  CHECK(cli::cmd_generate(small_generate(dir.path, "beam")) ==
        cli::kExitModelFormat);
}

TEST_CASE("ragged candidate counts exit 5 without --allow-ragged") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_train(small_train(dir.path)) == cli::kExitOk);
  REQUIRE(cli::cmd_generate(small_generate(dir.path, "dip")) == cli::kExitOk);

  // Tamper with kept counts so targets disagree.
  auto records = read_run_records(dir.path / "runs" / "dip.jsonl");
  REQUIRE(records.size() >= 2);
  int kept_seen = 0;
  for (auto& c : records[0].candidates) {
    if (c.kept && ++kept_seen > 2) c.kept = false;
  }
  write_run_records(dir.path / "runs" / "dip.jsonl", records);

  cli::EvaluateOptions eval;
  eval.runs = {dir.path / "runs" / "dip.jsonl"};
  eval.models = dir.path / "models";
  eval.out = dir.path / "reports";
  eval.quiet = true;
  CHECK(cli::cmd_evaluate(eval) == cli::kExitEvalInput);

  eval.allow_ragged = true;
  fs::remove_all(dir.path / "reports");
  CHECK(cli::cmd_evaluate(eval) == cli::kExitOk);
}

TEST_CASE("held lock makes commands refuse the output directory") {
  TempDir dir;
  REQUIRE(cli::cmd_synth(small_synth(dir.path)) == cli::kExitOk);
  fs::create_directories(dir.path / "models");
  std::ofstream(dir.path / "models" / ".dip.lock") << "held\n";
  CHECK(cli::cmd_train(small_train(dir.path)) == cli::kExitConfig);
}

TEST_CASE("unknown strategy is a config error") {
  TempDir dir;
  auto gen = small_generate(dir.path, "sideways");
  CHECK(cli::cmd_generate(gen) == cli::kExitConfig);
}

TEST_CASE("window ablation artifacts appear when windows differ") {
  TempDir dir;
  auto synth = small_synth(dir.path);
  REQUIRE(cli::cmd_synth(synth) == cli::kExitOk);
  auto train = small_train(dir.path);
  train.windows = {0, 3};
  REQUIRE(cli::cmd_train(train) == cli::kExitOk);

  auto g0 = small_generate(dir.path, "dip");
  g0.window = 0;
  REQUIRE(cli::cmd_generate(g0) == cli::kExitOk);
  fs::rename(dir.path / "runs" / "dip.jsonl", dir.path / "runs" / "dip_w0.jsonl");
  fs::rename(dir.path / "runs" / "dip.meta.json",
             dir.path / "runs" / "dip_w0.meta.json");
  auto g3 = small_generate(dir.path, "dip");
  g3.window = 3;
  REQUIRE(cli::cmd_generate(g3) == cli::kExitOk);
  fs::rename(dir.path / "runs" / "dip.jsonl", dir.path / "runs" / "dip_w3.jsonl");
  fs::rename(dir.path / "runs" / "dip.meta.json",
             dir.path / "runs" / "dip_w3.meta.json");

  cli::CompareOptions cmp;
  cmp.runs = {dir.path / "runs" / "dip_w0.jsonl",
              dir.path / "runs" / "dip_w3.jsonl"};
  cmp.models = dir.path / "models";
  cmp.out = dir.path / "cmp";
  cmp.allow_ragged = true;
  cmp.quiet = true;
  REQUIRE(cli::cmd_compare(cmp) == cli::kExitOk);
  CHECK(fs::exists(dir.path / "cmp" / "context_ablation.md"));
  const std::string md = slurp(dir.path / "cmp" / "context_ablation.md");
  CHECK(md.find("trigger only") != std::string::npos);
  CHECK(md.find("+-3 tokens") != std::string::npos);
}
