#include <benchmark/benchmark.h>

#include "dip/decode.hpp"
#include "dip/model.hpp"

namespace {

using namespace dip;

ExplicitTableModel branching_model(size_t content_words) {
  std::vector<std::string> names;
  for (size_t i = 0; i < content_words; ++i) {
    names.push_back("w" + std::to_string(i));
  }
  Vocab vocab(names);
  Rng rng(17);
  std::map<TokenSeq, Distribution> table;
  for (size_t v = 0; v < vocab.size(); ++v) {
    std::vector<double> weights(vocab.size(), 0.0);
    for (size_t w = tok::kNumSpecial; w < vocab.size(); ++w) {
      weights[w] = static_cast<double>(1 + rng() % 7);
    }
    weights[static_cast<size_t>(tok::kEos)] = 4.0;
    table.emplace(TokenSeq{static_cast<TokenId>(v)},
                  Distribution::from_weights(std::move(weights)));
  }
  return ExplicitTableModel(std::move(vocab), 1, std::move(table));
}

void BM_BeamSearch(benchmark::State& state) {
  const auto model = branching_model(16);
  const TokenSeq prefix = {tok::kNumSpecial};
  DecodeConfig config;
  config.beam_width = static_cast<int>(state.range(0));
  config.max_len = 12;
  for (auto _ : state) {
    benchmark::DoNotOptimize(beam_search(model, prefix, config));
  }
}
BENCHMARK(BM_BeamSearch)->Arg(4)->Arg(16)->Arg(64);

void BM_NucleusTruncate(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> weights(static_cast<size_t>(state.range(0)));
  for (double& w : weights) w = static_cast<double>(1 + rng() % 100);
  const Distribution dist = Distribution::from_weights(std::move(weights));
  for (auto _ : state) {
    benchmark::DoNotOptimize(nucleus_truncate(dist, 0.9));
  }
}
BENCHMARK(BM_NucleusTruncate)->Arg(256)->Arg(4096);

void BM_PenalizedDist(benchmark::State& state) {
  Rng rng(5);
  std::vector<double> logits(static_cast<size_t>(state.range(0)));
  for (double& x : logits) x = -4.0 + 8.0 * uniform01(rng);
  PenaltyState penalty;
  for (int i = 0; i < 8; ++i) {
    penalty.add(static_cast<TokenId>(rng() % logits.size()));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(penalized_dist(logits, penalty, 1.2));
  }
}
BENCHMARK(BM_PenalizedDist)->Arg(256)->Arg(4096);

void BM_RpsGenerate(benchmark::State& state) {
  const auto model = branching_model(16);
  InfillingInstance inst;
  inst.input_tokens = {"w0"};
  DecodeConfig config;
  config.max_len = 12;
  for (auto _ : state) {
    Rng rng(11);
    benchmark::DoNotOptimize(rps_generate(model, inst, 10, config, rng));
  }
}
BENCHMARK(BM_RpsGenerate);

}  // namespace
