#include <benchmark/benchmark.h>

#include "dip/corpus.hpp"
#include "dip/metrics.hpp"
#include "dip/model.hpp"
#include "dip/pipeline.hpp"

namespace {

using namespace dip;

std::vector<TokenSeq> synthetic_sequences(const Vocab& vocab, size_t count,
                                          size_t len, uint64_t seed) {
  Rng rng(seed);
  std::vector<TokenSeq> out;
  for (size_t i = 0; i < count; ++i) {
    TokenSeq seq;
    for (size_t j = 0; j < len; ++j) {
      seq.push_back(static_cast<TokenId>(
          tok::kNumSpecial + rng() % (vocab.size() - tok::kNumSpecial)));
    }
    seq.push_back(tok::kEos);
    out.push_back(std::move(seq));
  }
  return out;
}

Vocab bench_vocab(size_t words) {
  std::vector<std::string> names;
  for (size_t i = 0; i < words; ++i) names.push_back("w" + std::to_string(i));
  return Vocab(names);
}

void BM_TrainNgram(benchmark::State& state) {
  const Vocab vocab = bench_vocab(200);
  const auto corpus =
      synthetic_sequences(vocab, static_cast<size_t>(state.range(0)), 12, 7);
  NGramConfig cfg;
  cfg.order = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_ngram({}, corpus, vocab, cfg));
  }
}
BENCHMARK(BM_TrainNgram)->Arg(500)->Arg(2000);

void BM_NextDist(benchmark::State& state) {
  const Vocab vocab = bench_vocab(static_cast<size_t>(state.range(0)));
  const auto corpus = synthetic_sequences(vocab, 2000, 12, 7);
  NGramConfig cfg;
  cfg.order = 4;
  const NGramModel model = train_ngram({}, corpus, vocab, cfg);
  const TokenSeq prefix = {corpus[0][0], corpus[0][1], corpus[0][2]};
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.next_dist(prefix));
  }
}
BENCHMARK(BM_NextDist)->Arg(64)->Arg(256)->Arg(1024);

void BM_SelfBleu(benchmark::State& state) {
  Rng rng(23);
  std::vector<std::vector<std::string>> set;
  for (int i = 0; i < 10; ++i) {
    std::vector<std::string> sentence;
    const size_t len = 6 + rng() % 9;
    for (size_t j = 0; j < len; ++j) {
      sentence.push_back("w" + std::to_string(rng() % 40));
    }
    set.push_back(std::move(sentence));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(self_bleu(set));
  }
}
BENCHMARK(BM_SelfBleu);

void BM_SimilarityFilterWalk(benchmark::State& state) {
  Rng rng(29);
  const size_t n = static_cast<size_t>(state.range(0));
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 1.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = uniform01(rng);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(similarity_filter_walk(sim));
  }
}
BENCHMARK(BM_SimilarityFilterWalk)->Arg(20)->Arg(100);

void BM_SynthCorpus(benchmark::State& state) {
  SyntheticCorpusSpec spec;
  spec.num_target_types = 10;
  spec.preconditions_per_target = 5;
  spec.templates_per_pair = 20;
  spec.vocab_size = 256;
  spec.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_corpus(spec));
  }
}
BENCHMARK(BM_SynthCorpus);

}  // namespace

BENCHMARK_MAIN();
