#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "dip/corpus.hpp"
#include "dip/model.hpp"
#include "dip/rng.hpp"
#include "oracles.hpp"

using namespace dip;
namespace fs = std::filesystem;

namespace {

Vocab letters_vocab() { return Vocab({"a", "b", "c", "d"}); }

std::vector<TokenSeq> encode_corpus(const Vocab& vocab,
                                    const std::vector<std::vector<std::string>>&
                                        corpus) {
  std::vector<TokenSeq> out;
  for (const auto& seq : corpus) out.push_back(vocab.encode(seq));
  return out;
}

/// Ten short sequences over {a, b, c, d, <eos>} with repeated n-grams.
std::vector<std::vector<std::string>> fixture_corpus() {
  return {
      {"a", "b", "c", "<eos>"}, {"a", "b", "d", "<eos>"},
      {"a", "b", "c", "<eos>"}, {"b", "c", "a", "<eos>"},
      {"c", "a", "b", "<eos>"}, {"d", "d", "a", "<eos>"},
      {"a", "c", "b", "<eos>"}, {"b", "b", "b", "<eos>"},
      {"c", "c", "d", "<eos>"}, {"a", "b", "a", "<eos>"},
  };
}

ExplicitTableModel ab_table_model() {
  // start -> {A: 0.6, B: 0.4}; A -> eos; B -> C; C -> eos.
  return ExplicitTableModel::from_words(
      {"start", "A", "B", "C"}, 1,
      {
          {{"start"}, {{"A", 0.6}, {"B", 0.4}}},
          {{"A"}, {{"<eos>", 1.0}}},
          {{"B"}, {{"C", 1.0}}},
          {{"C"}, {{"<eos>", 1.0}}},
      });
}

}  // namespace

TEST_CASE("explicit table lookups") {
  const ExplicitTableModel model = ab_table_model();
  const TokenSeq prefix = {model.vocab().id("start")};
  const Distribution d = model.next_dist(prefix);
  CHECK(d[model.vocab().id("A")] == doctest::Approx(0.6));
  CHECK(d[model.vocab().id("B")] == doctest::Approx(0.4));

  SUBCASE("missing context") {
    const TokenSeq bad = {tok::kEos};
    CHECK_THROWS_AS(model.next_dist(bad), ValidationError);
  }
  SUBCASE("out-of-vocabulary id") {
    const TokenSeq bad = {static_cast<TokenId>(model.vocab().size())};
    CHECK_THROWS_AS(model.next_dist(bad), VocabError);
  }
  SUBCASE("unnormalized table rejected") {
    CHECK_THROWS_AS(ExplicitTableModel::from_words(
                        {"x"}, 1, {{{"x"}, {{"x", 0.5}}}}),
                    ValidationError);
  }
}

TEST_CASE("deterministic continuation with add_k = 0") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  cfg.order = 2;
  cfg.add_k = 0.0;
  cfg.copy_bias = 0.0;
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, {{"a", "b", "<eos>"}}), vocab, cfg);
  const Distribution d = model.next_dist(TokenSeq{vocab.id("a")});
  CHECK(d[vocab.id("b")] == doctest::Approx(1.0));
}

TEST_CASE("add_k = 0 reproduces maximum-likelihood conditionals") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  cfg.order = 3;
  cfg.add_k = 0.0;
  cfg.copy_bias = 0.0;
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);

  // "a" occurs 9 times with a successor: b 5x, c 1x, <eos> 3x.
  const Distribution d = model.next_dist(TokenSeq{vocab.id("a")});
  CHECK(d[vocab.id("b")] == doctest::Approx(5.0 / 9.0));
  CHECK(d[vocab.id("c")] == doctest::Approx(1.0 / 9.0));
  CHECK(d[tok::kEos] == doctest::Approx(3.0 / 9.0));

  // Seen bigram context (a, b): successors c 2x, d 1x, a 1x, <eos> 1x.
  const Distribution d2 =
      model.next_dist(TokenSeq{vocab.id("a"), vocab.id("b")});
  CHECK(d2[vocab.id("c")] == doctest::Approx(0.4));
  CHECK(d2[vocab.id("a")] == doctest::Approx(0.2));
  CHECK(d2[vocab.id("d")] == doctest::Approx(0.2));
}

TEST_CASE("smoothed conditionals match the independent oracle") {
  const Vocab vocab = letters_vocab();
  const auto corpus = fixture_corpus();
  NGramConfig cfg;
  cfg.order = 3;
  cfg.add_k = 0.1;
  cfg.copy_bias = 0.0;
  cfg.pretrain_weight = 0.0;  // raw finetune counts, same as the oracle
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, corpus), vocab, cfg);

  const std::vector<std::vector<std::string>> contexts = {
      {}, {"a"}, {"a", "b"}, {"b", "c"}, {"d", "d"}, {"c", "<eos>"},
      {"b", "a"}, {"<eos>", "<eos>"}};
  for (const auto& ctx : contexts) {
    const Distribution d = model.next_dist(vocab.encode(ctx));
    double sum = 0.0;
    for (const auto& word : vocab.tokens()) {
      const double expected =
          oracle::ngram_prob(corpus, vocab.tokens(), 3, 0.1, ctx, word);
      CHECK(d[vocab.id(word)] == doctest::Approx(expected).epsilon(1e-12));
      sum += d[vocab.id(word)];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("pretrain weight blends counts order-wise") {
  const Vocab vocab = letters_vocab();
  const auto pre = encode_corpus(vocab, {{"a", "a", "<eos>"}});
  const auto fine = encode_corpus(vocab, {{"a", "b", "<eos>"}});
  NGramConfig cfg;
  cfg.order = 2;
  cfg.add_k = 0.0;
  cfg.copy_bias = 0.0;

  SUBCASE("weight zero ignores the pretrain corpus entirely") {
    cfg.pretrain_weight = 0.0;
    const NGramModel with = train_ngram(pre, fine, vocab, cfg);
    const NGramModel without = train_ngram({}, fine, vocab, cfg);
    for (const auto& ctx :
         {TokenSeq{}, TokenSeq{vocab.id("a")}, TokenSeq{vocab.id("b")}}) {
      CHECK(with.next_dist(ctx).probs == without.next_dist(ctx).probs);
    }
  }
  SUBCASE("weight 0.5 mixes evidence") {
    cfg.pretrain_weight = 0.5;
    const NGramModel model = train_ngram(pre, fine, vocab, cfg);
    // Context "a": pretrain contributes a and <eos>, finetune contributes b,
    // all at weight one half.
    const Distribution d = model.next_dist(TokenSeq{vocab.id("a")});
    CHECK(d[vocab.id("a")] == doctest::Approx(1.0 / 3.0));
    CHECK(d[vocab.id("b")] == doctest::Approx(1.0 / 3.0));
    CHECK(d[tok::kEos] == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("training errors") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  CHECK_THROWS_AS(train_ngram({}, {}, vocab, cfg), TrainingError);

  const TokenSeq bad = {static_cast<TokenId>(vocab.size() + 3)};
  CHECK_THROWS_AS(train_ngram({}, {bad}, vocab, cfg), VocabError);

  SUBCASE("invalid hyperparameters") {
    cfg.copy_bias = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.copy_bias = 0.3;
    cfg.pretrain_weight = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.pretrain_weight = 0.5;
    cfg.interpolation_weights = std::vector<double>{0.5, 0.4};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
}

TEST_CASE("copy bias mixes a point mass on the pending control trigger") {
  // Unigram model with p(run) = 0.2, p(walk) = 0.8.
  Vocab vocab({"run", "walk"});
  NGramModel::ContextCounts unigram;
  unigram[TokenSeq{}] = {{vocab.id("run"), 2.0}, {vocab.id("walk"), 8.0}};
  NGramConfig cfg;
  cfg.order = 1;
  cfg.add_k = 0.0;
  cfg.copy_bias = 0.5;
  const NGramModel model(vocab, cfg, {unigram});

  const TokenId run = vocab.id("run");
  const TokenId walk = vocab.id("walk");

  SUBCASE("pending code boosts the trigger") {
    const TokenSeq prefix = {tok::kControl, run, tok::kSep};
    const Distribution d = model.next_dist(prefix);
    CHECK(d[run] == doctest::Approx(0.6));
    CHECK(d[walk] == doctest::Approx(0.4));
  }
  SUBCASE("bias disappears once the trigger was emitted") {
    const TokenSeq prefix = {tok::kControl, run, tok::kSep, run};
    const Distribution d = model.next_dist(prefix);
    CHECK(d[run] == doctest::Approx(0.2));
    CHECK(d[walk] == doctest::Approx(0.8));
  }
  SUBCASE("no separator, no bias") {
    const TokenSeq prefix = {tok::kControl, run};
    const Distribution d = model.next_dist(prefix);
    CHECK(d[run] == doctest::Approx(0.2));
  }
  SUBCASE("gamma zero is exactly inert") {
    NGramConfig plain = cfg;
    plain.copy_bias = 0.0;
    const NGramModel inert(vocab, plain, {unigram});
    const TokenSeq prefix = {tok::kControl, run, tok::kSep};
    CHECK(inert.next_dist(prefix).probs == inert.ngram_dist(prefix).probs);
  }
}

TEST_CASE("static interpolation weights") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  cfg.order = 2;
  cfg.add_k = 0.0;
  cfg.copy_bias = 0.0;
  cfg.interpolation_weights = std::vector<double>{1.0, 0.0, 0.0};
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);

  // All weight on the bigram estimate: same ML value as the adaptive mode.
  const Distribution d = model.next_dist(TokenSeq{vocab.id("a")});
  CHECK(d[vocab.id("b")] == doctest::Approx(5.0 / 9.0));

  cfg.interpolation_weights = std::vector<double>{0.0, 0.0, 1.0};
  const NGramModel uniform =
      train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);
  const Distribution du = uniform.next_dist(TokenSeq{vocab.id("a")});
  CHECK(du[vocab.id("b")] ==
        doctest::Approx(1.0 / static_cast<double>(vocab.size())));
}

TEST_CASE("sequence logprob") {
  const ExplicitTableModel model = ab_table_model();
  const Vocab& vocab = model.vocab();
  const TokenSeq prefix = {vocab.id("start")};

  SUBCASE("probability-one path scores zero") {
    const TokenSeq continuation = {vocab.id("B"), vocab.id("C"), tok::kEos};
    // p = 0.4 * 1 * 1
    CHECK(sequence_logprob(model, prefix, continuation) ==
          doctest::Approx(std::log(0.4)));
    const TokenSeq sure = {vocab.id("C"), tok::kEos};
    const TokenSeq from_b = {vocab.id("start"), vocab.id("B")};
    CHECK(sequence_logprob(model, from_b, sure) == doctest::Approx(0.0));
  }
  SUBCASE("table products") {
    const TokenSeq a = {vocab.id("A"), tok::kEos};
    CHECK(sequence_logprob(model, prefix, a) == doctest::Approx(std::log(0.6)));
  }
  SUBCASE("chain rule") {
    const TokenSeq c1 = {vocab.id("B")};
    const TokenSeq c2 = {vocab.id("C"), tok::kEos};
    TokenSeq joint = c1;
    joint.insert(joint.end(), c2.begin(), c2.end());
    TokenSeq mid = prefix;
    mid.insert(mid.end(), c1.begin(), c1.end());
    CHECK(sequence_logprob(model, prefix, joint) ==
          doctest::Approx(sequence_logprob(model, prefix, c1) +
                          sequence_logprob(model, mid, c2)));
  }
  SUBCASE("zero-probability step returns -infinity") {
    const TokenSeq impossible = {vocab.id("C")};
    CHECK(std::isinf(sequence_logprob(model, prefix, impossible)));
    CHECK(sequence_logprob(model, prefix, impossible) < 0);
  }
  SUBCASE("empty continuation rejected") {
    CHECK_THROWS_AS(sequence_logprob(model, prefix, {}), ConfigError);
  }
}

TEST_CASE("model persistence round trips bit-exactly") {
  const fs::path dir = fs::temp_directory_path() / "dip_lm_test";
  fs::remove_all(dir);

  SUBCASE("explicit table") {
    const ExplicitTableModel model = ab_table_model();
    persist(model, dir / "table");
    const auto loaded = load_model(dir / "table");
    REQUIRE(loaded->kind() == "explicit_table");
    for (const auto& [ctx, dist] : model.table()) {
      CHECK(loaded->next_dist(ctx).probs == dist.probs);
    }
  }

  SUBCASE("ngram agrees on random prefixes") {
    const Vocab vocab = letters_vocab();
    NGramConfig cfg;
    cfg.order = 3;
    cfg.add_k = 0.1;
    const NGramModel model =
        train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);
    persist(model, dir / "ngram");
    const auto loaded = load_model(dir / "ngram");

    Rng rng(99);
    for (int i = 0; i < 100; ++i) {
      TokenSeq prefix;
      const size_t len = rng() % 4;
      for (size_t j = 0; j < len; ++j) {
        prefix.push_back(static_cast<TokenId>(rng() % vocab.size()));
      }
      CHECK(loaded->next_dist(prefix).probs == model.next_dist(prefix).probs);
    }
  }

  SUBCASE("truncated payload fails without a partial model") {
    const ExplicitTableModel model = ab_table_model();
    persist(model, dir / "broken");
    std::ofstream(dir / "broken" / "payload.json", std::ios::trunc)
        << "{\"table\": {";
    CHECK_THROWS_AS(load_model(dir / "broken"), FormatError);
  }

  SUBCASE("version mismatch is a format error") {
    const ExplicitTableModel model = ab_table_model();
    persist(model, dir / "versioned");
    std::ifstream in(dir / "versioned" / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"format_version\": 1");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 19, "\"format_version\": 9");
    std::ofstream(dir / "versioned" / "manifest.json", std::ios::trunc) << text;
    CHECK_THROWS_AS(load_model(dir / "versioned"), FormatError);
  }

  fs::remove_all(dir);
}

TEST_CASE("distributions stay normalized across random prefixes") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  cfg.order = 3;
  cfg.add_k = 0.05;
  cfg.copy_bias = 0.3;
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);

  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    TokenSeq prefix;
    const size_t len = rng() % 6;
    for (size_t j = 0; j < len; ++j) {
      prefix.push_back(static_cast<TokenId>(rng() % vocab.size()));
    }
    CHECK_NOTHROW(model.next_dist(prefix).validate(1e-9));
  }
}

TEST_CASE("concurrent queries agree with serial results") {
  const Vocab vocab = letters_vocab();
  NGramConfig cfg;
  cfg.order = 3;
  cfg.add_k = 0.1;
  const NGramModel model =
      train_ngram({}, encode_corpus(vocab, fixture_corpus()), vocab, cfg);

  const TokenSeq prefix = {vocab.id("a"), vocab.id("b")};
  const Distribution expected = model.next_dist(prefix);

  std::vector<std::thread> pool;
  std::vector<int> mismatches(4, 0);
  for (int t = 0; t < 4; ++t) {
    pool.emplace_back([&, t] {
      for (int i = 0; i < 500; ++i) {
        if (model.next_dist(prefix).probs != expected.probs) ++mismatches[t];
      }
    });
  }
  for (auto& th : pool) th.join();
  for (int m : mismatches) CHECK(m == 0);
}
