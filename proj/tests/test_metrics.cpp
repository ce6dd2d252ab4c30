#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dip/embedder.hpp"
#include "dip/metrics.hpp"
#include "dip/rng.hpp"
#include "oracles.hpp"

using namespace dip;

namespace {

std::vector<std::string> words(const std::string& joined) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : joined) {
    if (ch == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> random_sentences(Rng& rng, size_t count,
                                                       size_t vocab,
                                                       size_t min_len,
                                                       size_t max_len) {
  std::vector<std::vector<std::string>> out;
  for (size_t i = 0; i < count; ++i) {
    const size_t len = min_len + rng() % (max_len - min_len + 1);
    std::vector<std::string> sentence;
    for (size_t j = 0; j < len; ++j) {
      sentence.push_back("w" + std::to_string(rng() % vocab));
    }
    out.push_back(std::move(sentence));
  }
  return out;
}

PairScorer exact_match_scorer() {
  return [](std::span<const std::string> a, std::span<const std::string> b) {
    return std::equal(a.begin(), a.end(), b.begin(), b.end()) ? 1.0 : 0.0;
  };
}

}  // namespace

TEST_CASE("sentence bleu basics") {
  SUBCASE("identity scores one") {
    const auto s = words("a b c d");
    CHECK(bleu(s, s) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("reversed bigram collapses to the epsilon floor") {
    const double score = bleu(words("a b"), words("b a"));
    // p1 = 1, p2 floored: sqrt(1e-9)
    CHECK(score == doctest::Approx(std::sqrt(1e-9)).epsilon(1e-9));
    CHECK(score < 1e-4);
  }
  SUBCASE("disjoint vocabulary scores almost zero") {
    CHECK(bleu(words("a b c"), words("x y z")) < 1e-6);
  }
  SUBCASE("brevity penalty punishes short hypotheses") {
    const auto ref = words("a b c d e f");
    const double short_score = bleu(words("a b c"), ref);
    const double full_score = bleu(ref, ref);
    CHECK(short_score < full_score);
    // BP = exp(1 - 6/3) = exp(-1); precisions are exact, so the ratio is BP.
    CHECK(short_score ==
          doctest::Approx(std::exp(-1.0) *
                          std::exp((std::log(1.0) * 3) / 3.0)));
  }
  SUBCASE("empty arguments are rejected") {
    CHECK_THROWS_AS(bleu({}, words("a")), ConfigError);
    CHECK_THROWS_AS(bleu(words("a"), {}), ConfigError);
  }
  SUBCASE("short hypothesis caps the n-gram order") {
    // |hyp| = 1: only unigram precision counts.
    CHECK(bleu(words("a"), words("a")) == doctest::Approx(1.0));
  }
}

TEST_CASE("self_bleu degenerate sets") {
  SUBCASE("ten identical sentences score one") {
    std::vector<std::vector<std::string>> set(10, words("a b c d"));
    CHECK(self_bleu(set) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(self_bleu(set, {}, SelfBleuMode::vs_rest) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("pairwise-disjoint vocabularies score almost zero") {
    std::vector<std::vector<std::string>> set = {
        words("a b c"), words("d e f"), words("g h i")};
    CHECK(self_bleu(set) < 1e-6);
  }
  SUBCASE("fewer than two candidates is undefined") {
    CHECK_THROWS_AS(self_bleu({words("a b")}), ValidationError);
  }
}

TEST_CASE("self_bleu equals the brute-force oracle exactly") {
  Rng rng(44);
  for (int trial = 0; trial < 100; ++trial) {
    const auto set = random_sentences(rng, 5, 6, 2, 7);
    const double mine = self_bleu(set);
    const double reference = oracle::self_bleu(set);
    CHECK(mine == reference);  // bit-for-bit

    // Permutation invariance, also bit-for-bit.
    auto shuffled = set;
    for (size_t i = shuffled.size(); i > 1; --i) {
      std::swap(shuffled[i - 1], shuffled[rng() % i]);
    }
    CHECK(self_bleu(shuffled) == mine);
  }
}

TEST_CASE("vs-rest mode uses multi-reference clipping") {
  const std::vector<std::vector<std::string>> set = {
      words("a b c d"), words("a b x y"), words("c d x y")};
  const double pairwise = self_bleu(set, {}, SelfBleuMode::pairwise);
  const double vs_rest = self_bleu(set, {}, SelfBleuMode::vs_rest);
  // Multi-reference clipping can only help each hypothesis.
  CHECK(vs_rest >= pairwise);
  CHECK(vs_rest <= 1.0);

  SUBCASE("mode parsing") {
    CHECK(self_bleu_mode_from_string("pairwise") == SelfBleuMode::pairwise);
    CHECK(self_bleu_mode_from_string("vs-rest") == SelfBleuMode::vs_rest);
    CHECK_THROWS_AS(self_bleu_mode_from_string("other"), ConfigError);
  }
}

TEST_CASE("self_similarity over ordered pairs") {
  SUBCASE("identical candidates with a cosine scorer score one") {
    std::vector<std::vector<std::string>> set(4, words("a b"));
    const PairScorer scorer = [](std::span<const std::string> a,
                                 std::span<const std::string> b) {
      std::vector<double> va = {static_cast<double>(a.size()), 1.0};
      std::vector<double> vb = {static_cast<double>(b.size()), 1.0};
      return cosine(va, vb);
    };
    CHECK(self_similarity(set, scorer) == doctest::Approx(1.0));
  }
  SUBCASE("orthogonal embeddings score zero") {
    std::vector<std::vector<std::string>> set = {words("a"), words("b")};
    const PairScorer scorer = [](std::span<const std::string> a,
                                 std::span<const std::string> b) {
      auto one_hot = [](std::span<const std::string> s) {
        return std::vector<double>{s.front() == "a" ? 1.0 : 0.0,
                                   s.front() == "b" ? 1.0 : 0.0};
      };
      return cosine(one_hot(a), one_hot(b));
    };
    CHECK(self_similarity(set, scorer) == doctest::Approx(0.0));
  }
  SUBCASE("four-candidate fixture equals the 12-pair brute force") {
    const std::vector<std::vector<std::string>> set = {
        words("a b"), words("a c"), words("b c"), words("d d")};
    const PairScorer scorer = exact_match_scorer();
    double sum = 0.0;
    for (size_t i = 0; i < set.size(); ++i) {
      for (size_t j = 0; j < set.size(); ++j) {
        if (i != j) sum += scorer(set[i], set[j]);
      }
    }
    CHECK(self_similarity(set, scorer) == doctest::Approx(sum / 12.0));
  }
}

TEST_CASE("duplicating a candidate never lowers self_bleu") {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    auto set = random_sentences(rng, 5, 8, 3, 6);
    const double before = self_bleu(set);
    set[1] = set[0];  // replace one candidate with a copy of another
    const double after = self_bleu(set);
    CHECK(after + 1e-12 >= before);
  }
}

TEST_CASE("diversity report aggregates per-target metrics") {
  const PairScorer scorer = exact_match_scorer();

  CandidateSetView t1;
  t1.id = "t1";
  t1.texts = {words("<pre> a </pre> b"), words("a b"), words("c d")};
  CandidateSetView t2;
  t2.id = "t2";
  t2.texts = {words("x y"), words("x y"), words("x y")};

  SUBCASE("markers are stripped before scoring") {
    const DiversityReport report = diversity_report({t1}, scorer);
    // After stripping, texts 0 and 1 are identical.
    CHECK(report.per_target[0].self_sim == doctest::Approx(2.0 / 6.0));
  }
  SUBCASE("corpus mean is the arithmetic mean of targets") {
    const DiversityReport report = diversity_report({t1, t2}, scorer);
    CHECK(report.num_targets == 2);
    CHECK(report.mean_self_bleu ==
          doctest::Approx((report.per_target[0].self_bleu +
                           report.per_target[1].self_bleu) /
                          2.0));
    CHECK(report.per_target[1].self_bleu == doctest::Approx(1.0));
  }
  SUBCASE("single target mean equals that target") {
    const DiversityReport report = diversity_report({t2}, scorer);
    CHECK(report.mean_self_bleu ==
          doctest::Approx(report.per_target[0].self_bleu));
    CHECK(report.mean_self_sim ==
          doctest::Approx(report.per_target[0].self_sim));
  }
  SUBCASE("ragged counts need the explicit flag") {
    CandidateSetView ragged;
    ragged.id = "t3";
    ragged.texts = {words("a b"), words("c d")};
    CHECK_THROWS_AS(diversity_report({t1, ragged}, scorer), ValidationError);
    ReportConfig config;
    config.allow_ragged = true;
    CHECK_NOTHROW(diversity_report({t1, ragged}, scorer, config));
  }
  SUBCASE("sets below two candidates always fail") {
    CandidateSetView solo;
    solo.id = "t4";
    solo.texts = {words("a b")};
    ReportConfig config;
    config.allow_ragged = true;
    CHECK_THROWS_AS(diversity_report({solo}, scorer, config), ValidationError);
  }
}

TEST_CASE("report serialization shape") {
  const PairScorer scorer = exact_match_scorer();
  CandidateSetView t;
  t.id = "only";
  t.texts = {words("a b"), words("c d")};
  const DiversityReport report = diversity_report({t}, scorer);

  const std::string json_text = report_to_json(report);
  CHECK(json_text.find("\"per_target\"") != std::string::npos);
  CHECK(json_text.find("\"mean\"") != std::string::npos);
  CHECK(json_text.find("\"config\"") != std::string::npos);

  const std::string md =
      reports_to_markdown({{"beam", report}, {"dip", report}});
  CHECK(md.find("| beam |") != std::string::npos);
  CHECK(md.find("| dip |") != std::string::npos);
  CHECK(std::count(md.begin(), md.end(), '\n') == 4);  // header + rule + 2 rows
}

TEST_CASE("cosine handles zero vectors") {
  const std::vector<double> zero = {0.0, 0.0};
  const std::vector<double> unit = {1.0, 0.0};
  CHECK(cosine(zero, unit) == 0.0);
  CHECK(cosine(unit, unit) == doctest::Approx(1.0));
  const std::vector<double> bad = {1.0};
  CHECK_THROWS_AS(cosine(bad, unit), ValidationError);
}
