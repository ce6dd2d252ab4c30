#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dip::oracle {

namespace {

void dfs(const SequenceModel& model, TokenSeq& seq, size_t prefix_len,
         double logprob, int max_len, std::vector<EnumeratedSequence>& out) {
  const size_t depth = seq.size() - prefix_len;
  if (depth == static_cast<size_t>(max_len)) {
    out.push_back({TokenSeq(seq.begin() + static_cast<ptrdiff_t>(prefix_len),
                            seq.end()),
                   logprob});
    return;
  }
  const Distribution dist = model.next_dist(seq);
  for (size_t v = 0; v < dist.probs.size(); ++v) {
    const double p = dist.probs[v];
    if (p <= 0.0) continue;
    const double next_lp = logprob + std::log(p);
    if (static_cast<TokenId>(v) == tok::kEos) {
      out.push_back({TokenSeq(seq.begin() + static_cast<ptrdiff_t>(prefix_len),
                              seq.end()),
                     next_lp});
      continue;
    }
    seq.push_back(static_cast<TokenId>(v));
    dfs(model, seq, prefix_len, next_lp, max_len, out);
    seq.pop_back();
  }
}

}  // namespace

std::vector<EnumeratedSequence> enumerate_sequences(const SequenceModel& model,
                                                    const TokenSeq& prefix,
                                                    int max_len) {
  std::vector<EnumeratedSequence> out;
  TokenSeq seq = prefix;
  dfs(model, seq, prefix.size(), 0.0, max_len, out);
  std::sort(out.begin(), out.end(),
            [](const EnumeratedSequence& a, const EnumeratedSequence& b) {
              if (a.logprob != b.logprob) return a.logprob > b.logprob;
              return a.tokens < b.tokens;
            });
  return out;
}

namespace {

std::map<std::string, int> ngram_map(const std::vector<std::string>& tokens,
                                     int n) {
  std::map<std::string, int> grams;
  for (int i = 0; i + n <= static_cast<int>(tokens.size()); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      key += tokens[static_cast<size_t>(i + j)];
      key += '\x1f';
    }
    ++grams[key];
  }
  return grams;
}

}  // namespace

double bleu(const std::vector<std::string>& hyp,
            const std::vector<std::string>& ref) {
  const int effective_n = std::min(4, static_cast<int>(hyp.size()));
  const double weight = 1.0 / static_cast<double>(effective_n);
  double log_sum = 0.0;
  for (int n = 1; n <= effective_n; ++n) {
    const auto hyp_grams = ngram_map(hyp, n);
    const auto ref_grams = ngram_map(ref, n);
    int total = 0;
    int matched = 0;
    for (const auto& [gram, count] : hyp_grams) {
      total += count;
      auto it = ref_grams.find(gram);
      if (it != ref_grams.end()) matched += std::min(count, it->second);
    }
    const double precision =
        total > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                  : 0.0;
    log_sum += weight * std::log(precision > 0.0 ? precision : 1e-9);
  }
  const double ratio =
      static_cast<double>(ref.size()) / static_cast<double>(hyp.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return bp * std::exp(log_sum);
}

double self_bleu(const std::vector<std::vector<std::string>>& candidates) {
  std::vector<double> scores;
  for (size_t i = 0; i < candidates.size(); ++i) {
    for (size_t j = 0; j < candidates.size(); ++j) {
      if (i != j) scores.push_back(bleu(candidates[i], candidates[j]));
    }
  }
  std::sort(scores.begin(), scores.end());
  return std::accumulate(scores.begin(), scores.end(), 0.0) /
         static_cast<double>(scores.size());
}

double ngram_prob(const std::vector<std::vector<std::string>>& corpus,
                  const std::vector<std::string>& vocab, int order,
                  double add_k, const std::vector<std::string>& context,
                  const std::string& token) {
  const double v = static_cast<double>(vocab.size());
  const double alpha = add_k * v;

  // Recount from scratch: per context length, joined-string keys.
  auto count_of = [&](const std::vector<std::string>& ctx,
                      const std::string& tok) {
    double c = 0.0;
    for (const auto& seq : corpus) {
      for (size_t i = 0; i < seq.size(); ++i) {
        if (seq[i] != tok || i < ctx.size()) continue;
        bool match = true;
        for (size_t j = 0; j < ctx.size(); ++j) {
          if (seq[i - ctx.size() + j] != ctx[j]) {
            match = false;
            break;
          }
        }
        if (match) c += 1.0;
      }
    }
    return c;
  };
  auto total_of = [&](const std::vector<std::string>& ctx) {
    double c = 0.0;
    for (const auto& seq : corpus) {
      for (size_t i = 0; i < seq.size(); ++i) {
        if (i < ctx.size()) continue;
        bool match = true;
        for (size_t j = 0; j < ctx.size(); ++j) {
          if (seq[i - ctx.size() + j] != ctx[j]) {
            match = false;
            break;
          }
        }
        if (match) c += 1.0;
      }
    }
    return c;
  };

  double prob = 1.0 / v;  // uniform base
  const int max_ctx = std::min<int>(order - 1, static_cast<int>(context.size()));
  for (int len = 0; len <= max_ctx; ++len) {
    const std::vector<std::string> ctx(context.end() - len, context.end());
    const double total = total_of(ctx);
    const double den = total + alpha;
    if (den <= 0.0) continue;
    prob = (count_of(ctx, token) + alpha * prob) / den;
  }
  return prob;
}

}  // namespace dip::oracle
