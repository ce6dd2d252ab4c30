#include "dip/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dip/error.hpp"

namespace dip {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Absorbs double-representation error in cumulative-mass comparisons
/// (e.g. 0.5 + 0.3 sits one ulp under the literal 0.8).
constexpr double kMassTol = 1e-12;

}  // namespace

void DecodeConfig::validate() const {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  if (beam_width < 1) throw ConfigError("beam_width must be >= 1");
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
    throw ConfigError("nucleus_p must lie in (0, 1]");
  }
  if (lambda < 1.0) throw ConfigError("lambda must be >= 1");
  if (length_norm_alpha < 0.0) throw ConfigError("length_norm_alpha must be >= 0");
}

double Hypothesis::score(double alpha) const {
  if (alpha == 0.0) return logprob;
  const double len = static_cast<double>(std::max<size_t>(1, tokens.size()));
  return logprob / std::pow(len, alpha);
}

namespace {

/// Score-descending order; ties go to the lexicographically smaller
/// token-id sequence so rankings are reproducible everywhere.
struct HypothesisBetter {
  double alpha;
  bool operator()(const Hypothesis& a, const Hypothesis& b) const {
    const double sa = a.score(alpha);
    const double sb = b.score(alpha);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  }
};

}  // namespace

std::vector<Hypothesis> beam_search(const SequenceModel& model,
                                    std::span<const TokenId> prefix,
                                    const DecodeConfig& config) {
  config.validate();
  const HypothesisBetter better{config.length_norm_alpha};
  const size_t k = static_cast<size_t>(config.beam_width);

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  TokenSeq seq(prefix.begin(), prefix.end());
  for (int step = 0; step < config.max_len && !live.empty(); ++step) {
    // All expansions, <eos> included, compete for the k beam slots; this is
    // what makes beam width 1 coincide with greedy decoding.
    std::vector<Hypothesis> pool;
    for (const Hypothesis& hyp : live) {
      seq.resize(prefix.size());
      seq.insert(seq.end(), hyp.tokens.begin(), hyp.tokens.end());
      const Distribution dist = model.next_dist(seq);
      for (size_t v = 0; v < dist.probs.size(); ++v) {
        const double p = dist.probs[v];
        if (p <= 0.0) continue;
        Hypothesis next{hyp.tokens, hyp.logprob + std::log(p),
                        static_cast<TokenId>(v) == tok::kEos};
        if (!next.finished) next.tokens.push_back(static_cast<TokenId>(v));
        pool.push_back(std::move(next));
      }
    }
    std::sort(pool.begin(), pool.end(), better);
    if (pool.size() > k) pool.resize(k);
    live.clear();
    for (Hypothesis& hyp : pool) {
      (hyp.finished ? finished : live).push_back(std::move(hyp));
    }
  }

  // Anything still alive ran into max_len and cannot be extended.
  for (Hypothesis& hyp : live) {
    hyp.finished = true;
    finished.push_back(std::move(hyp));
  }

  std::sort(finished.begin(), finished.end(), better);
  if (finished.size() > k) finished.resize(k);
  return finished;
}

Distribution nucleus_truncate(const Distribution& dist, double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("nucleus p must lie in (0, 1]");

  std::vector<TokenId> order(dist.probs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<TokenId>(i);
  std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    const double pa = dist.probs[static_cast<size_t>(a)];
    const double pb = dist.probs[static_cast<size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;
  });

  std::vector<TokenId> kept;
  size_t positive = 0;
  for (double q : dist.probs) {
    if (q > 0.0) ++positive;
  }
  double mass = 0.0;
  for (TokenId id : order) {
    const double q = dist.probs[static_cast<size_t>(id)];
    if (q <= 0.0) break;
    kept.push_back(id);
    mass += q;
    if (mass + kMassTol >= p) break;
  }

  if (kept.size() == positive) return dist;  // full support, already normalized

  Distribution out;
  out.probs.assign(dist.probs.size(), 0.0);
  for (TokenId id : kept) {
    out.probs[static_cast<size_t>(id)] = dist.probs[static_cast<size_t>(id)] / mass;
  }
  return out;
}

Distribution penalized_dist(std::span<const double> logits,
                            const PenaltyState& penalty, double lambda) {
  if (lambda < 1.0) throw ConfigError("lambda must be >= 1");

  std::vector<double> scaled(logits.size());
  double max_logit = -kInf;
  for (size_t i = 0; i < logits.size(); ++i) {
    const double x = logits[i];
    if (std::isnan(x) || x == kInf) {
      throw ConfigError("logits must be finite or -infinity");
    }
    const double y = penalty.contains(static_cast<TokenId>(i)) ? x / lambda : x;
    scaled[i] = y;
    max_logit = std::max(max_logit, y);
  }
  if (max_logit == -kInf) {
    throw ValidationError("all logits are -infinity, nothing to normalize");
  }

  Distribution out;
  out.probs.resize(scaled.size());
  double sum = 0.0;
  for (size_t i = 0; i < scaled.size(); ++i) {
    const double e = scaled[i] == -kInf ? 0.0 : std::exp(scaled[i] - max_logit);
    out.probs[i] = e;
    sum += e;
  }
  for (double& q : out.probs) q /= sum;
  return out;
}

std::vector<Candidate> rps_generate(const SequenceModel& model,
                                    const InfillingInstance& instance,
                                    int num_iterations,
                                    const DecodeConfig& config, Rng& rng) {
  config.validate();
  if (num_iterations < 1) throw ConfigError("num_iterations must be >= 1");
  if (instance.has_control_code()) {
    throw ConfigError("rps_generate runs on the plain infilling model; "
                      "the instance must not carry a control code");
  }

  const Vocab& vocab = model.vocab();
  TokenSeq base = vocab.encode(instance.input_tokens);
  base.push_back(tok::kSep);

  PenaltyState penalty;
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<size_t>(num_iterations));

  for (int iter = 0; iter < num_iterations; ++iter) {
    TokenSeq seq = base;
    TokenSeq generated;
    TokenId trigger = -1;
    bool awaiting_trigger = false;
    bool hit_eos = false;
    double logprob = 0.0;

    for (int step = 0; step < config.max_len; ++step) {
      const Distribution dist = model.next_dist(seq);
      TokenId sampled;
      if (awaiting_trigger) {
        std::vector<double> logits(dist.probs.size());
        for (size_t i = 0; i < logits.size(); ++i) {
          logits[i] = dist.probs[i] > 0.0 ? std::log(dist.probs[i]) : -kInf;
        }
        const Distribution pen = penalized_dist(logits, penalty, config.lambda);
        sampled = sample_token(nucleus_truncate(pen, config.nucleus_p), rng);
        if (!vocab.is_special(sampled)) {
          trigger = sampled;
          awaiting_trigger = false;
        }
      } else {
        sampled = sample_token(nucleus_truncate(dist, config.nucleus_p), rng);
      }

      logprob += std::log(dist.probs[static_cast<size_t>(sampled)]);
      if (sampled == tok::kEos) {
        hit_eos = true;
        break;
      }
      generated.push_back(sampled);
      seq.push_back(sampled);
      if (sampled == tok::kPreOpen && trigger < 0) awaiting_trigger = true;
    }

    Candidate cand;
    cand.origin = Origin::rps;
    cand.text = vocab.decode(generated);
    cand.lm_logprob = logprob;
    cand.truncated = !hit_eos;
    if (trigger >= 0) {
      cand.trigger = vocab.token(trigger);
      cand.trigger_in_text = true;
      penalty.add(trigger);
    } else {
      cand.malformed = true;  // never produced a <pre>-marked trigger
    }
    candidates.push_back(std::move(cand));
  }
  return candidates;
}

}  // namespace dip
