#pragma once

#include <set>
#include <span>
#include <vector>

#include "dip/candidate.hpp"
#include "dip/corpus.hpp"
#include "dip/distribution.hpp"
#include "dip/model.hpp"
#include "dip/rng.hpp"

namespace dip {

struct DecodeConfig {
  int max_len = 16;
  int beam_width = 10;
  double nucleus_p = 0.9;
  /// Repetition penalty; logits of penalized tokens are divided by lambda.
  double lambda = 1.2;
  uint64_t seed = 0;
  /// Beam score = logprob / len^alpha. Off (0) by default.
  double length_norm_alpha = 0.0;

  void validate() const;
};

/// One beam hypothesis. `tokens` is the continuation only (prefix excluded,
/// <eos> stripped); `logprob` includes the <eos> step when one was emitted.
struct Hypothesis {
  TokenSeq tokens;
  double logprob = 0.0;
  bool finished = false;

  double score(double alpha) const;
};

/// Triggers generated in previous RPS iterations. Ordered so that iteration
/// over the set is deterministic.
struct PenaltyState {
  std::set<TokenId> penalized;

  bool contains(TokenId id) const { return penalized.count(id) > 0; }
  void add(TokenId id) { penalized.insert(id); }
};

/// Deterministic beam search over any sequence model. Returns up to
/// `beam_width` finished hypotheses (ended with <eos> or at max_len) sorted
/// by score; ties broken by lexicographically smaller token-id sequence.
std::vector<Hypothesis> beam_search(const SequenceModel& model,
                                    std::span<const TokenId> prefix,
                                    const DecodeConfig& config);

/// Keeps the minimal set of highest-probability tokens whose cumulative
/// mass reaches p (ties broken by smaller token id) and renormalizes over
/// it; all other entries become zero.
Distribution nucleus_truncate(const Distribution& dist, double p);

/// Penalized softmax: p_i = exp(x_i / d_i) / sum_j exp(x_j / d_j) where
/// d_i = lambda for penalized tokens and 1 otherwise. Entries with
/// -infinity logits keep probability zero.
Distribution penalized_dist(std::span<const double> logits,
                            const PenaltyState& penalty, double lambda);

/// Iterative repetition-penalized sampling over a plain infilling instance
/// (no control code). Each iteration nucleus-samples one clause; at the
/// trigger position (the first content token after <pre>) the penalty over
/// previously generated triggers is applied to the model's log probabilities
/// before nucleus truncation, and the sampled trigger joins the penalty set
/// for later iterations. Candidates that never emit <pre> are flagged
/// malformed and do not extend the penalty set.
std::vector<Candidate> rps_generate(const SequenceModel& model,
                                    const InfillingInstance& instance,
                                    int num_iterations,
                                    const DecodeConfig& config, Rng& rng);

}  // namespace dip
