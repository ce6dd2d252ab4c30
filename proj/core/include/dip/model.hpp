#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dip/distribution.hpp"
#include "dip/vocab.hpp"

namespace dip {

/// Abstract autoregressive next-token distribution provider. Implementations
/// are immutable once constructed; all queries are const and reentrant.
class SequenceModel {
 public:
  virtual ~SequenceModel() = default;

  virtual const Vocab& vocab() const = 0;

  /// Normalized distribution over the vocabulary given the prefix.
  /// Throws VocabError when the prefix holds an out-of-vocabulary id.
  virtual Distribution next_dist(std::span<const TokenId> prefix) const = 0;

  virtual std::string kind() const = 0;
};

/// Sum of per-step log probabilities of `continuation` after `prefix`.
/// Returns -infinity when any step has probability zero, so rankers can
/// order impossible continuations instead of crashing on them.
double sequence_logprob(const SequenceModel& model,
                        std::span<const TokenId> prefix,
                        std::span<const TokenId> continuation);

/// Fixed lookup-table model for exact decoding oracles. The table maps a
/// context (the last `order` prefix tokens, shorter near the start) to a
/// full next-token distribution.
class ExplicitTableModel : public SequenceModel {
 public:
  ExplicitTableModel(Vocab vocab, int order,
                     std::map<TokenSeq, Distribution> table);

  /// Convenience for fixtures: contexts and distributions given as words.
  static ExplicitTableModel from_words(
      const std::vector<std::string>& words, int order,
      const std::map<std::vector<std::string>, std::map<std::string, double>>&
          table);

  const Vocab& vocab() const override { return vocab_; }
  Distribution next_dist(std::span<const TokenId> prefix) const override;
  std::string kind() const override { return "explicit_table"; }

  int order() const { return order_; }
  const std::map<TokenSeq, Distribution>& table() const { return table_; }

 private:
  Vocab vocab_;
  int order_;
  std::map<TokenSeq, Distribution> table_;
};

struct NGramConfig {
  int order = 3;
  double add_k = 0.1;
  /// Control-code copy bias (gamma). While the code's trigger is still
  /// unemitted after the last <sep>, next_dist returns
  /// (1-gamma) * ngram + gamma * point_mass(trigger).
  double copy_bias = 0.3;
  /// Weight of the pretraining corpus when blending counts.
  double pretrain_weight = 0.5;
  /// Optional fixed per-order mixture [w_order, ..., w_1, w_uniform],
  /// must sum to 1. When unset, count-conditioned interpolation is used:
  /// each order contributes total/(total + add_k*|V|) and cedes the rest
  /// to the next lower order, bottoming out at the uniform distribution.
  /// The count-conditioned default collapses to exact maximum-likelihood
  /// conditionals when add_k = 0 and the context was seen in training.
  std::optional<std::vector<double>> interpolation_weights;

  void validate() const;
};

/// Smoothed n-gram model with weighted-count two-phase training and the
/// control-code copy mechanism.
class NGramModel : public SequenceModel {
 public:
  /// Per-order count tables; counts_[j-1] maps a (j-1)-token context to
  /// weighted successor counts.
  using ContextCounts = std::map<TokenSeq, std::map<TokenId, double>>;

  NGramModel(Vocab vocab, NGramConfig config,
             std::vector<ContextCounts> counts);

  const Vocab& vocab() const override { return vocab_; }
  Distribution next_dist(std::span<const TokenId> prefix) const override;
  std::string kind() const override { return "ngram"; }

  int order() const { return config_.order; }
  const NGramConfig& config() const { return config_; }
  const std::vector<ContextCounts>& counts() const { return counts_; }

  /// Plain smoothed n-gram distribution, copy bias ignored.
  Distribution ngram_dist(std::span<const TokenId> prefix) const;

 private:
  Distribution adaptive_dist(std::span<const TokenId> prefix) const;
  Distribution static_dist(std::span<const TokenId> prefix) const;

  Vocab vocab_;
  NGramConfig config_;
  std::vector<ContextCounts> counts_;
  std::vector<std::map<TokenSeq, double>> totals_;
};

/// Order-wise blend of the two corpora:
///   counts = pretrain_weight * counts(pretrain)
///          + (1 - pretrain_weight) * counts(finetune).
/// Throws TrainingError on an empty finetune corpus and VocabError on ids
/// outside the vocabulary.
NGramModel train_ngram(const std::vector<TokenSeq>& pretrain_corpus,
                       const std::vector<TokenSeq>& finetune_corpus,
                       Vocab vocab, const NGramConfig& config);

// --- Persistence -----------------------------------------------------------
//
// A model directory holds manifest.json (format version, kind, order, vocab,
// hyperparameters) and payload.json (the counts or table). Doubles are
// serialized with shortest round-trip notation, so load(persist(m)) agrees
// with m bit-exactly on every context.

inline constexpr int kModelFormatVersion = 1;

void persist(const SequenceModel& model, const std::filesystem::path& dir);

/// Throws FormatError (naming the manifest problem) on corrupted or
/// version-mismatched payloads; never yields a partial model.
std::unique_ptr<SequenceModel> load_model(const std::filesystem::path& dir);

}  // namespace dip
