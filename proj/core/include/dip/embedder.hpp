#pragma once

#include <span>
#include <string>
#include <vector>

#include "dip/model.hpp"

namespace dip {

/// Maps a clause (token strings) to a real vector for similarity scoring.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> embed(const std::vector<std::string>& tokens) const = 0;
};

/// Cosine similarity; 0 whenever either vector has zero norm.
double cosine(std::span<const double> a, std::span<const double> b);

/// Reference embedder: token vectors are symmetric bigram co-occurrence
/// rows of a trained n-gram model (e(v)[w] = count(v->w) + count(w->v));
/// a clause embeds as the mean of its content-token vectors. Special
/// tokens and out-of-vocabulary words are skipped.
class CooccurrenceEmbedder : public Embedder {
 public:
  explicit CooccurrenceEmbedder(const NGramModel& model);

  std::vector<double> embed(const std::vector<std::string>& tokens) const override;

 private:
  Vocab vocab_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace dip
