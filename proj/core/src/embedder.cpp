#include "dip/embedder.hpp"

#include <cmath>

#include "dip/error.hpp"

namespace dip {

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ValidationError("cosine over vectors of different dimension");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

CooccurrenceEmbedder::CooccurrenceEmbedder(const NGramModel& model)
    : vocab_(model.vocab()) {
  if (model.order() < 2) {
    throw ConfigError("co-occurrence embedder needs a model of order >= 2");
  }
  const size_t v = vocab_.size();
  rows_.assign(v, std::vector<double>(v, 0.0));
  // counts()[1] maps one-token contexts to successor counts.
  for (const auto& [ctx, succ] : model.counts()[1]) {
    const size_t w = static_cast<size_t>(ctx[0]);
    for (const auto& [id, c] : succ) {
      rows_[w][static_cast<size_t>(id)] += c;
      rows_[static_cast<size_t>(id)][w] += c;
    }
  }
  // Log-scale so a handful of frequent neighbors (determiners and the like)
  // does not flatten every pairwise cosine toward 1.
  for (auto& row : rows_) {
    for (double& x : row) x = std::log1p(x);
  }
}

std::vector<double> CooccurrenceEmbedder::embed(
    const std::vector<std::string>& tokens) const {
  std::vector<double> out(vocab_.size(), 0.0);
  int used = 0;
  for (const auto& t : tokens) {
    if (tok::is_special_string(t)) continue;
    const auto id = vocab_.find(t);
    if (!id) continue;
    const auto& row = rows_[static_cast<size_t>(*id)];
    for (size_t i = 0; i < out.size(); ++i) out[i] += row[i];
    ++used;
  }
  if (used > 0) {
    for (double& x : out) x /= static_cast<double>(used);
  }
  return out;
}

}  // namespace dip
