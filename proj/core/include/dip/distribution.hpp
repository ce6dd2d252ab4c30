#pragma once

#include <cstddef>
#include <vector>

#include "dip/rng.hpp"
#include "dip/vocab.hpp"

namespace dip {

/// Probability vector over the vocabulary. Entries are non-negative and sum
/// to 1 within 1e-9 for every distribution a model returns.
struct Distribution {
  std::vector<double> probs;

  size_t support() const { return probs.size(); }

  double operator[](TokenId id) const { return probs[static_cast<size_t>(id)]; }

  /// Throws ValidationError unless entries are >= 0 and sum to 1 within tol.
  void validate(double tol = 1e-9) const;

  static Distribution point_mass(TokenId id, size_t size);

  /// Normalizes non-negative weights; throws ValidationError on zero mass.
  static Distribution from_weights(std::vector<double> weights);
};

/// Categorical draw: walks the cumulative sum in token-id order and returns
/// the smallest id whose cumulative probability exceeds the uniform draw.
TokenId sample_token(const Distribution& dist, Rng& rng);

}  // namespace dip
