#include "dip/distribution.hpp"

#include <cmath>
#include <numeric>

#include "dip/error.hpp"

namespace dip {

void Distribution::validate(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) {
      throw ValidationError("distribution entry is negative or NaN");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > tol) {
    throw ValidationError("distribution mass " + std::to_string(sum) +
                          " differs from 1 beyond tolerance");
  }
}

Distribution Distribution::point_mass(TokenId id, size_t size) {
  Distribution d;
  d.probs.assign(size, 0.0);
  d.probs.at(static_cast<size_t>(id)) = 1.0;
  return d;
}

Distribution Distribution::from_weights(std::vector<double> weights) {
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("negative weight");
    sum += w;
  }
  if (sum <= 0.0) throw ValidationError("cannot normalize zero total mass");
  for (double& w : weights) w /= sum;
  Distribution d;
  d.probs = std::move(weights);
  return d;
}

TokenId sample_token(const Distribution& dist, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  TokenId last_nonzero = -1;
  for (size_t i = 0; i < dist.probs.size(); ++i) {
    const double p = dist.probs[i];
    if (p <= 0.0) continue;
    last_nonzero = static_cast<TokenId>(i);
    cum += p;
    if (u < cum) return last_nonzero;
  }
  if (last_nonzero < 0) {
    throw ValidationError("cannot sample from all-zero distribution");
  }
  return last_nonzero;  // guards the u ~ 1, cum ~ 1-eps rounding corner
}

}  // namespace dip
