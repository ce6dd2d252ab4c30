#pragma once

#include <stdexcept>
#include <string>

namespace dip {

/// Base class for all library failures.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed span annotations (overlapping spans, trigger outside span, ...).
struct AnnotationError : Error {
  using Error::Error;
};

/// A record required for the requested mode is missing (e.g. no gold span).
struct MissingGoldError : Error {
  using Error::Error;
};

/// Invalid configuration value (bad window, bad flag combination, ...).
struct ConfigError : Error {
  using Error::Error;
};

/// Token not present in the model vocabulary.
struct VocabError : Error {
  using Error::Error;
};

/// Training cannot proceed (empty corpus, single-class labels, ...).
struct TrainingError : Error {
  using Error::Error;
};

/// Corrupted or version-mismatched model/serialization payload.
struct FormatError : Error {
  using Error::Error;
};

/// Input data fails validation (bad records, ragged candidate sets, ...).
struct ValidationError : Error {
  using Error::Error;
};

/// A synthetic corpus spec that cannot be satisfied (vocab too small, ...).
struct InfeasibleSpecError : Error {
  using Error::Error;
};

}  // namespace dip
