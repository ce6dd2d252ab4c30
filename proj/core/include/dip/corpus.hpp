#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dip/error.hpp"
#include "dip/vocab.hpp"

namespace dip {

/// Half-open token range [start, end) with the trigger index inside it.
struct Span {
  int start = 0;
  int end = 0;
  int trigger = 0;

  int length() const { return end - start; }
  bool contains(int i) const { return i >= start && i < end; }
  bool overlaps(const Span& other) const {
    return start < other.end && other.start < end;
  }
  bool operator==(const Span&) const = default;
};

enum class RelationKind { precondition, temporal_before };

std::string to_string(RelationKind kind);
RelationKind relation_kind_from_string(std::string_view s);

/// One annotated sentence: a target event span, an optional related event
/// span (gold precondition or temporally preceding event), and an optional
/// classification label for ranker training.
struct AnnotatedSentence {
  std::string id;
  std::vector<std::string> tokens;
  Span target;
  std::optional<Span> precondition;
  std::optional<bool> label;
  RelationKind kind = RelationKind::precondition;
};

/// Throws AnnotationError when spans overlap, fall outside the sentence, or
/// a trigger index escapes its span.
void validate(const AnnotatedSentence& sentence);

/// Masked-sentence instance: input holds exactly one [BLANK] and one
/// <event>..</event> marked target (optionally followed by a trailing
/// control code `<E> trigger`); output holds the removed clause with the
/// related trigger wrapped in <pre>..</pre>. Output is empty at inference.
struct InfillingInstance {
  std::vector<std::string> input_tokens;
  std::vector<std::string> output_tokens;

  bool has_control_code() const;
  /// Trigger carried by the trailing control code, if any.
  std::optional<std::string> control_trigger() const;
};

/// Reduced target context paired with the gold related-event trigger.
struct TriggerPairInstance {
  std::vector<std::string> reduced_context;
  std::string precondition_trigger;
  int window = 0;
};

/// Parameters of the synthetic templated-grammar corpus.
struct SyntheticCorpusSpec {
  int num_target_types = 5;
  int preconditions_per_target = 4;
  int templates_per_pair = 3;
  int vocab_size = 200;
  uint64_t seed = 0;
};

enum class Split { train, dev, test };

std::string to_string(Split split);

/// Deterministic 8:1:1 assignment by FNV-1a hash of the record id.
Split split_of(std::string_view id);

/// Masks the related-event span with one [BLANK], wraps the target trigger
/// in <event> markers, and returns the removed clause (trigger wrapped in
/// <pre> markers) as the generation target. With `with_control_code` the
/// input additionally ends in `<E> trigger`.
///
/// Records without a gold span are accepted only when `blank_position`
/// supplies the insertion point; the output is then empty (inference mode).
InfillingInstance build_infilling_instance(
    const AnnotatedSentence& sentence, bool with_control_code,
    std::optional<int> blank_position = std::nullopt);

/// Substitutes `output_tokens` back into the instance's [BLANK], stripping
/// all markers. Inverse of build_infilling_instance on the token level.
std::vector<std::string> reconstruct_sentence(const InfillingInstance& inst);

/// Target trigger plus up to `window` tokens on each side, clipped at the
/// sentence boundaries. window must be one of {0, 3, 5}.
TriggerPairInstance build_trigger_pair(const AnnotatedSentence& sentence,
                                       int window);

/// Deterministic synthetic corpus. Emits, per target type:
///   - generation records (label null, kind=precondition), one precondition
///     trigger of the target oversampled 4x so greedy decoders concentrate;
///   - a permissive superset of temporally-preceding records
///     (kind=temporal_before) for pretraining;
///   - labeled classifier records: positives reuse valid pairs, negatives
///     pair the target with same-corpus non-precondition triggers.
std::vector<AnnotatedSentence> synth_corpus(const SyntheticCorpusSpec& spec);

/// Tokens with any reserved special-token strings removed.
std::vector<std::string> strip_markers(const std::vector<std::string>& tokens);

// --- JSONL serialization -------------------------------------------------
//
// One record per line:
//   {"id": str, "tokens": [str],
//    "target": {"start": int, "end": int, "trigger": int},
//    "precondition": {...} | null, "label": bool | null,
//    "kind": "precondition" | "temporal_before"}

std::string sentence_to_json(const AnnotatedSentence& s);
AnnotatedSentence sentence_from_json(const std::string& line);

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<AnnotatedSentence>& sentences);

/// Throws ValidationError naming the first offending line; every record is
/// span-validated on load.
std::vector<AnnotatedSentence> read_jsonl(const std::filesystem::path& path);

}  // namespace dip
