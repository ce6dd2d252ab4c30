#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dip/candidate.hpp"
#include "dip/corpus.hpp"
#include "dip/decode.hpp"
#include "dip/embedder.hpp"
#include "dip/model.hpp"
#include "dip/ranker.hpp"

namespace dip {

struct SamplerConfig {
  int window = 0;
  /// Number of triggers sampled per target (n).
  int num_triggers = 20;
  /// Beam width reserved for multi-token trigger decoding. Triggers are
  /// single tokens here, so ranking reads the exact next-token distribution
  /// and this only gets validated.
  int trigger_beam = 1;

  void validate() const;
};

struct TriggerSample {
  std::vector<std::string> triggers;
  /// Fewer tokens with nonzero probability than requested.
  bool shortfall = false;
};

/// Top-n distinct trigger tokens by probability of the single-token
/// continuation after `reduced_context <sep>`. Descending probability,
/// token-id tie-break; special tokens excluded.
TriggerSample sample_triggers(const SequenceModel& sampler,
                              const std::vector<std::string>& reduced_context,
                              const SamplerConfig& config);

enum class CandidateDecode { nucleus, beam };

/// Appends `<E> trigger <sep>` to the instance input and decodes one clause.
Candidate generate_candidate(const SequenceModel& generator,
                             const InfillingInstance& instance,
                             const std::string& trigger,
                             const DecodeConfig& config, Rng& rng,
                             CandidateDecode mode = CandidateDecode::nucleus);

struct FilterStats {
  double mu = 0.0;
  double sigma = 0.0;  // population standard deviation
  double tau = 0.0;    // mu + sigma
  int dropped = 0;     // removed by the similarity walk
};

/// Greedy keep-walk over a pairwise similarity matrix: the first candidate
/// is always kept; each later one is kept iff its maximum similarity to the
/// kept set is strictly below tau = mu + sigma of all input pairs. Returns
/// kept indices (in order) and the stats. `tau_override` replaces the
/// computed threshold (+infinity disables dropping).
std::pair<std::vector<int>, FilterStats> similarity_filter_walk(
    const std::vector<std::vector<double>>& sim,
    std::optional<double> tau_override = std::nullopt);

struct FilterOutcome {
  /// Indices into the ranked input surviving the walk and the top-k cut.
  std::vector<int> kept_indices;
  /// Unset when fewer than two candidates made filtering meaningless.
  std::optional<FilterStats> stats;
};

/// Embeds every candidate (sets Candidate::embedding in place), runs the
/// similarity walk, and keeps the `top_k` highest-ranked survivors.
/// Fewer than two candidates pass through unfiltered.
FilterOutcome redundancy_filter(std::vector<Candidate>& ranked,
                                const Embedder& embedder, int top_k,
                                std::optional<double> tau_override = std::nullopt);

/// Attaches rank scores and stable-sorts candidates by score descending
/// (equal scores keep their original order).
std::vector<Candidate> rerank(const RankScorer& ranker,
                              const InfillingInstance& instance,
                              std::vector<Candidate> candidates);

struct PostConfig {
  int top_k = 10;
  bool use_ranker = true;
  bool use_filter = true;
  std::optional<double> tau_override;

  void validate() const;
};

struct PipelineModels {
  const SequenceModel* sampler = nullptr;
  const SequenceModel* generator = nullptr;
  const RankScorer* ranker = nullptr;
  const Embedder* embedder = nullptr;
};

/// One generation run for one target. `candidates` is the pre-filter
/// ranking with kept flags marking the final top-k output; `triggers` is
/// the stage-1 list, kept for audit.
struct RunRecord {
  std::string id;
  std::string strategy;
  std::vector<std::string> triggers;
  std::vector<Candidate> candidates;
  std::optional<FilterStats> filter;

  // Diagnostics; not part of the serialized schema.
  bool sampler_shortfall = false;

  std::vector<Candidate> kept() const;
};

struct RpsConfig {
  int num_iterations = 10;
};

/// The three-stage pipeline: sample triggers, generate one candidate per
/// trigger, re-rank, similarity-filter, keep top k.
RunRecord run_dip(const PipelineModels& models, const AnnotatedSentence& target,
                  const SamplerConfig& sampler_config,
                  const DecodeConfig& decode_config, const PostConfig& post,
                  Rng& rng);

/// Iterative repetition-penalized sampling without post-processing.
RunRecord run_rps(const PipelineModels& models, const AnnotatedSentence& target,
                  const RpsConfig& rps, const DecodeConfig& decode_config,
                  const PostConfig& post, Rng& rng);

/// RPS generation followed by the same post-processor as run_dip.
RunRecord run_rps_plus_post(const PipelineModels& models,
                            const AnnotatedSentence& target,
                            const RpsConfig& rps,
                            const DecodeConfig& decode_config,
                            const PostConfig& post, Rng& rng);

/// Beam-search baseline over the plain infilling model.
RunRecord run_beam(const PipelineModels& models, const AnnotatedSentence& target,
                   const DecodeConfig& decode_config, const PostConfig& post);

// Run-record JSONL: {"id": str, "strategy": "dip"|"rps"|"beam"|"rps_post",
// "triggers": [str], "candidates": [{"trigger": str, "text": [str],
// "lm_logprob": float, "rank_score": float|null, "kept": bool}],
// "filter": {"mu","sigma","tau","dropped"} | null}
std::string run_record_to_json(const RunRecord& record);
RunRecord run_record_from_json(const std::string& line);

void write_run_records(const std::filesystem::path& path,
                       const std::vector<RunRecord>& records);
std::vector<RunRecord> read_run_records(const std::filesystem::path& path);

}  // namespace dip
