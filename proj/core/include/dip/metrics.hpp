#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dip {

struct BleuConfig {
  int max_n = 4;
  /// Floor for zero n-gram precisions; keeps BLEU defined on short clauses.
  double epsilon = 1e-9;
};

/// Sentence BLEU: geometric mean of clipped n-gram precisions for
/// n = 1..min(max_n, |hyp|) with uniform weights, times the brevity penalty
/// exp(min(0, 1 - |ref|/|hyp|)). Zero precisions are floored at epsilon.
double bleu(std::span<const std::string> hypothesis,
            std::span<const std::string> reference,
            const BleuConfig& config = {});

/// Multi-reference BLEU: clipped counts take the per-n-gram maximum over
/// references; the brevity penalty uses the reference length closest to the
/// hypothesis (ties to the shorter one).
double bleu_multi(std::span<const std::string> hypothesis,
                  const std::vector<std::vector<std::string>>& references,
                  const BleuConfig& config = {});

enum class SelfBleuMode {
  /// Mean of bleu(s_i, s_j) over all ordered pairs i != j.
  pairwise,
  /// Each sentence scored against all others as a multi-reference set,
  /// averaged (the texygen-style variant).
  vs_rest,
};

std::string to_string(SelfBleuMode mode);
SelfBleuMode self_bleu_mode_from_string(std::string_view s);

/// Lower is more diverse. Scores are accumulated in sorted order, so the
/// result is invariant to candidate permutation bit-for-bit. Requires at
/// least two candidates.
double self_bleu(const std::vector<std::vector<std::string>>& candidates,
                 const BleuConfig& config = {},
                 SelfBleuMode mode = SelfBleuMode::pairwise);

using PairScorer = std::function<double(std::span<const std::string>,
                                        std::span<const std::string>)>;

/// Mean pairwise semantic score over ordered pairs i != j; same sorted-order
/// aggregation and >= 2 candidates requirement as self_bleu.
double self_similarity(const std::vector<std::vector<std::string>>& candidates,
                       const PairScorer& scorer);

struct TargetDiversity {
  std::string id;
  double self_bleu = 0.0;
  double self_sim = 0.0;
};

struct DiversityReport {
  std::vector<TargetDiversity> per_target;
  double mean_self_bleu = 0.0;
  double mean_self_sim = 0.0;
  int num_targets = 0;
  int num_candidates_per_target = 0;
  std::string self_bleu_mode = "pairwise";
  std::string scorer_name = "cosine";
};

/// One target's final candidate set, marker tokens included (they are
/// stripped before any metric computation).
struct CandidateSetView {
  std::string id;
  std::vector<std::vector<std::string>> texts;
};

struct ReportConfig {
  BleuConfig bleu;
  SelfBleuMode mode = SelfBleuMode::pairwise;
  bool allow_ragged = false;
  std::string scorer_name = "cosine";
};

/// Per-target Self-BLEU and self-similarity plus corpus means. Ragged
/// candidate counts raise ValidationError unless allow_ragged; sets with
/// fewer than two candidates are always an error.
DiversityReport diversity_report(const std::vector<CandidateSetView>& sets,
                                 const PairScorer& scorer,
                                 const ReportConfig& config = {});

/// {"per_target": [{"id", "self_bleu", "self_sim"}],
///  "mean": {"self_bleu", "self_sim"}, "config": {...}}
std::string report_to_json(const DiversityReport& report);

/// Markdown table with one row per strategy/report.
std::string reports_to_markdown(
    const std::vector<std::pair<std::string, DiversityReport>>& labeled);

}  // namespace dip
