#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dip/candidate.hpp"
#include "dip/corpus.hpp"

namespace dip {

/// Normalized view of a (target event, candidate event) pair in text:
/// plain sentence tokens with the candidate clause substituted in, plus the
/// two trigger positions and the clause extent.
struct RankInput {
  std::vector<std::string> sentence;
  int target_trigger = 0;
  int candidate_trigger = 0;
  int clause_start = 0;
  int clause_end = 0;  // half-open
};

RankInput rank_input_from_sentence(const AnnotatedSentence& sentence);

/// Substitutes the candidate clause (markers stripped) into the instance's
/// [BLANK]. When the candidate trigger is absent from the clause the clause
/// start stands in for its position.
RankInput rank_input_from_candidate(const InfillingInstance& instance,
                                    const Candidate& candidate);

/// Pluggable binary scorer; scores always lie in [0, 1].
class RankScorer {
 public:
  virtual ~RankScorer() = default;
  virtual double score(const RankInput& input) const = 0;
};

/// Logistic scorer over three features: trigger-pair co-occurrence counts
/// from the positive training pairs, token overlap between the clause and
/// the target's +-5 context window, and normalized trigger distance.
class RankerModel : public RankScorer {
 public:
  static constexpr int kFeatureVersion = 1;
  static constexpr int kNumFeatures = 3;

  RankerModel() = default;

  double score(const RankInput& input) const override;

  std::vector<double> features(const RankInput& input) const;

  // Serialized state.
  std::map<std::string, std::map<std::string, double>> cooc;
  std::array<double, kNumFeatures> weights{};
  std::array<double, kNumFeatures> means{};
  std::array<double, kNumFeatures> stds{};
  double bias = 0.0;
};

/// Trains the logistic scorer on labeled sentences (both labels required).
RankerModel train_ranker(const std::vector<AnnotatedSentence>& labeled);

struct RankerEval {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision/recall/F1 at threshold 0.5 on labeled sentences.
RankerEval evaluate_ranker(const RankerModel& model,
                           const std::vector<AnnotatedSentence>& labeled);

void persist_ranker(const RankerModel& model, const std::filesystem::path& file);
RankerModel load_ranker(const std::filesystem::path& file);

}  // namespace dip
