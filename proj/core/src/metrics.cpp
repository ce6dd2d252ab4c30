#include "dip/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dip/corpus.hpp"
#include "dip/error.hpp"

namespace dip {

using nlohmann::json;

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(std::span<const std::string> tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::vector<std::string> gram(tokens.begin() + static_cast<ptrdiff_t>(i),
                                  tokens.begin() + static_cast<ptrdiff_t>(i) +
                                      n);
    ++counts[std::move(gram)];
  }
  return counts;
}

double geometric_mean_precision(std::span<const std::string> hyp,
                                const std::vector<NgramCounts>& clip_sources,
                                const BleuConfig& config) {
  const int effective_n =
      std::min<int>(config.max_n, static_cast<int>(hyp.size()));
  const double weight = 1.0 / static_cast<double>(effective_n);
  double log_sum = 0.0;
  for (int n = 1; n <= effective_n; ++n) {
    const NgramCounts hyp_counts = count_ngrams(hyp, n);
    int total = 0;
    int matched = 0;
    for (const auto& [gram, count] : hyp_counts) {
      total += count;
      auto it = clip_sources[static_cast<size_t>(n - 1)].find(gram);
      if (it != clip_sources[static_cast<size_t>(n - 1)].end()) {
        matched += std::min(count, it->second);
      }
    }
    const double precision =
        total > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                  : 0.0;
    log_sum += weight * std::log(precision > 0.0 ? precision : config.epsilon);
  }
  return std::exp(log_sum);
}

}  // namespace

double bleu(std::span<const std::string> hypothesis,
            std::span<const std::string> reference, const BleuConfig& config) {
  if (hypothesis.empty() || reference.empty()) {
    throw ConfigError("bleu requires non-empty hypothesis and reference");
  }
  const int effective_n =
      std::min<int>(config.max_n, static_cast<int>(hypothesis.size()));
  std::vector<NgramCounts> ref_counts;
  for (int n = 1; n <= effective_n; ++n) {
    ref_counts.push_back(count_ngrams(reference, n));
  }
  const double precision =
      geometric_mean_precision(hypothesis, ref_counts, config);
  const double ratio = static_cast<double>(reference.size()) /
                       static_cast<double>(hypothesis.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return bp * precision;
}

double bleu_multi(std::span<const std::string> hypothesis,
                  const std::vector<std::vector<std::string>>& references,
                  const BleuConfig& config) {
  if (hypothesis.empty() || references.empty()) {
    throw ConfigError("bleu_multi requires a hypothesis and references");
  }
  for (const auto& ref : references) {
    if (ref.empty()) throw ConfigError("bleu_multi reference is empty");
  }
  const int effective_n =
      std::min<int>(config.max_n, static_cast<int>(hypothesis.size()));
  std::vector<NgramCounts> clip(static_cast<size_t>(effective_n));
  for (const auto& ref : references) {
    for (int n = 1; n <= effective_n; ++n) {
      for (const auto& [gram, count] : count_ngrams(ref, n)) {
        auto& slot = clip[static_cast<size_t>(n - 1)][gram];
        slot = std::max(slot, count);
      }
    }
  }
  const double precision = geometric_mean_precision(hypothesis, clip, config);

  size_t closest = references.front().size();
  for (const auto& ref : references) {
    const auto diff = [&](size_t len) {
      const auto h = static_cast<ptrdiff_t>(hypothesis.size());
      return std::abs(static_cast<ptrdiff_t>(len) - h);
    };
    if (diff(ref.size()) < diff(closest) ||
        (diff(ref.size()) == diff(closest) && ref.size() < closest)) {
      closest = ref.size();
    }
  }
  const double ratio =
      static_cast<double>(closest) / static_cast<double>(hypothesis.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return bp * precision;
}

std::string to_string(SelfBleuMode mode) {
  return mode == SelfBleuMode::pairwise ? "pairwise" : "vs-rest";
}

SelfBleuMode self_bleu_mode_from_string(std::string_view s) {
  if (s == "pairwise") return SelfBleuMode::pairwise;
  if (s == "vs-rest") return SelfBleuMode::vs_rest;
  throw ConfigError("unknown self-bleu mode: " + std::string(s));
}

namespace {

/// Sorted-order mean so permutations of the inputs cannot perturb the sum.
double sorted_mean(std::vector<double> scores) {
  std::sort(scores.begin(), scores.end());
  const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
  return sum / static_cast<double>(scores.size());
}

}  // namespace

double self_bleu(const std::vector<std::vector<std::string>>& candidates,
                 const BleuConfig& config, SelfBleuMode mode) {
  if (candidates.size() < 2) {
    throw ValidationError("self_bleu undefined for fewer than two candidates");
  }
  std::vector<double> scores;
  if (mode == SelfBleuMode::pairwise) {
    for (size_t i = 0; i < candidates.size(); ++i) {
      for (size_t j = 0; j < candidates.size(); ++j) {
        if (i == j) continue;
        scores.push_back(bleu(candidates[i], candidates[j], config));
      }
    }
  } else {
    for (size_t i = 0; i < candidates.size(); ++i) {
      std::vector<std::vector<std::string>> rest;
      for (size_t j = 0; j < candidates.size(); ++j) {
        if (j != i) rest.push_back(candidates[j]);
      }
      scores.push_back(bleu_multi(candidates[i], rest, config));
    }
  }
  return sorted_mean(std::move(scores));
}

double self_similarity(const std::vector<std::vector<std::string>>& candidates,
                       const PairScorer& scorer) {
  if (candidates.size() < 2) {
    throw ValidationError(
        "self_similarity undefined for fewer than two candidates");
  }
  std::vector<double> scores;
  for (size_t i = 0; i < candidates.size(); ++i) {
    for (size_t j = 0; j < candidates.size(); ++j) {
      if (i == j) continue;
      scores.push_back(scorer(candidates[i], candidates[j]));
    }
  }
  return sorted_mean(std::move(scores));
}

DiversityReport diversity_report(const std::vector<CandidateSetView>& sets,
                                 const PairScorer& scorer,
                                 const ReportConfig& config) {
  if (sets.empty()) throw ValidationError("diversity report over no targets");

  const size_t expected = sets.front().texts.size();
  for (const auto& set : sets) {
    if (set.texts.size() < 2) {
      throw ValidationError("target " + set.id +
                            " has fewer than two candidates");
    }
    if (!config.allow_ragged && set.texts.size() != expected) {
      throw ValidationError(
          "ragged candidate counts (target " + set.id + " has " +
          std::to_string(set.texts.size()) + ", expected " +
          std::to_string(expected) + "); pass --allow-ragged to permit");
    }
  }

  DiversityReport report;
  report.num_targets = static_cast<int>(sets.size());
  report.num_candidates_per_target = static_cast<int>(expected);
  report.self_bleu_mode = to_string(config.mode);
  report.scorer_name = config.scorer_name;

  double bleu_sum = 0.0;
  double sim_sum = 0.0;
  for (const auto& set : sets) {
    std::vector<std::vector<std::string>> stripped;
    stripped.reserve(set.texts.size());
    for (const auto& text : set.texts) {
      std::vector<std::string> content = strip_markers(text);
      if (content.empty()) {
        throw ValidationError("candidate for target " + set.id +
                              " is empty after marker stripping");
      }
      stripped.push_back(std::move(content));
    }
    TargetDiversity td;
    td.id = set.id;
    td.self_bleu = self_bleu(stripped, config.bleu, config.mode);
    td.self_sim = self_similarity(stripped, scorer);
    bleu_sum += td.self_bleu;
    sim_sum += td.self_sim;
    report.per_target.push_back(std::move(td));
  }
  report.mean_self_bleu = bleu_sum / static_cast<double>(sets.size());
  report.mean_self_sim = sim_sum / static_cast<double>(sets.size());
  return report;
}

std::string report_to_json(const DiversityReport& report) {
  json j;
  json per_target = json::array();
  for (const auto& td : report.per_target) {
    per_target.push_back(json{
        {"id", td.id}, {"self_bleu", td.self_bleu}, {"self_sim", td.self_sim}});
  }
  j["per_target"] = std::move(per_target);
  j["mean"] = json{{"self_bleu", report.mean_self_bleu},
                   {"self_sim", report.mean_self_sim}};
  j["config"] = json{{"num_targets", report.num_targets},
                     {"num_candidates_per_target",
                      report.num_candidates_per_target},
                     {"self_bleu_mode", report.self_bleu_mode},
                     {"scorer", report.scorer_name}};
  return j.dump(2);
}

std::string reports_to_markdown(
    const std::vector<std::pair<std::string, DiversityReport>>& labeled) {
  std::ostringstream md;
  md << "| Model | Self-BLEU | Self-Sim |\n";
  md << "|-------|-----------|----------|\n";
  char buf[64];
  for (const auto& [label, report] : labeled) {
    std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f |\n", label.c_str(),
                  report.mean_self_bleu, report.mean_self_sim);
    md << buf;
  }
  return md.str();
}

}  // namespace dip
