#include "dip/ranker.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "dip/error.hpp"
#include "dip/model.hpp"

namespace dip {

using nlohmann::json;

RankInput rank_input_from_sentence(const AnnotatedSentence& sentence) {
  validate(sentence);
  if (!sentence.precondition) {
    throw MissingGoldError("ranker input needs a candidate span: " + sentence.id);
  }
  RankInput in;
  in.sentence = sentence.tokens;
  in.target_trigger = sentence.target.trigger;
  in.candidate_trigger = sentence.precondition->trigger;
  in.clause_start = sentence.precondition->start;
  in.clause_end = sentence.precondition->end;
  return in;
}

RankInput rank_input_from_candidate(const InfillingInstance& instance,
                                    const Candidate& candidate) {
  const std::vector<std::string> clause = strip_markers(candidate.text);

  RankInput in;
  in.target_trigger = -1;
  for (size_t i = 0; i < instance.input_tokens.size(); ++i) {
    const std::string& t = instance.input_tokens[i];
    if (t == tok::kBlankStr) {
      in.clause_start = static_cast<int>(in.sentence.size());
      in.sentence.insert(in.sentence.end(), clause.begin(), clause.end());
      in.clause_end = static_cast<int>(in.sentence.size());
      continue;
    }
    if (t == tok::kControlStr) break;  // trailing control code
    if (tok::is_special_string(t)) {
      if (t == tok::kEventOpenStr && i + 1 < instance.input_tokens.size()) {
        in.target_trigger = static_cast<int>(in.sentence.size());
      }
      continue;
    }
    in.sentence.push_back(t);
  }
  if (in.target_trigger < 0) {
    throw ValidationError("instance has no <event>-marked target");
  }

  in.candidate_trigger = in.clause_start;
  for (int i = in.clause_start; i < in.clause_end; ++i) {
    if (in.sentence[static_cast<size_t>(i)] == candidate.trigger) {
      in.candidate_trigger = i;
      break;
    }
  }
  return in;
}

std::vector<double> RankerModel::features(const RankInput& in) const {
  std::vector<double> f(kNumFeatures, 0.0);
  const int n = static_cast<int>(in.sentence.size());
  if (n == 0) return f;

  const std::string& target =
      in.sentence[static_cast<size_t>(std::clamp(in.target_trigger, 0, n - 1))];
  const std::string cand =
      in.clause_start < in.clause_end
          ? in.sentence[static_cast<size_t>(
                std::clamp(in.candidate_trigger, 0, n - 1))]
          : std::string();

  // Trigger-pair co-occurrence evidence from positive training pairs.
  double count = 0.0;
  if (auto it = cooc.find(target); it != cooc.end()) {
    if (auto jt = it->second.find(cand); jt != it->second.end()) {
      count = jt->second;
    }
  }
  f[0] = std::log1p(count);

  // Token overlap between the clause and the +-5 window around the target.
  std::set<std::string> clause_tokens;
  for (int i = in.clause_start; i < in.clause_end; ++i) {
    clause_tokens.insert(in.sentence[static_cast<size_t>(i)]);
  }
  std::set<std::string> window;
  for (int i = std::max(0, in.target_trigger - 5);
       i < std::min(n, in.target_trigger + 6); ++i) {
    if (i >= in.clause_start && i < in.clause_end) continue;
    window.insert(in.sentence[static_cast<size_t>(i)]);
  }
  int shared = 0;
  for (const auto& t : clause_tokens) shared += window.count(t) ? 1 : 0;
  f[1] = clause_tokens.empty()
             ? 0.0
             : static_cast<double>(shared) /
                   static_cast<double>(clause_tokens.size());

  f[2] = static_cast<double>(std::abs(in.candidate_trigger - in.target_trigger)) /
         static_cast<double>(n);
  return f;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double RankerModel::score(const RankInput& in) const {
  const std::vector<double> f = features(in);
  double z = bias;
  for (int i = 0; i < kNumFeatures; ++i) {
    const double x = stds[static_cast<size_t>(i)] > 0.0
                         ? (f[static_cast<size_t>(i)] - means[static_cast<size_t>(i)]) /
                               stds[static_cast<size_t>(i)]
                         : 0.0;
    z += weights[static_cast<size_t>(i)] * x;
  }
  return sigmoid(z);
}

RankerModel train_ranker(const std::vector<AnnotatedSentence>& labeled) {
  std::vector<RankInput> inputs;
  std::vector<int> labels;
  for (const auto& s : labeled) {
    if (!s.label) continue;
    inputs.push_back(rank_input_from_sentence(s));
    labels.push_back(*s.label ? 1 : 0);
  }
  if (inputs.empty()) throw TrainingError("no labeled ranker instances");
  const int positives = static_cast<int>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0 || positives == static_cast<int>(labels.size())) {
    throw TrainingError("ranker training needs both labels present");
  }

  RankerModel model;
  for (size_t i = 0; i < inputs.size(); ++i) {
    if (labels[i] != 1) continue;
    const RankInput& in = inputs[i];
    const std::string& target =
        in.sentence[static_cast<size_t>(in.target_trigger)];
    const std::string& cand =
        in.sentence[static_cast<size_t>(in.candidate_trigger)];
    model.cooc[target][cand] += 1.0;
  }

  std::vector<std::vector<double>> feats;
  feats.reserve(inputs.size());
  for (const auto& in : inputs) feats.push_back(model.features(in));

  for (int j = 0; j < RankerModel::kNumFeatures; ++j) {
    double mean = 0.0;
    for (const auto& f : feats) mean += f[static_cast<size_t>(j)];
    mean /= static_cast<double>(feats.size());
    double var = 0.0;
    for (const auto& f : feats) {
      const double d = f[static_cast<size_t>(j)] - mean;
      var += d * d;
    }
    var /= static_cast<double>(feats.size());
    model.means[static_cast<size_t>(j)] = mean;
    model.stds[static_cast<size_t>(j)] = std::sqrt(var);
  }

  auto standardized = [&](size_t i, int j) {
    const double s = model.stds[static_cast<size_t>(j)];
    if (s <= 0.0) return 0.0;
    return (feats[i][static_cast<size_t>(j)] - model.means[static_cast<size_t>(j)]) / s;
  };

  // Full-batch gradient descent; deterministic, no regularization needed at
  // this feature count.
  constexpr int kEpochs = 400;
  constexpr double kLr = 0.5;
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::array<double, RankerModel::kNumFeatures> grad{};
    double grad_bias = 0.0;
    for (size_t i = 0; i < feats.size(); ++i) {
      double z = model.bias;
      for (int j = 0; j < RankerModel::kNumFeatures; ++j) {
        z += model.weights[static_cast<size_t>(j)] * standardized(i, j);
      }
      const double err = sigmoid(z) - static_cast<double>(labels[i]);
      for (int j = 0; j < RankerModel::kNumFeatures; ++j) {
        grad[static_cast<size_t>(j)] += err * standardized(i, j);
      }
      grad_bias += err;
    }
    const double scale = kLr / static_cast<double>(feats.size());
    for (int j = 0; j < RankerModel::kNumFeatures; ++j) {
      model.weights[static_cast<size_t>(j)] -= scale * grad[static_cast<size_t>(j)];
    }
    model.bias -= scale * grad_bias;
  }
  return model;
}

RankerEval evaluate_ranker(const RankerModel& model,
                           const std::vector<AnnotatedSentence>& labeled) {
  int tp = 0, fp = 0, fn = 0;
  for (const auto& s : labeled) {
    if (!s.label) continue;
    const bool predicted = model.score(rank_input_from_sentence(s)) >= 0.5;
    if (predicted && *s.label) ++tp;
    if (predicted && !*s.label) ++fp;
    if (!predicted && *s.label) ++fn;
  }
  RankerEval eval;
  if (tp + fp > 0) eval.precision = static_cast<double>(tp) / (tp + fp);
  if (tp + fn > 0) eval.recall = static_cast<double>(tp) / (tp + fn);
  if (eval.precision + eval.recall > 0.0) {
    eval.f1 = 2.0 * eval.precision * eval.recall / (eval.precision + eval.recall);
  }
  return eval;
}

void persist_ranker(const RankerModel& model, const std::filesystem::path& file) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["feature_version"] = RankerModel::kFeatureVersion;
  j["weights"] = model.weights;
  j["bias"] = model.bias;
  j["means"] = model.means;
  j["stds"] = model.stds;
  j["cooc"] = model.cooc;
  std::ofstream out(file);
  if (!out) throw FormatError("cannot write ranker file: " + file.string());
  out << j.dump(2) << '\n';
}

RankerModel load_ranker(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("missing ranker file: " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("corrupted ranker file " + file.string() + ": " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      throw FormatError("ranker format version mismatch in " + file.string());
    }
    if (j.at("feature_version").get<int>() != RankerModel::kFeatureVersion) {
      throw FormatError("ranker feature version mismatch in " + file.string());
    }
    RankerModel model;
    model.weights = j.at("weights").get<std::array<double, 3>>();
    model.bias = j.at("bias").get<double>();
    model.means = j.at("means").get<std::array<double, 3>>();
    model.stds = j.at("stds").get<std::array<double, 3>>();
    model.cooc =
        j.at("cooc")
            .get<std::map<std::string, std::map<std::string, double>>>();
    return model;
  } catch (const json::exception& e) {
    throw FormatError("corrupted ranker file " + file.string() + ": " + e.what());
  }
}

}  // namespace dip
