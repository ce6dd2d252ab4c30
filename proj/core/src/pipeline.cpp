#include "dip/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "dip/error.hpp"

namespace dip {

using nlohmann::json;

std::string to_string(Origin origin) {
  switch (origin) {
    case Origin::dip: return "dip";
    case Origin::rps: return "rps";
    default: return "beam";
  }
}

Origin origin_from_string(std::string_view s) {
  if (s == "dip") return Origin::dip;
  if (s == "rps") return Origin::rps;
  if (s == "beam") return Origin::beam;
  throw ValidationError("unknown candidate origin: " + std::string(s));
}

void SamplerConfig::validate() const {
  if (window != 0 && window != 3 && window != 5) {
    throw ConfigError("sampler window must be one of {0, 3, 5}");
  }
  if (num_triggers < 1) throw ConfigError("num_triggers must be >= 1");
  if (trigger_beam < 1) throw ConfigError("trigger_beam must be >= 1");
}

void PostConfig::validate() const {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");
}

TriggerSample sample_triggers(const SequenceModel& sampler,
                              const std::vector<std::string>& reduced_context,
                              const SamplerConfig& config) {
  config.validate();
  const Vocab& vocab = sampler.vocab();
  TokenSeq prefix = vocab.encode(reduced_context);
  prefix.push_back(tok::kSep);
  const Distribution dist = sampler.next_dist(prefix);

  std::vector<TokenId> order;
  order.reserve(dist.probs.size());
  for (size_t i = tok::kNumSpecial; i < dist.probs.size(); ++i) {
    if (dist.probs[i] > 0.0) order.push_back(static_cast<TokenId>(i));
  }
  std::sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    const double pa = dist.probs[static_cast<size_t>(a)];
    const double pb = dist.probs[static_cast<size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;
  });

  TriggerSample out;
  const size_t n = static_cast<size_t>(config.num_triggers);
  out.shortfall = order.size() < n;
  order.resize(std::min(order.size(), n));
  for (TokenId id : order) out.triggers.push_back(vocab.token(id));
  return out;
}

Candidate generate_candidate(const SequenceModel& generator,
                             const InfillingInstance& instance,
                             const std::string& trigger,
                             const DecodeConfig& config, Rng& rng,
                             CandidateDecode mode) {
  config.validate();
  if (instance.has_control_code()) {
    throw ConfigError("instance already carries a control code");
  }
  const Vocab& vocab = generator.vocab();
  const TokenId trigger_id = vocab.id(trigger);

  TokenSeq prefix = vocab.encode(instance.input_tokens);
  prefix.push_back(tok::kControl);
  prefix.push_back(trigger_id);
  prefix.push_back(tok::kSep);

  Candidate cand;
  cand.origin = Origin::dip;
  cand.trigger = trigger;

  TokenSeq generated;
  if (mode == CandidateDecode::beam) {
    const std::vector<Hypothesis> hyps = beam_search(generator, prefix, config);
    if (hyps.empty()) {
      cand.malformed = true;
      return cand;
    }
    generated = hyps.front().tokens;
    cand.lm_logprob = hyps.front().logprob;
    cand.truncated = generated.size() == static_cast<size_t>(config.max_len);
  } else {
    TokenSeq seq = prefix;
    double logprob = 0.0;
    bool hit_eos = false;
    for (int step = 0; step < config.max_len; ++step) {
      const Distribution dist = generator.next_dist(seq);
      const TokenId sampled =
          sample_token(nucleus_truncate(dist, config.nucleus_p), rng);
      logprob += std::log(dist.probs[static_cast<size_t>(sampled)]);
      if (sampled == tok::kEos) {
        hit_eos = true;
        break;
      }
      generated.push_back(sampled);
      seq.push_back(sampled);
    }
    cand.lm_logprob = logprob;
    cand.truncated = !hit_eos;
  }

  cand.text = vocab.decode(generated);
  cand.malformed = generated.empty();
  cand.trigger_in_text =
      std::find(generated.begin(), generated.end(), trigger_id) != generated.end();
  return cand;
}

std::pair<std::vector<int>, FilterStats> similarity_filter_walk(
    const std::vector<std::vector<double>>& sim,
    std::optional<double> tau_override) {
  const size_t n = sim.size();
  if (n < 2) throw ConfigError("similarity walk needs at least two candidates");
  for (const auto& row : sim) {
    if (row.size() != n) throw ValidationError("similarity matrix not square");
  }

  double mu = 0.0;
  size_t pairs = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      mu += sim[i][j];
      ++pairs;
    }
  }
  mu /= static_cast<double>(pairs);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      const double d = sim[i][j] - mu;
      var += d * d;
    }
  }
  var /= static_cast<double>(pairs);

  FilterStats stats;
  stats.mu = mu;
  stats.sigma = std::sqrt(var);
  stats.tau = tau_override ? *tau_override : mu + stats.sigma;

  std::vector<int> kept{0};  // the top-ranked candidate is always retained
  for (size_t i = 1; i < n; ++i) {
    double max_sim = -std::numeric_limits<double>::infinity();
    for (int k : kept) {
      max_sim = std::max(max_sim, sim[i][static_cast<size_t>(k)]);
    }
    if (max_sim < stats.tau) kept.push_back(static_cast<int>(i));
  }
  stats.dropped = static_cast<int>(n - kept.size());
  return {std::move(kept), stats};
}

FilterOutcome redundancy_filter(std::vector<Candidate>& ranked,
                                const Embedder& embedder, int top_k,
                                std::optional<double> tau_override) {
  if (top_k < 1) throw ConfigError("top_k must be >= 1");

  FilterOutcome out;
  for (auto& cand : ranked) cand.embedding = embedder.embed(cand.text);

  if (ranked.size() < 2) {
    for (size_t i = 0; i < ranked.size(); ++i) {
      out.kept_indices.push_back(static_cast<int>(i));
    }
    return out;  // pass-through, tau unset
  }

  const size_t n = ranked.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 1.0));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      sim[i][j] = sim[j][i] = cosine(*ranked[i].embedding, *ranked[j].embedding);
    }
  }

  auto [kept, stats] = similarity_filter_walk(sim, tau_override);
  if (kept.size() > static_cast<size_t>(top_k)) {
    kept.resize(static_cast<size_t>(top_k));
  }
  out.kept_indices = std::move(kept);
  out.stats = stats;
  return out;
}

std::vector<Candidate> rerank(const RankScorer& ranker,
                              const InfillingInstance& instance,
                              std::vector<Candidate> candidates) {
  if (candidates.empty()) throw ConfigError("rerank needs candidates");
  for (auto& cand : candidates) {
    cand.rank_score = ranker.score(rank_input_from_candidate(instance, cand));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) {
                     return *a.rank_score > *b.rank_score;
                   });
  return candidates;
}

std::vector<Candidate> RunRecord::kept() const {
  std::vector<Candidate> out;
  for (const auto& c : candidates) {
    if (c.kept) out.push_back(c);
  }
  return out;
}

namespace {

/// Shared post-processing tail: optional rerank, optional filter, top-k cut.
void post_process(const PipelineModels& models, const InfillingInstance& inst,
                  const PostConfig& post, RunRecord& record) {
  auto& candidates = record.candidates;
  if (candidates.empty()) return;

  if (post.use_ranker) {
    if (!models.ranker) throw ConfigError("post-processing needs a ranker");
    candidates = rerank(*models.ranker, inst, std::move(candidates));
  }

  std::vector<int> kept;
  if (post.use_filter && candidates.size() >= 2) {
    if (!models.embedder) throw ConfigError("post-processing needs an embedder");
    FilterOutcome outcome = redundancy_filter(candidates, *models.embedder,
                                              post.top_k, post.tau_override);
    kept = std::move(outcome.kept_indices);
    record.filter = outcome.stats;
  } else {
    const int limit = std::min<int>(post.top_k, static_cast<int>(candidates.size()));
    for (int i = 0; i < limit; ++i) kept.push_back(i);
  }
  for (int i : kept) candidates[static_cast<size_t>(i)].kept = true;
}

void drop_malformed(std::vector<Candidate>& candidates) {
  candidates.erase(std::remove_if(candidates.begin(), candidates.end(),
                                  [](const Candidate& c) { return c.malformed; }),
                   candidates.end());
}

}  // namespace

RunRecord run_dip(const PipelineModels& models, const AnnotatedSentence& target,
                  const SamplerConfig& sampler_config,
                  const DecodeConfig& decode_config, const PostConfig& post,
                  Rng& rng) {
  if (!models.sampler || !models.generator) {
    throw ConfigError("run_dip needs sampler and generator models");
  }
  sampler_config.validate();
  post.validate();

  RunRecord record;
  record.id = target.id;
  record.strategy = "dip";

  const InfillingInstance inst = build_infilling_instance(target, false);
  const TriggerPairInstance pair =
      build_trigger_pair(target, sampler_config.window);
  const TriggerSample sample =
      sample_triggers(*models.sampler, pair.reduced_context, sampler_config);
  record.triggers = sample.triggers;
  record.sampler_shortfall = sample.shortfall;

  for (const auto& trigger : sample.triggers) {
    record.candidates.push_back(
        generate_candidate(*models.generator, inst, trigger, decode_config, rng));
  }
  drop_malformed(record.candidates);
  post_process(models, inst, post, record);
  return record;
}

RunRecord run_rps(const PipelineModels& models, const AnnotatedSentence& target,
                  const RpsConfig& rps, const DecodeConfig& decode_config,
                  const PostConfig& post, Rng& rng) {
  if (!models.generator) throw ConfigError("run_rps needs a generator model");
  post.validate();

  RunRecord record;
  record.id = target.id;
  record.strategy = "rps";

  const InfillingInstance inst = build_infilling_instance(target, false);
  record.candidates = rps_generate(*models.generator, inst, rps.num_iterations,
                                   decode_config, rng);
  const int limit =
      std::min<int>(post.top_k, static_cast<int>(record.candidates.size()));
  for (int i = 0; i < limit; ++i) record.candidates[static_cast<size_t>(i)].kept = true;
  return record;
}

RunRecord run_rps_plus_post(const PipelineModels& models,
                            const AnnotatedSentence& target,
                            const RpsConfig& rps,
                            const DecodeConfig& decode_config,
                            const PostConfig& post, Rng& rng) {
  if (!models.generator) throw ConfigError("run_rps_plus_post needs a generator");
  post.validate();

  RunRecord record;
  record.id = target.id;
  record.strategy = "rps_post";

  const InfillingInstance inst = build_infilling_instance(target, false);
  record.candidates = rps_generate(*models.generator, inst, rps.num_iterations,
                                   decode_config, rng);
  drop_malformed(record.candidates);
  post_process(models, inst, post, record);
  return record;
}

RunRecord run_beam(const PipelineModels& models, const AnnotatedSentence& target,
                   const DecodeConfig& decode_config, const PostConfig& post) {
  if (!models.generator) throw ConfigError("run_beam needs a generator model");
  post.validate();

  RunRecord record;
  record.id = target.id;
  record.strategy = "beam";

  const InfillingInstance inst = build_infilling_instance(target, false);
  const Vocab& vocab = models.generator->vocab();
  TokenSeq prefix = vocab.encode(inst.input_tokens);
  prefix.push_back(tok::kSep);

  for (const Hypothesis& hyp : beam_search(*models.generator, prefix, decode_config)) {
    Candidate cand;
    cand.origin = Origin::beam;
    cand.text = vocab.decode(hyp.tokens);
    cand.lm_logprob = hyp.logprob;
    cand.truncated = hyp.tokens.size() == static_cast<size_t>(decode_config.max_len);
    for (size_t i = 0; i + 1 < hyp.tokens.size(); ++i) {
      if (hyp.tokens[i] == tok::kPreOpen && !vocab.is_special(hyp.tokens[i + 1])) {
        cand.trigger = vocab.token(hyp.tokens[i + 1]);
        cand.trigger_in_text = true;
        break;
      }
    }
    record.candidates.push_back(std::move(cand));
  }
  const int limit =
      std::min<int>(post.top_k, static_cast<int>(record.candidates.size()));
  for (int i = 0; i < limit; ++i) record.candidates[static_cast<size_t>(i)].kept = true;
  return record;
}

// --- Run-record JSONL -------------------------------------------------------

std::string run_record_to_json(const RunRecord& record) {
  json j;
  j["id"] = record.id;
  j["strategy"] = record.strategy;
  j["triggers"] = record.triggers;
  json cands = json::array();
  for (const auto& c : record.candidates) {
    json jc;
    jc["trigger"] = c.trigger;
    jc["text"] = c.text;
    jc["lm_logprob"] = c.lm_logprob;
    jc["rank_score"] = c.rank_score ? json(*c.rank_score) : json(nullptr);
    jc["kept"] = c.kept;
    cands.push_back(std::move(jc));
  }
  j["candidates"] = std::move(cands);
  if (record.filter) {
    j["filter"] = json{{"mu", record.filter->mu},
                       {"sigma", record.filter->sigma},
                       {"tau", record.filter->tau},
                       {"dropped", record.filter->dropped}};
  } else {
    j["filter"] = nullptr;
  }
  return j.dump();
}

RunRecord run_record_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad run record: ") + e.what());
  }
  try {
    RunRecord record;
    record.id = j.at("id").get<std::string>();
    record.strategy = j.at("strategy").get<std::string>();
    record.triggers = j.at("triggers").get<std::vector<std::string>>();
    for (const auto& jc : j.at("candidates")) {
      Candidate c;
      c.trigger = jc.at("trigger").get<std::string>();
      c.text = jc.at("text").get<std::vector<std::string>>();
      c.lm_logprob = jc.at("lm_logprob").get<double>();
      if (!jc.at("rank_score").is_null()) {
        c.rank_score = jc.at("rank_score").get<double>();
      }
      c.kept = jc.at("kept").get<bool>();
      record.candidates.push_back(std::move(c));
    }
    if (!j.at("filter").is_null()) {
      const json& f = j.at("filter");
      FilterStats stats;
      stats.mu = f.at("mu").get<double>();
      stats.sigma = f.at("sigma").get<double>();
      stats.tau = f.at("tau").get<double>();
      stats.dropped = f.at("dropped").get<int>();
      record.filter = stats;
    }
    return record;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("run record missing field: ") + e.what());
  }
}

void write_run_records(const std::filesystem::path& path,
                       const std::vector<RunRecord>& records) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& r : records) out << run_record_to_json(r) << '\n';
}

std::vector<RunRecord> read_run_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(run_record_from_json(line));
    } catch (const Error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " +
                            e.what());
    }
  }
  return out;
}

}  // namespace dip
