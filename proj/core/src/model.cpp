#include "dip/model.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dip/error.hpp"

namespace dip {

using nlohmann::json;

namespace {

void check_ids(std::span<const TokenId> ids, size_t vocab_size) {
  for (TokenId id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab_size) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of size " +
                       std::to_string(vocab_size));
    }
  }
}

TokenSeq tail(std::span<const TokenId> prefix, size_t len) {
  len = std::min(len, prefix.size());
  return TokenSeq(prefix.end() - static_cast<ptrdiff_t>(len), prefix.end());
}

}  // namespace

double sequence_logprob(const SequenceModel& model,
                        std::span<const TokenId> prefix,
                        std::span<const TokenId> continuation) {
  if (continuation.empty()) {
    throw ConfigError("sequence_logprob requires a non-empty continuation");
  }
  TokenSeq seq(prefix.begin(), prefix.end());
  double total = 0.0;
  for (TokenId id : continuation) {
    const Distribution d = model.next_dist(seq);
    check_ids({&id, 1}, d.support());
    const double p = d[id];
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(p);
    seq.push_back(id);
  }
  return total;
}

// --- ExplicitTableModel ------------------------------------------------------

ExplicitTableModel::ExplicitTableModel(Vocab vocab, int order,
                                       std::map<TokenSeq, Distribution> table)
    : vocab_(std::move(vocab)), order_(order), table_(std::move(table)) {
  if (order_ < 1) throw ConfigError("table model order must be >= 1");
  for (const auto& [ctx, dist] : table_) {
    check_ids(ctx, vocab_.size());
    if (dist.support() != vocab_.size()) {
      throw ValidationError("table distribution support != vocab size");
    }
    dist.validate();
  }
}

ExplicitTableModel ExplicitTableModel::from_words(
    const std::vector<std::string>& words, int order,
    const std::map<std::vector<std::string>, std::map<std::string, double>>&
        table) {
  Vocab vocab(words);
  std::map<TokenSeq, Distribution> ids;
  for (const auto& [ctx, next] : table) {
    Distribution d;
    d.probs.assign(vocab.size(), 0.0);
    for (const auto& [word, p] : next) {
      d.probs[static_cast<size_t>(vocab.id(word))] = p;
    }
    ids.emplace(vocab.encode(ctx), std::move(d));
  }
  return ExplicitTableModel(std::move(vocab), order, std::move(ids));
}

Distribution ExplicitTableModel::next_dist(
    std::span<const TokenId> prefix) const {
  check_ids(prefix, vocab_.size());
  const TokenSeq ctx = tail(prefix, static_cast<size_t>(order_));
  auto it = table_.find(ctx);
  if (it == table_.end()) {
    std::ostringstream oss;
    oss << "no table entry for context [";
    for (size_t i = 0; i < ctx.size(); ++i) {
      oss << (i ? " " : "") << vocab_.token(ctx[i]);
    }
    oss << "]";
    throw ValidationError(oss.str());
  }
  return it->second;
}

// --- NGramModel --------------------------------------------------------------

void NGramConfig::validate() const {
  if (order < 1) throw ConfigError("ngram order must be >= 1");
  if (add_k < 0.0) throw ConfigError("add_k must be >= 0");
  if (copy_bias < 0.0 || copy_bias >= 1.0) {
    throw ConfigError("copy_bias must lie in [0, 1)");
  }
  if (pretrain_weight < 0.0 || pretrain_weight > 1.0) {
    throw ConfigError("pretrain_weight must lie in [0, 1]");
  }
  if (interpolation_weights) {
    const auto& w = *interpolation_weights;
    if (static_cast<int>(w.size()) != order + 1) {
      throw ConfigError("interpolation_weights must have order+1 entries");
    }
    double sum = 0.0;
    for (double x : w) {
      if (x < 0.0) throw ConfigError("interpolation weights must be >= 0");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ConfigError("interpolation weights must sum to 1");
    }
  }
}

NGramModel::NGramModel(Vocab vocab, NGramConfig config,
                       std::vector<ContextCounts> counts)
    : vocab_(std::move(vocab)),
      config_(std::move(config)),
      counts_(std::move(counts)) {
  config_.validate();
  if (counts_.size() != static_cast<size_t>(config_.order)) {
    throw ValidationError("count tables must match the model order");
  }
  totals_.resize(counts_.size());
  for (size_t j = 0; j < counts_.size(); ++j) {
    for (const auto& [ctx, succ] : counts_[j]) {
      if (ctx.size() != j) {
        throw ValidationError("context length mismatch in count table");
      }
      check_ids(ctx, vocab_.size());
      double total = 0.0;
      for (const auto& [id, c] : succ) {
        check_ids({&id, 1}, vocab_.size());
        if (c < 0.0) throw ValidationError("negative n-gram count");
        total += c;
      }
      totals_[j].emplace(ctx, total);
    }
  }
}

Distribution NGramModel::adaptive_dist(std::span<const TokenId> prefix) const {
  const size_t v = vocab_.size();
  const double alpha = config_.add_k * static_cast<double>(v);

  Distribution dist;
  dist.probs.assign(v, 1.0 / static_cast<double>(v));

  const size_t max_ctx =
      std::min(prefix.size(), static_cast<size_t>(config_.order) - 1);
  for (size_t ctxlen = 0; ctxlen <= max_ctx; ++ctxlen) {
    const TokenSeq ctx = tail(prefix, ctxlen);
    const auto& table = counts_[ctxlen];
    auto it = table.find(ctx);
    const double total =
        it == table.end() ? 0.0 : totals_[ctxlen].find(ctx)->second;
    const double den = total + alpha;
    if (den <= 0.0) continue;  // unseen context with add_k = 0: pure backoff
    const double shrink = alpha / den;
    for (double& p : dist.probs) p *= shrink;
    if (it != table.end()) {
      for (const auto& [id, c] : it->second) {
        dist.probs[static_cast<size_t>(id)] += c / den;
      }
    }
  }
  return dist;
}

Distribution NGramModel::static_dist(std::span<const TokenId> prefix) const {
  const size_t v = vocab_.size();
  const double alpha = config_.add_k * static_cast<double>(v);
  const auto& w = *config_.interpolation_weights;

  Distribution dist;
  dist.probs.assign(v, 0.0);
  for (int j = config_.order; j >= 1; --j) {
    const double weight = w[static_cast<size_t>(config_.order - j)];
    if (weight == 0.0) continue;
    const size_t ctxlen = std::min(prefix.size(), static_cast<size_t>(j - 1));
    const TokenSeq ctx = tail(prefix, ctxlen);
    const auto& table = counts_[ctxlen];
    auto it = table.find(ctx);
    const double total =
        it == table.end() ? 0.0 : totals_[ctxlen].find(ctx)->second;
    const double den = total + alpha;
    if (den <= 0.0) {
      for (double& p : dist.probs) p += weight / static_cast<double>(v);
      continue;
    }
    const double floor = config_.add_k / den;
    for (double& p : dist.probs) p += weight * floor;
    if (it != table.end()) {
      for (const auto& [id, c] : it->second) {
        dist.probs[static_cast<size_t>(id)] += weight * c / den;
      }
    }
  }
  const double uniform = w.back() / static_cast<double>(v);
  for (double& p : dist.probs) p += uniform;
  return dist;
}

Distribution NGramModel::ngram_dist(std::span<const TokenId> prefix) const {
  check_ids(prefix, vocab_.size());
  return config_.interpolation_weights ? static_dist(prefix)
                                       : adaptive_dist(prefix);
}

namespace {

/// Trigger of the last `<E> e` control code preceding the last <sep>,
/// provided e has not been emitted after that <sep>. nullopt otherwise.
std::optional<TokenId> pending_control_trigger(std::span<const TokenId> prefix) {
  ptrdiff_t sep = -1;
  for (ptrdiff_t i = static_cast<ptrdiff_t>(prefix.size()) - 1; i >= 0; --i) {
    if (prefix[static_cast<size_t>(i)] == tok::kSep) {
      sep = i;
      break;
    }
  }
  if (sep < 0) return std::nullopt;

  TokenId trigger = -1;
  for (ptrdiff_t i = sep - 2; i >= 0; --i) {
    if (prefix[static_cast<size_t>(i)] == tok::kControl) {
      trigger = prefix[static_cast<size_t>(i) + 1];
      break;
    }
  }
  if (trigger < tok::kNumSpecial) return std::nullopt;

  for (size_t i = static_cast<size_t>(sep) + 1; i < prefix.size(); ++i) {
    if (prefix[i] == trigger) return std::nullopt;  // already emitted
  }
  return trigger;
}

}  // namespace

Distribution NGramModel::next_dist(std::span<const TokenId> prefix) const {
  Distribution dist = ngram_dist(prefix);
  if (config_.copy_bias <= 0.0) return dist;

  const auto trigger = pending_control_trigger(prefix);
  if (!trigger) return dist;

  const double gamma = config_.copy_bias;
  for (double& p : dist.probs) p *= 1.0 - gamma;
  dist.probs[static_cast<size_t>(*trigger)] += gamma;
  return dist;
}

NGramModel train_ngram(const std::vector<TokenSeq>& pretrain_corpus,
                       const std::vector<TokenSeq>& finetune_corpus,
                       Vocab vocab, const NGramConfig& config) {
  config.validate();
  if (finetune_corpus.empty()) {
    throw TrainingError("finetune corpus is empty");
  }
  for (const auto* corpus : {&pretrain_corpus, &finetune_corpus}) {
    for (const auto& seq : *corpus) check_ids(seq, vocab.size());
  }

  auto accumulate = [&](const std::vector<TokenSeq>& corpus, double weight,
                        std::vector<NGramModel::ContextCounts>& counts) {
    if (weight == 0.0) return;
    for (const auto& seq : corpus) {
      for (size_t i = 0; i < seq.size(); ++i) {
        const size_t max_ctx =
            std::min(i, static_cast<size_t>(config.order) - 1);
        for (size_t ctxlen = 0; ctxlen <= max_ctx; ++ctxlen) {
          TokenSeq ctx(seq.begin() + static_cast<ptrdiff_t>(i - ctxlen),
                       seq.begin() + static_cast<ptrdiff_t>(i));
          counts[ctxlen][std::move(ctx)][seq[i]] += weight;
        }
      }
    }
  };

  std::vector<NGramModel::ContextCounts> counts(
      static_cast<size_t>(config.order));
  accumulate(pretrain_corpus, config.pretrain_weight, counts);
  accumulate(finetune_corpus, 1.0 - config.pretrain_weight, counts);
  return NGramModel(std::move(vocab), config, std::move(counts));
}

// --- Persistence -------------------------------------------------------------

namespace {

std::string context_key(const TokenSeq& ctx) {
  std::ostringstream oss;
  for (size_t i = 0; i < ctx.size(); ++i) oss << (i ? " " : "") << ctx[i];
  return oss.str();
}

TokenSeq context_from_key(const std::string& key) {
  TokenSeq ctx;
  std::istringstream iss(key);
  TokenId id;
  while (iss >> id) ctx.push_back(id);
  return ctx;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("missing model file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("corrupted model file " + path.string() + ": " +
                      e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write model file: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace

void persist(const SequenceModel& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  json manifest;
  manifest["format_version"] = kModelFormatVersion;
  manifest["kind"] = model.kind();
  manifest["vocab"] = model.vocab().tokens();

  json payload;
  if (const auto* table = dynamic_cast<const ExplicitTableModel*>(&model)) {
    manifest["order"] = table->order();
    manifest["hyperparameters"] = json::object();
    json entries = json::object();
    for (const auto& [ctx, dist] : table->table()) {
      entries[context_key(ctx)] = dist.probs;
    }
    payload["table"] = std::move(entries);
  } else if (const auto* ngram = dynamic_cast<const NGramModel*>(&model)) {
    const NGramConfig& cfg = ngram->config();
    manifest["order"] = cfg.order;
    json hp;
    hp["add_k"] = cfg.add_k;
    hp["copy_bias"] = cfg.copy_bias;
    hp["pretrain_weight"] = cfg.pretrain_weight;
    hp["interpolation_weights"] =
        cfg.interpolation_weights ? json(*cfg.interpolation_weights)
                                  : json(nullptr);
    manifest["hyperparameters"] = std::move(hp);
    json orders = json::array();
    for (const auto& table : ngram->counts()) {
      json entries = json::object();
      for (const auto& [ctx, succ] : table) {
        json inner = json::object();
        for (const auto& [id, c] : succ) inner[std::to_string(id)] = c;
        entries[context_key(ctx)] = std::move(inner);
      }
      orders.push_back(std::move(entries));
    }
    payload["counts"] = std::move(orders);
  } else {
    throw FormatError("cannot persist model kind: " + model.kind());
  }

  write_json_file(dir / "payload.json", payload);
  write_json_file(dir / "manifest.json", manifest);
}

std::unique_ptr<SequenceModel> load_model(const std::filesystem::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");

  int version = 0;
  std::string kind;
  try {
    version = manifest.at("format_version").get<int>();
    kind = manifest.at("kind").get<std::string>();
  } catch (const json::exception& e) {
    throw FormatError("manifest " + (dir / "manifest.json").string() +
                      " missing field: " + e.what());
  }
  if (version != kModelFormatVersion) {
    throw FormatError("model format version " + std::to_string(version) +
                      " in " + dir.string() + " does not match binary version " +
                      std::to_string(kModelFormatVersion));
  }

  try {
    std::vector<std::string> all_tokens =
        manifest.at("vocab").get<std::vector<std::string>>();
    // Stored vocab lists the specials first; Vocab re-adds them itself.
    std::vector<std::string> words(
        all_tokens.begin() +
            std::min<size_t>(tok::kNumSpecial, all_tokens.size()),
        all_tokens.end());
    Vocab vocab(words);
    if (vocab.tokens() != all_tokens) {
      throw FormatError("stored vocabulary does not start with the reserved "
                        "special tokens in " + dir.string());
    }
    const int order = manifest.at("order").get<int>();
    const json payload = read_json_file(dir / "payload.json");

    if (kind == "explicit_table") {
      std::map<TokenSeq, Distribution> table;
      for (const auto& [key, probs] : payload.at("table").items()) {
        Distribution d;
        d.probs = probs.get<std::vector<double>>();
        table.emplace(context_from_key(key), std::move(d));
      }
      return std::make_unique<ExplicitTableModel>(std::move(vocab), order,
                                                  std::move(table));
    }
    if (kind == "ngram") {
      NGramConfig cfg;
      cfg.order = order;
      const json& hp = manifest.at("hyperparameters");
      cfg.add_k = hp.at("add_k").get<double>();
      cfg.copy_bias = hp.at("copy_bias").get<double>();
      cfg.pretrain_weight = hp.at("pretrain_weight").get<double>();
      if (!hp.at("interpolation_weights").is_null()) {
        cfg.interpolation_weights =
            hp.at("interpolation_weights").get<std::vector<double>>();
      }
      std::vector<NGramModel::ContextCounts> counts;
      for (const auto& table_json : payload.at("counts")) {
        NGramModel::ContextCounts table;
        for (const auto& [key, succ] : table_json.items()) {
          std::map<TokenId, double> inner;
          for (const auto& [id, c] : succ.items()) {
            inner[static_cast<TokenId>(std::stol(id))] = c.get<double>();
          }
          table.emplace(context_from_key(key), std::move(inner));
        }
        counts.push_back(std::move(table));
      }
      return std::make_unique<NGramModel>(std::move(vocab), cfg,
                                          std::move(counts));
    }
    throw FormatError("unknown model kind '" + kind + "' in " + dir.string());
  } catch (const json::exception& e) {
    throw FormatError("corrupted model payload in " + dir.string() + ": " +
                      e.what());
  }
}

}  // namespace dip
