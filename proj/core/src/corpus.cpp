#include "dip/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dip/rng.hpp"

namespace dip {

using nlohmann::json;

std::string to_string(RelationKind kind) {
  return kind == RelationKind::precondition ? "precondition" : "temporal_before";
}

RelationKind relation_kind_from_string(std::string_view s) {
  if (s == "precondition") return RelationKind::precondition;
  if (s == "temporal_before") return RelationKind::temporal_before;
  throw ValidationError("unknown relation kind: " + std::string(s));
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    default: return "test";
  }
}

Split split_of(std::string_view id) {
  const uint64_t bucket = splitmix64(fnv1a64(id)) % 10;
  if (bucket < 8) return Split::train;
  if (bucket == 8) return Split::dev;
  return Split::test;
}

static void validate_span(const Span& span, int num_tokens, const char* name) {
  if (span.start < 0 || span.end > num_tokens || span.start >= span.end) {
    throw AnnotationError(std::string(name) + " span out of bounds");
  }
  if (!span.contains(span.trigger)) {
    throw AnnotationError(std::string(name) + " trigger outside its span");
  }
}

void validate(const AnnotatedSentence& s) {
  const int n = static_cast<int>(s.tokens.size());
  if (n == 0) throw AnnotationError("empty sentence: " + s.id);
  validate_span(s.target, n, "target");
  if (s.precondition) {
    validate_span(*s.precondition, n, "precondition");
    if (s.target.overlaps(*s.precondition)) {
      throw AnnotationError("target and precondition spans overlap: " + s.id);
    }
  }
  for (const auto& t : s.tokens) {
    if (tok::is_special_string(t)) {
      throw AnnotationError("reserved token in sentence " + s.id + ": " + t);
    }
  }
}

bool InfillingInstance::has_control_code() const {
  const size_t n = input_tokens.size();
  return n >= 2 && input_tokens[n - 2] == tok::kControlStr;
}

std::optional<std::string> InfillingInstance::control_trigger() const {
  if (!has_control_code()) return std::nullopt;
  return input_tokens.back();
}

InfillingInstance build_infilling_instance(const AnnotatedSentence& sentence,
                                           bool with_control_code,
                                           std::optional<int> blank_position) {
  validate(sentence);

  if (!sentence.precondition && !blank_position) {
    throw MissingGoldError("sentence " + sentence.id +
                           " has no gold span and no blank position");
  }

  InfillingInstance inst;
  const auto& toks = sentence.tokens;
  const Span& target = sentence.target;

  if (sentence.precondition) {
    const Span& pre = *sentence.precondition;
    for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
      if (pre.contains(i)) {
        if (i == pre.start) inst.input_tokens.push_back(tok::kBlankStr);
        continue;  // the whole span collapses into one [BLANK]
      }
      if (i == target.trigger) {
        inst.input_tokens.push_back(tok::kEventOpenStr);
        inst.input_tokens.push_back(toks[i]);
        inst.input_tokens.push_back(tok::kEventCloseStr);
      } else {
        inst.input_tokens.push_back(toks[i]);
      }
    }
    for (int i = pre.start; i < pre.end; ++i) {
      if (i == pre.trigger) {
        inst.output_tokens.push_back(tok::kPreOpenStr);
        inst.output_tokens.push_back(toks[i]);
        inst.output_tokens.push_back(tok::kPreCloseStr);
      } else {
        inst.output_tokens.push_back(toks[i]);
      }
    }
    if (with_control_code) {
      inst.input_tokens.push_back(tok::kControlStr);
      inst.input_tokens.push_back(toks[pre.trigger]);
    }
  } else {
    const int pos = *blank_position;
    if (pos < 0 || pos > static_cast<int>(toks.size())) {
      throw ConfigError("blank position out of range");
    }
    if (target.contains(pos) && pos != target.start) {
      throw AnnotationError("blank position inside target span");
    }
    for (int i = 0; i < static_cast<int>(toks.size()); ++i) {
      if (i == pos) inst.input_tokens.push_back(tok::kBlankStr);
      if (i == target.trigger) {
        inst.input_tokens.push_back(tok::kEventOpenStr);
        inst.input_tokens.push_back(toks[i]);
        inst.input_tokens.push_back(tok::kEventCloseStr);
      } else {
        inst.input_tokens.push_back(toks[i]);
      }
    }
    if (pos == static_cast<int>(toks.size())) {
      inst.input_tokens.push_back(tok::kBlankStr);
    }
    if (with_control_code) {
      throw ConfigError(
          "control code requires a gold trigger; append one via the pipeline");
    }
  }
  return inst;
}

std::vector<std::string> reconstruct_sentence(const InfillingInstance& inst) {
  std::vector<std::string> out;
  for (const auto& t : inst.input_tokens) {
    if (t == tok::kBlankStr) {
      for (const auto& o : inst.output_tokens) {
        if (!tok::is_special_string(o)) out.push_back(o);
      }
      continue;
    }
    if (t == tok::kControlStr) break;  // trailing control code is not content
    if (tok::is_special_string(t)) continue;
    out.push_back(t);
  }
  return out;
}

TriggerPairInstance build_trigger_pair(const AnnotatedSentence& sentence,
                                       int window) {
  if (window != 0 && window != 3 && window != 5) {
    throw ConfigError("window must be one of {0, 3, 5}, got " +
                      std::to_string(window));
  }
  validate(sentence);
  if (!sentence.precondition) {
    throw MissingGoldError("sentence " + sentence.id + " has no gold span");
  }

  const int n = static_cast<int>(sentence.tokens.size());
  const int t = sentence.target.trigger;
  const int lo = std::max(0, t - window);
  const int hi = std::min(n, t + window + 1);

  TriggerPairInstance pair;
  pair.window = window;
  pair.reduced_context.assign(sentence.tokens.begin() + lo,
                              sentence.tokens.begin() + hi);
  pair.precondition_trigger = sentence.tokens[sentence.precondition->trigger];
  return pair;
}

std::vector<std::string> strip_markers(const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) {
    if (!tok::is_special_string(t)) out.push_back(t);
  }
  return out;
}

// --- JSONL ----------------------------------------------------------------

static json span_to_json(const Span& span) {
  return json{{"start", span.start}, {"end", span.end}, {"trigger", span.trigger}};
}

static Span span_from_json(const json& j) {
  Span s;
  s.start = j.at("start").get<int>();
  s.end = j.at("end").get<int>();
  s.trigger = j.at("trigger").get<int>();
  return s;
}

std::string sentence_to_json(const AnnotatedSentence& s) {
  json j;
  j["id"] = s.id;
  j["tokens"] = s.tokens;
  j["target"] = span_to_json(s.target);
  j["precondition"] = s.precondition ? span_to_json(*s.precondition) : json(nullptr);
  j["label"] = s.label ? json(*s.label) : json(nullptr);
  j["kind"] = to_string(s.kind);
  return j.dump();
}

AnnotatedSentence sentence_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad JSON record: ") + e.what());
  }
  AnnotatedSentence s;
  try {
    s.id = j.at("id").get<std::string>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    s.target = span_from_json(j.at("target"));
    if (!j.at("precondition").is_null()) {
      s.precondition = span_from_json(j.at("precondition"));
    }
    if (!j.at("label").is_null()) s.label = j.at("label").get<bool>();
    s.kind = relation_kind_from_string(j.at("kind").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("record missing field: ") + e.what());
  }
  return s;
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<AnnotatedSentence>& sentences) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open for writing: " + path.string());
  for (const auto& s : sentences) out << sentence_to_json(s) << '\n';
}

std::vector<AnnotatedSentence> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open: " + path.string());
  std::vector<AnnotatedSentence> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      AnnotatedSentence s = sentence_from_json(line);
      validate(s);
      out.push_back(std::move(s));
    } catch (const Error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": " + e.what());
    }
  }
  return out;
}

}  // namespace dip
