#include <algorithm>
#include <string>
#include <vector>

#include "dip/corpus.hpp"
#include "dip/rng.hpp"

namespace dip {
namespace {

// Base word pools for the templated grammar. When a spec needs more words
// than the lists carry, numbered forms are synthesized.
const char* kVerbs[] = {
    "built",   "lost",    "signed",   "opened",  "moved",   "took",
    "began",   "voted",   "filed",    "pushed",  "planned", "hired",
    "asked",   "used",    "reached",  "left",    "came",    "won",
    "sold",    "bought",  "raised",   "cut",     "met",     "paid",
    "ran",     "held",    "made",     "set",     "put",     "got",
    "backed",  "led",     "joined",   "named",   "chose",   "found",
    "kept",    "sent",    "told",     "saw",     "drew",    "wrote",
    "gave",    "heard",   "spent",    "broke",   "drove",   "laid"};

const char* kNouns[] = {
    "council", "city",    "company", "workers", "judge",   "mayor",
    "board",   "union",   "firm",    "agency",  "court",   "bank",
    "state",   "team",    "group",   "office",  "panel",   "senate",
    "house",   "police",  "school",  "fund",    "plant",   "market",
    "paper",   "deal",    "plan",    "bill",    "report",  "project",
    "budget",  "permit",  "lease",   "survey",  "merger",  "strike",
    "ballot",  "grant",   "audit",   "charter"};

const char* kDets[] = {"the", "a", "their"};
const char* kConns[] = {"after", "because", "once", "when"};

class WordSource {
 public:
  WordSource(const char* const* base, size_t base_count, std::string prefix)
      : base_(base), base_count_(base_count), prefix_(std::move(prefix)) {}

  std::string next() {
    if (cursor_ < base_count_) return base_[cursor_++];
    return prefix_ + std::to_string(cursor_++ - base_count_);
  }

 private:
  const char* const* base_;
  size_t base_count_;
  std::string prefix_;
  size_t cursor_ = 0;
};

std::vector<std::string> take(WordSource& src, int n) {
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(src.next());
  return out;
}

template <typename T>
const T& pick(const std::vector<T>& pool, Rng& rng) {
  return pool[static_cast<size_t>(rng() % pool.size())];
}

struct Grammar {
  std::vector<std::string> targets;                       // one verb per type
  std::vector<std::vector<std::string>> preconds;         // per target
  std::vector<std::vector<std::string>> temporal_only;    // per target
  std::vector<std::string> subjects;
  std::vector<std::vector<std::string>> target_objects;   // per target
  std::vector<std::vector<std::string>> trigger_objects;  // per precond verb
  std::vector<std::string> shared_objects;                // temporal clauses
  std::vector<std::string> modifiers;                     // one per target
  std::vector<std::string> dets;
  std::vector<std::string> conns;
  std::vector<std::string> extras;

  const std::vector<std::string>& objects_for(const std::string& trigger) const {
    for (size_t t = 0; t < preconds.size(); ++t) {
      for (size_t j = 0; j < preconds[t].size(); ++j) {
        if (preconds[t][j] == trigger) {
          return trigger_objects[t * preconds[t].size() + j];
        }
      }
    }
    return shared_objects;
  }
};

constexpr int kTemporalPerTarget = 2;
constexpr int kNumSubjects = 6;
constexpr int kTargetObjects = 2;
constexpr int kTriggerObjects = 2;
constexpr int kSharedObjects = 6;
constexpr int kMinExtras = 8;
constexpr int kMaxExtras = 24;
constexpr int kDominantMultiplier = 4;

Grammar build_grammar(const SyntheticCorpusSpec& spec) {
  const int nt = spec.num_target_types;
  const int ppt = spec.preconditions_per_target;

  const int required = tok::kNumSpecial +
                       nt * (2 + ppt + kTemporalPerTarget) + kNumSubjects +
                       nt * kTargetObjects + nt * ppt * kTriggerObjects +
                       kSharedObjects + kMinExtras +
                       static_cast<int>(std::size(kDets)) +
                       static_cast<int>(std::size(kConns));
  if (spec.vocab_size < required) {
    throw InfeasibleSpecError(
        "vocab_size " + std::to_string(spec.vocab_size) +
        " too small for requested trigger types; need at least " +
        std::to_string(required));
  }

  WordSource verbs(kVerbs, std::size(kVerbs), "verb");
  WordSource nouns(kNouns, std::size(kNouns), "noun");

  Grammar g;
  g.targets = take(verbs, nt);
  for (int t = 0; t < nt; ++t) g.preconds.push_back(take(verbs, ppt));
  for (int t = 0; t < nt; ++t) {
    g.temporal_only.push_back(take(verbs, kTemporalPerTarget));
  }
  g.subjects = take(nouns, kNumSubjects);
  for (int t = 0; t < nt; ++t) {
    g.target_objects.push_back(take(nouns, kTargetObjects));
  }
  for (int t = 0; t < nt; ++t) {
    for (int j = 0; j < ppt; ++j) {
      g.trigger_objects.push_back(take(nouns, kTriggerObjects));
    }
  }
  g.shared_objects = take(nouns, kSharedObjects);
  g.modifiers = take(nouns, nt);
  g.dets.assign(std::begin(kDets), std::end(kDets));
  g.conns.assign(std::begin(kConns), std::end(kConns));

  const int leftover = spec.vocab_size - required;
  g.extras = take(nouns, std::min(kMinExtras + leftover, kMaxExtras));
  return g;
}

struct Clause {
  std::vector<std::string> tokens;
  int trigger = 0;  // offset within the clause
};

Clause target_clause(const Grammar& g, int t, Rng& rng) {
  Clause c;
  c.tokens = {pick(g.subjects, rng), g.targets[static_cast<size_t>(t)],
              pick(g.target_objects[static_cast<size_t>(t)], rng)};
  c.trigger = 1;
  return c;
}

// Trigger-initial related clause [verb det obj mod extra]: variation sits
// late in the clause, so near-duplicate generations share long prefixes.
Clause related_clause(const Grammar& g, int t, const std::string& trigger,
                      Rng& rng) {
  Clause c;
  c.tokens = {trigger, pick(g.dets, rng), pick(g.objects_for(trigger), rng),
              g.modifiers[static_cast<size_t>(t)], pick(g.extras, rng)};
  c.trigger = 0;
  return c;
}

AnnotatedSentence make_sentence(const Grammar& g, int t,
                                const std::string& trigger, RelationKind kind,
                                std::optional<bool> label, int serial,
                                Rng& rng) {
  const Clause tc = target_clause(g, t, rng);
  const Clause rc = related_clause(g, t, trigger, rng);
  const std::string conn = pick(g.conns, rng);
  const bool target_first = rng() % 2 == 0;

  AnnotatedSentence s;
  char buf[16];
  std::snprintf(buf, sizeof(buf), "syn-%06d", serial);
  s.id = buf;
  s.kind = kind;
  s.label = label;

  const Clause& first = target_first ? tc : rc;
  const Clause& second = target_first ? rc : tc;
  s.tokens = first.tokens;
  s.tokens.push_back(conn);
  const int offset = static_cast<int>(first.tokens.size()) + 1;
  s.tokens.insert(s.tokens.end(), second.tokens.begin(), second.tokens.end());

  Span first_span{0, static_cast<int>(first.tokens.size()), first.trigger};
  Span second_span{offset, offset + static_cast<int>(second.tokens.size()),
                   offset + second.trigger};
  s.target = target_first ? first_span : second_span;
  s.precondition = target_first ? second_span : first_span;
  return s;
}

}  // namespace

std::vector<AnnotatedSentence> synth_corpus(const SyntheticCorpusSpec& spec) {
  if (spec.num_target_types < 1 || spec.preconditions_per_target < 1 ||
      spec.templates_per_pair < 1 || spec.vocab_size < 1) {
    throw InfeasibleSpecError("all synthetic-corpus counts must be >= 1");
  }
  const Grammar g = build_grammar(spec);
  Rng rng(spec.seed);

  std::vector<AnnotatedSentence> out;
  int serial = 0;

  // Generation records. The first precondition of every target is
  // oversampled so argmax-style decoding concentrates on it.
  for (int t = 0; t < spec.num_target_types; ++t) {
    for (int j = 0; j < spec.preconditions_per_target; ++j) {
      const int copies =
          spec.templates_per_pair * (j == 0 ? kDominantMultiplier : 1);
      for (int m = 0; m < copies; ++m) {
        out.push_back(make_sentence(g, t, g.preconds[t][j],
                                    RelationKind::precondition, std::nullopt,
                                    serial++, rng));
      }
    }
  }

  // Permissive temporally-preceding records for pretraining: valid
  // preconditions plus extra temporal-only triggers.
  for (int t = 0; t < spec.num_target_types; ++t) {
    std::vector<std::string> temporal = g.preconds[t];
    temporal.insert(temporal.end(), g.temporal_only[t].begin(),
                    g.temporal_only[t].end());
    for (const auto& trigger : temporal) {
      for (int m = 0; m < spec.templates_per_pair; ++m) {
        out.push_back(make_sentence(g, t, trigger,
                                    RelationKind::temporal_before, std::nullopt,
                                    serial++, rng));
      }
    }
  }

  // Classifier records: positives reuse valid pairs; negatives pair the
  // target with a same-corpus trigger that is not one of its preconditions.
  for (int t = 0; t < spec.num_target_types; ++t) {
    for (int j = 0; j < spec.preconditions_per_target; ++j) {
      for (int m = 0; m < spec.templates_per_pair; ++m) {
        out.push_back(make_sentence(g, t, g.preconds[t][j],
                                    RelationKind::precondition, true, serial++,
                                    rng));
        std::string negative;
        if (rng() % 2 == 0 || spec.num_target_types == 1) {
          negative = pick(g.temporal_only[t], rng);
        } else {
          int other = static_cast<int>(rng() % (spec.num_target_types - 1));
          if (other >= t) ++other;
          negative = pick(g.preconds[other], rng);
        }
        out.push_back(make_sentence(g, t, negative, RelationKind::precondition,
                                    false, serial++, rng));
      }
    }
  }

  return out;
}

}  // namespace dip
