#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "dip/corpus.hpp"
#include "dip/embedder.hpp"
#include "dip/error.hpp"
#include "dip/metrics.hpp"
#include "dip/model.hpp"
#include "dip/pipeline.hpp"
#include "dip/ranker.hpp"
#include "dip/rng.hpp"

namespace dip::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Exclusive lock file guarding an output directory against concurrent
/// writers. Removed on scope exit.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    fs::create_directories(dir);
    path_ = dir / ".dip.lock";
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
      throw ConfigError("output directory " + dir.string() +
                        " is locked by another command (remove " +
                        path_.string() + " if that command died)");
    }
    ::close(fd);
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
};

int guard(int data_exit_code, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "model format error: " << e.what() << "\n";
    return kExitModelFormat;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return data_exit_code;
  }
}

/// Lenient JSONL read that reports up to the first 10 offending records.
std::vector<AnnotatedSentence> read_corpus_strict(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus: " + path.string());
  std::vector<AnnotatedSentence> records;
  std::vector<std::string> problems;
  size_t bad = 0;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      AnnotatedSentence s = sentence_from_json(line);
      validate(s);
      records.push_back(std::move(s));
    } catch (const Error& e) {
      ++bad;
      if (problems.size() < 10) {
        problems.push_back(path.filename().string() + ":" +
                           std::to_string(lineno) + ": " + e.what());
      }
    }
  }
  if (bad > 0) {
    std::ostringstream oss;
    oss << bad << " bad record(s), first " << problems.size() << ":";
    for (const auto& p : problems) oss << "\n  " << p;
    throw ValidationError(oss.str());
  }
  return records;
}

Vocab vocab_from_records(const std::vector<const std::vector<AnnotatedSentence>*>&
                             record_sets) {
  std::set<std::string> words;
  for (const auto* records : record_sets) {
    for (const auto& s : *records) {
      for (const auto& t : s.tokens) words.insert(t);
    }
  }
  return Vocab(std::vector<std::string>(words.begin(), words.end()));
}

TokenSeq infill_sequence(const Vocab& vocab, const InfillingInstance& inst) {
  TokenSeq seq = vocab.encode(inst.input_tokens);
  seq.push_back(tok::kSep);
  const TokenSeq output = vocab.encode(inst.output_tokens);
  seq.insert(seq.end(), output.begin(), output.end());
  seq.push_back(tok::kEos);
  return seq;
}

TokenSeq trigger_sequence(const Vocab& vocab, const TriggerPairInstance& pair) {
  TokenSeq seq = vocab.encode(pair.reduced_context);
  seq.push_back(tok::kSep);
  seq.push_back(vocab.id(pair.precondition_trigger));
  seq.push_back(tok::kEos);
  return seq;
}

bool is_generation_record(const AnnotatedSentence& s) {
  return !s.label.has_value() && s.precondition.has_value();
}

json read_meta_if_present(const fs::path& run_file) {
  fs::path meta = run_file;
  meta.replace_extension(".meta.json");
  if (!fs::exists(meta)) return json(nullptr);
  std::ifstream in(meta);
  try {
    return json::parse(in);
  } catch (const json::exception&) {
    return json(nullptr);
  }
}

std::string window_label(int window) {
  if (window == 0) return "trigger only";
  return "+-" + std::to_string(window) + " tokens";
}

}  // namespace

// --- synth -------------------------------------------------------------------

int cmd_synth(const SynthOptions& options) {
  return guard(kExitData, [&] {
    SyntheticCorpusSpec spec;
    spec.num_target_types = options.targets;
    spec.preconditions_per_target = options.preconditions;
    spec.templates_per_pair = options.templates;
    spec.vocab_size = options.vocab;
    spec.seed = options.seed;

    const std::vector<AnnotatedSentence> all = synth_corpus(spec);
    std::vector<AnnotatedSentence> main_records;
    std::vector<AnnotatedSentence> temporal_records;
    for (const auto& s : all) {
      (s.kind == RelationKind::temporal_before ? temporal_records : main_records)
          .push_back(s);
    }

    if (options.pretrain_out) {
      write_jsonl(options.out, main_records);
      write_jsonl(*options.pretrain_out, temporal_records);
    } else {
      write_jsonl(options.out, all);
    }
    std::cout << "wrote " << main_records.size() << " precondition records";
    if (options.pretrain_out) {
      std::cout << " to " << options.out << " and " << temporal_records.size()
                << " temporal records to " << *options.pretrain_out;
    } else {
      std::cout << " and " << temporal_records.size() << " temporal records to "
                << options.out;
    }
    std::cout << "\n";
  });
}

// --- train -------------------------------------------------------------------

int cmd_train(const TrainOptions& options) {
  return guard(kExitData, [&] {
    for (int w : options.windows) {
      if (w != 0 && w != 3 && w != 5) {
        throw ConfigError("windows: entries must be in {0, 3, 5}");
      }
    }

    const std::vector<AnnotatedSentence> corpus =
        read_corpus_strict(options.corpus);
    std::vector<AnnotatedSentence> pretrain;
    if (options.pretrain) {
      pretrain = read_corpus_strict(*options.pretrain);
    } else if (options.pretrain_weight != 0.0) {
      throw ConfigError(
          "pretrain: corpus required unless --pretrain-weight is 0");
    }

    const Vocab vocab = vocab_from_records({&corpus, &pretrain});

    // Training views. Generation records feed the sequence models; labeled
    // records feed the ranker. Only the train split is used for fitting.
    std::vector<const AnnotatedSentence*> fine_gen;
    std::vector<const AnnotatedSentence*> ranker_train;
    std::vector<const AnnotatedSentence*> ranker_dev;
    for (const auto& s : corpus) {
      const Split split = split_of(s.id);
      if (is_generation_record(s) && split == Split::train) {
        fine_gen.push_back(&s);
      }
      if (s.label.has_value()) {
        if (split == Split::train) ranker_train.push_back(&s);
        if (split == Split::dev) ranker_dev.push_back(&s);
      }
    }
    std::vector<const AnnotatedSentence*> pre_gen;
    for (const auto& s : pretrain) {
      if (is_generation_record(s) && split_of(s.id) == Split::train) {
        pre_gen.push_back(&s);
      }
    }
    if (fine_gen.empty()) {
      throw ValidationError("corpus has no generation records in the train split");
    }

    auto build_infill = [&](const std::vector<const AnnotatedSentence*>& records,
                            bool control) {
      std::vector<TokenSeq> seqs;
      seqs.reserve(records.size());
      for (const auto* s : records) {
        seqs.push_back(infill_sequence(vocab, build_infilling_instance(*s, control)));
      }
      return seqs;
    };
    auto build_pairs = [&](const std::vector<const AnnotatedSentence*>& records,
                           int window) {
      std::vector<TokenSeq> seqs;
      seqs.reserve(records.size());
      for (const auto* s : records) {
        seqs.push_back(trigger_sequence(vocab, build_trigger_pair(*s, window)));
      }
      return seqs;
    };

    NGramConfig gen_cfg;
    gen_cfg.order = options.generator_order;
    gen_cfg.add_k = options.add_k;
    gen_cfg.copy_bias = options.gamma;
    gen_cfg.pretrain_weight = options.pretrain_weight;

    NGramConfig infill_cfg = gen_cfg;
    infill_cfg.copy_bias = 0.0;  // plain infilling model, no control codes

    NGramConfig sampler_cfg = gen_cfg;
    sampler_cfg.order = options.sampler_order;
    sampler_cfg.copy_bias = 0.0;

    const NGramModel generator = train_ngram(
        build_infill(pre_gen, true), build_infill(fine_gen, true), vocab, gen_cfg);
    const NGramModel infill = train_ngram(build_infill(pre_gen, false),
                                          build_infill(fine_gen, false), vocab,
                                          infill_cfg);
    std::vector<std::pair<int, NGramModel>> samplers;
    for (int w : options.windows) {
      samplers.emplace_back(
          w, train_ngram(build_pairs(pre_gen, w), build_pairs(fine_gen, w),
                         vocab, sampler_cfg));
    }

    std::vector<AnnotatedSentence> ranker_data;
    for (const auto* s : ranker_train) ranker_data.push_back(*s);
    const RankerModel ranker = train_ranker(ranker_data);

    std::vector<AnnotatedSentence> dev_data;
    for (const auto* s : ranker_dev) dev_data.push_back(*s);
    RankerEval dev_eval;
    if (!dev_data.empty()) dev_eval = evaluate_ranker(ranker, dev_data);

    // All fitting succeeded; only now touch the output directory.
    DirLock lock(options.out);
    persist(generator, options.out / "generator");
    persist(infill, options.out / "infill");
    for (const auto& [w, model] : samplers) {
      persist(model, options.out / ("sampler_w" + std::to_string(w)));
    }
    persist_ranker(ranker, options.out / "ranker.json");

    json manifest;
    manifest["format_version"] = kModelFormatVersion;
    manifest["seed"] = options.seed;
    manifest["components"] = json::array();
    manifest["components"].push_back("generator");
    manifest["components"].push_back("infill");
    for (const auto& [w, model] : samplers) {
      manifest["components"].push_back("sampler_w" + std::to_string(w));
    }
    manifest["components"].push_back("ranker");
    json cfg;
    cfg["sampler_order"] = options.sampler_order;
    cfg["generator_order"] = options.generator_order;
    cfg["add_k"] = options.add_k;
    cfg["gamma"] = options.gamma;
    cfg["pretrain_weight"] = options.pretrain_weight;
    manifest["config"] = std::move(cfg);
    std::ofstream mf(options.out / "manifest.json");
    mf << manifest.dump(2) << '\n';

    if (!options.quiet) {
      std::cout << "trained " << samplers.size()
                << " sampler(s), generator, infill, ranker (dev F1 ";
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.4f", dev_eval.f1);
      std::cout << buf << ") -> " << options.out << "\n";
    }
  });
}

// --- generate ------------------------------------------------------------------

namespace {

struct LoadedModels {
  std::unique_ptr<SequenceModel> sampler;
  std::unique_ptr<SequenceModel> generator;
  std::unique_ptr<SequenceModel> infill;
  std::optional<RankerModel> ranker;
  std::unique_ptr<CooccurrenceEmbedder> embedder;
};

LoadedModels load_for_strategy(const GenerateOptions& options) {
  LoadedModels loaded;
  const fs::path& dir = options.models;
  const bool needs_post =
      options.strategy == "dip" || options.strategy == "rps_post";

  if (options.strategy == "dip") {
    loaded.sampler =
        load_model(dir / ("sampler_w" + std::to_string(options.window)));
    loaded.generator = load_model(dir / "generator");
  } else {
    loaded.infill = load_model(dir / "infill");
  }
  if (needs_post) {
    loaded.ranker = load_ranker(dir / "ranker.json");
    // The embedder reads co-occurrence rows off the control-code generator.
    if (!loaded.generator) loaded.generator = load_model(dir / "generator");
    const auto* ngram = dynamic_cast<const NGramModel*>(loaded.generator.get());
    if (!ngram) {
      throw FormatError("generator model is not an n-gram model; cannot "
                        "build the co-occurrence embedder");
    }
    loaded.embedder = std::make_unique<CooccurrenceEmbedder>(*ngram);
  }
  return loaded;
}

}  // namespace

int cmd_generate(const GenerateOptions& options) {
  return guard(kExitData, [&] {
    const std::set<std::string> strategies = {"beam", "rps", "rps_post", "dip"};
    if (!strategies.count(options.strategy)) {
      throw ConfigError("strategy: must be one of beam, rps, rps_post, dip");
    }
    if (options.threads < 1) throw ConfigError("threads: must be >= 1");

    const LoadedModels loaded = load_for_strategy(options);

    const std::vector<AnnotatedSentence> corpus =
        read_corpus_strict(options.corpus);
    std::vector<const AnnotatedSentence*> targets;
    for (const auto& s : corpus) {
      if (s.kind == RelationKind::precondition && is_generation_record(s) &&
          split_of(s.id) == Split::test) {
        targets.push_back(&s);
      }
    }
    if (options.limit > 0 &&
        targets.size() > static_cast<size_t>(options.limit)) {
      targets.resize(static_cast<size_t>(options.limit));
    }
    if (targets.empty()) {
      throw ValidationError("no test-split generation targets in corpus");
    }

    DecodeConfig decode;
    decode.max_len = options.max_len;
    decode.beam_width = options.beam_k;
    decode.nucleus_p = options.nucleus_p;
    decode.lambda = options.lambda;
    decode.seed = options.seed;
    decode.validate();

    SamplerConfig sampler_cfg;
    sampler_cfg.window = options.window;
    sampler_cfg.num_triggers = options.num_triggers;

    PostConfig post;
    post.top_k = options.top_k;

    RpsConfig rps;
    rps.num_iterations = options.num_iterations;

    PipelineModels models;
    models.sampler = loaded.sampler.get();
    models.generator = options.strategy == "dip" ? loaded.generator.get()
                                                 : loaded.infill.get();
    models.ranker = loaded.ranker ? &*loaded.ranker : nullptr;
    models.embedder = loaded.embedder.get();

    std::vector<RunRecord> records(targets.size());
    std::atomic<size_t> cursor{0};
    auto worker = [&] {
      for (;;) {
        const size_t i = cursor.fetch_add(1);
        if (i >= targets.size()) break;
        const AnnotatedSentence& target = *targets[i];
        Rng rng(derive_seed(options.seed, target.id));
        if (options.strategy == "dip") {
          records[i] = run_dip(models, target, sampler_cfg, decode, post, rng);
        } else if (options.strategy == "rps") {
          records[i] = run_rps(models, target, rps, decode, post, rng);
        } else if (options.strategy == "rps_post") {
          records[i] = run_rps_plus_post(models, target, rps, decode, post, rng);
        } else {
          records[i] = run_beam(models, target, decode, post);
        }
      }
    };
    if (options.threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < options.threads; ++t) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    DirLock lock(options.out);
    const fs::path run_file = options.out / (options.strategy + ".jsonl");
    write_run_records(run_file, records);

    json meta;
    meta["strategy"] = options.strategy;
    meta["window"] = options.window;
    meta["seed"] = options.seed;
    meta["top_k"] = options.top_k;
    meta["num_triggers"] = options.num_triggers;
    meta["beam_k"] = options.beam_k;
    meta["nucleus_p"] = options.nucleus_p;
    meta["lambda"] = options.lambda;
    meta["max_len"] = options.max_len;
    meta["num_iterations"] = options.num_iterations;
    meta["targets"] = targets.size();
    std::ofstream mf(options.out / (options.strategy + ".meta.json"));
    mf << meta.dump(2) << '\n';

    size_t shortfalls = 0;
    size_t empty_runs = 0;
    for (const auto& r : records) {
      if (r.sampler_shortfall) ++shortfalls;
      if (r.candidates.empty()) ++empty_runs;
    }
    if (shortfalls > 0) {
      std::cerr << "warning: sampler returned fewer triggers than requested on "
                << shortfalls << " target(s)\n";
    }
    if (empty_runs > 0) {
      std::cerr << "warning: " << empty_runs
                << " target(s) produced no surviving candidates\n";
    }

    if (!options.quiet) {
      std::cout << "wrote " << records.size() << " run records -> " << run_file
                << "\n";
    }
  });
}

// --- evaluate / compare ---------------------------------------------------------

namespace {

struct RunEvaluation {
  std::string label;
  std::string strategy;
  int window = -1;
  DiversityReport report;
};

std::vector<RunEvaluation> evaluate_runs(
    const std::vector<fs::path>& run_files, const fs::path& models_dir,
    const std::string& mode, bool allow_ragged) {
  const auto generator = load_model(models_dir / "generator");
  const auto* ngram = dynamic_cast<const NGramModel*>(generator.get());
  if (!ngram) {
    throw FormatError("generator model is not an n-gram model; cannot build "
                      "the co-occurrence pair scorer");
  }
  const CooccurrenceEmbedder embedder(*ngram);
  const PairScorer scorer = [&embedder](std::span<const std::string> a,
                                        std::span<const std::string> b) {
    const std::vector<std::string> va(a.begin(), a.end());
    const std::vector<std::string> vb(b.begin(), b.end());
    return cosine(embedder.embed(va), embedder.embed(vb));
  };

  ReportConfig config;
  config.mode = self_bleu_mode_from_string(mode);
  config.allow_ragged = allow_ragged;
  config.scorer_name = "cosine-ngram-cooc";

  std::vector<RunEvaluation> out;
  for (const auto& file : run_files) {
    const std::vector<RunRecord> records = read_run_records(file);
    if (records.empty()) {
      throw ValidationError("run file has no records: " + file.string());
    }
    std::vector<CandidateSetView> sets;
    for (const auto& r : records) {
      CandidateSetView view;
      view.id = r.id;
      for (const auto& c : r.candidates) {
        if (c.kept) view.texts.push_back(c.text);
      }
      sets.push_back(std::move(view));
    }

    RunEvaluation eval;
    eval.strategy = records.front().strategy;
    const json meta = read_meta_if_present(file);
    if (meta.is_object() && meta.contains("window")) {
      eval.window = meta["window"].get<int>();
    }
    eval.label = eval.strategy;
    if (eval.strategy == "dip" && eval.window >= 0) {
      eval.label += " (" + window_label(eval.window) + ")";
    }
    eval.report = diversity_report(sets, scorer, config);
    out.push_back(std::move(eval));
  }
  return out;
}

void write_comparison(const fs::path& out_dir,
                      const std::vector<RunEvaluation>& evals,
                      const std::string& filename) {
  std::vector<std::pair<std::string, DiversityReport>> labeled;
  json rows = json::array();
  for (const auto& e : evals) {
    labeled.emplace_back(e.label, e.report);
    json row;
    row["label"] = e.label;
    row["strategy"] = e.strategy;
    row["window"] = e.window >= 0 ? json(e.window) : json(nullptr);
    row["self_bleu"] = e.report.mean_self_bleu;
    row["self_sim"] = e.report.mean_self_sim;
    rows.push_back(std::move(row));
  }
  std::ofstream md(out_dir / (filename + ".md"));
  md << reports_to_markdown(labeled);
  json j;
  j["rows"] = std::move(rows);
  std::ofstream js(out_dir / (filename + ".json"));
  js << j.dump(2) << '\n';

  // Context ablation rows whenever several dip windows are present.
  std::vector<RunEvaluation> dips;
  for (const auto& e : evals) {
    if (e.strategy == "dip" && e.window >= 0) dips.push_back(e);
  }
  if (dips.size() > 1) {
    std::sort(dips.begin(), dips.end(),
              [](const RunEvaluation& a, const RunEvaluation& b) {
                return a.window < b.window;
              });
    std::vector<std::pair<std::string, DiversityReport>> ablation;
    for (const auto& e : dips) {
      ablation.emplace_back(window_label(e.window), e.report);
    }
    std::ofstream amd(out_dir / "context_ablation.md");
    amd << reports_to_markdown(ablation);
  }
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& options) {
  return guard(kExitEvalInput, [&] {
    if (options.runs.empty()) throw ConfigError("runs: at least one run file");
    const std::vector<RunEvaluation> evals = evaluate_runs(
        options.runs, options.models, options.self_bleu_mode,
        options.allow_ragged);

    DirLock lock(options.out);
    for (const auto& e : evals) {
      std::string name = e.strategy;
      if (e.strategy == "dip" && e.window > 0) {
        name += "_w" + std::to_string(e.window);
      }
      std::ofstream out(options.out / (name + "_report.json"));
      out << report_to_json(e.report) << '\n';
    }
    write_comparison(options.out, evals, "comparison");
    if (!options.quiet) {
      std::cout << "evaluated " << evals.size() << " run file(s) -> "
                << options.out << "\n";
    }
  });
}

int cmd_compare(const CompareOptions& options) {
  return guard(kExitEvalInput, [&] {
    if (options.runs.size() < 2) {
      throw ConfigError("runs: compare needs at least two run files");
    }
    const std::vector<RunEvaluation> evals = evaluate_runs(
        options.runs, options.models, options.self_bleu_mode,
        options.allow_ragged);

    DirLock lock(options.out);
    write_comparison(options.out, evals, "comparison");
    if (!options.quiet) {
      std::cout << "compared " << evals.size() << " run file(s) -> "
                << options.out << "\n";
    }
  });
}

}  // namespace dip::cli
