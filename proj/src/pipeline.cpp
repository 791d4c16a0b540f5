#include "sensery/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "sensery/error.hpp"
#include "sensery/model_io.hpp"

namespace sensery {

namespace {

using Json = nlohmann::ordered_json;

// Independent streams for the stages that draw random numbers.
enum class Stream : std::uint64_t { Tasks = 0, Split = 1, TrainSentences = 2, TestSentences = 3, Model = 4 };

std::uint64_t stream_seed(std::uint64_t seed, Stream s) {
  return seed + static_cast<std::uint64_t>(s);
}

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (...) {
    rethrow_with_context(std::string("stage ") + name);
  }
}

int idx(Sense s) { return static_cast<int>(s); }

PerSense<std::string> per_sense_paths(const Json& v, const char* key) {
  if (v.is_string()) return {v.get<std::string>(), v.get<std::string>()};
  if (!v.is_object()) throw ValidationError(std::string(key) + " must be a path or a per-sense object");
  PerSense<std::string> out;
  for (Sense s : kAllSenses) out[idx(s)] = v.at(std::string(sense_name(s))).get<std::string>();
  return out;
}

Json per_sense_json(const PerSense<std::string>& v) {
  if (v[0] == v[1]) return v[0];
  Json j;
  for (Sense s : kAllSenses) j[std::string(sense_name(s))] = v[idx(s)];
  return j;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) throw ValidationError(std::string(where) + ": unknown key '" + item.key() + "'");
  }
}

TaggerSpec tagger_from_json(const Json& j) {
  check_keys(j, {"kind", "epochs", "step", "l2", "batch_size", "variant", "dims", "clip",
                 "teacher_forcing", "max_pretrained_words"},
             "model");
  TaggerSpec t;
  t.kind = parse_model_kind(j.value("kind", std::string("crf")));
  if (t.kind == ModelKind::Crf) {
    t.crf.epochs = j.value("epochs", t.crf.epochs);
    t.crf.step = j.value("step", t.crf.step);
    t.crf.l2 = j.value("l2", t.crf.l2);
    t.crf.batch_size = j.value("batch_size", t.crf.batch_size);
  } else {
    t.variant = NeuralVariant::parse(j.value("variant", std::string("or,char")));
    t.neural.epochs = j.value("epochs", t.neural.epochs);
    t.neural.step = j.value("step", t.neural.step);
    t.neural.clip = j.value("clip", t.neural.clip);
    t.neural.batch_size = j.value("batch_size", t.neural.batch_size);
    t.neural.teacher_forcing = j.value("teacher_forcing", t.neural.teacher_forcing);
    t.max_pretrained_words = j.value("max_pretrained_words", t.max_pretrained_words);
    if (j.contains("dims")) {
      const Json& d = j.at("dims");
      check_keys(d, {"word_dim", "window_hidden", "char_dim", "char_hidden", "window"}, "model.dims");
      t.dims.word_dim = d.value("word_dim", t.dims.word_dim);
      t.dims.window_hidden = d.value("window_hidden", t.dims.window_hidden);
      t.dims.char_dim = d.value("char_dim", t.dims.char_dim);
      t.dims.char_hidden = d.value("char_hidden", t.dims.char_hidden);
      t.dims.window = d.value("window", t.dims.window);
    }
  }
  return t;
}

Json tagger_to_json(const TaggerSpec& t) {
  Json j;
  j["kind"] = model_kind_name(t.kind);
  if (t.kind == ModelKind::Crf) {
    j["epochs"] = t.crf.epochs;
    j["step"] = t.crf.step;
    j["l2"] = t.crf.l2;
    j["batch_size"] = t.crf.batch_size;
  } else {
    j["variant"] = t.variant.name();
    j["epochs"] = t.neural.epochs;
    j["step"] = t.neural.step;
    j["clip"] = t.neural.clip;
    j["batch_size"] = t.neural.batch_size;
    j["teacher_forcing"] = t.neural.teacher_forcing;
    j["max_pretrained_words"] = t.max_pretrained_words;
    j["dims"] = {{"word_dim", t.dims.word_dim},
                 {"window_hidden", t.dims.window_hidden},
                 {"char_dim", t.dims.char_dim},
                 {"char_hidden", t.dims.char_hidden},
                 {"window", t.dims.window}};
  }
  return j;
}

std::vector<LabeledPhrase> of_sense(std::span<const LabeledPhrase> phrases, Sense s) {
  std::vector<LabeledPhrase> out;
  for (const LabeledPhrase& p : phrases) {
    if (p.sense == s) out.push_back(p);
  }
  return out;
}

Json summary_json(const SenseSummary& s) {
  Json j{{"tasks", s.tasks}, {"accepted", s.accepted}, {"majority_yes", round2(s.majority_yes)}};
  if (s.kappa) {
    j["kappa"] = std::round(*s.kappa * 1e4) / 1e4;
  } else {
    j["kappa"] = nullptr;
    j["kappa_error"] = s.kappa_error;
  }
  j["notsure"] = s.notsure;
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::filesystem::path PipelineConfig::resolve(const std::string& p) const {
  const std::filesystem::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

PipelineConfig PipelineConfig::from_json(const Json& j, const std::filesystem::path& base_dir) {
  try {
    check_keys(j, {"corpus", "embeddings", "responses", "stoplist", "templates_train",
                   "templates_test", "seed", "annotators", "per_sense", "test_per_sense", "alpha",
                   "sentences_per_phrase", "corpus_context", "model"},
               "config");
    PipelineConfig c;
    c.base_dir = base_dir;
    c.corpus = j.at("corpus").get<std::string>();
    c.embeddings = j.at("embeddings").get<std::string>();
    c.responses = j.at("responses").get<std::string>();
    c.stoplist = j.value("stoplist", std::string());
    c.templates_train = per_sense_paths(j.at("templates_train"), "templates_train");
    c.templates_test = per_sense_paths(j.at("templates_test"), "templates_test");
    c.seed = j.value("seed", c.seed);
    c.annotators = j.value("annotators", c.annotators);
    c.per_sense = j.value("per_sense", c.per_sense);
    c.test_per_sense = j.value("test_per_sense", c.test_per_sense);
    if (j.contains("alpha")) {
      const Json& a = j.at("alpha");
      if (a.is_number()) {
        c.alpha = {a.get<double>(), a.get<double>()};
      } else {
        for (Sense s : kAllSenses) {
          c.alpha[idx(s)] = a.value(std::string(sense_name(s)), c.alpha[idx(s)]);
        }
      }
    }
    c.sentences_per_phrase = j.value("sentences_per_phrase", c.sentences_per_phrase);
    c.corpus_context = j.value("corpus_context", c.corpus_context);
    if (j.contains("model")) c.tagger = tagger_from_json(j.at("model"));
    c.tagger.set_seed(stream_seed(c.seed, Stream::Model));

    if (c.annotators < 1 || c.per_sense < 1 || c.test_per_sense < 0 || c.sentences_per_phrase < 1) {
      throw ValidationError("config: counts must be positive");
    }
    for (double a : c.alpha) {
      if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("config: alpha must be in [0, 1]");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.parent_path());
}

Json PipelineConfig::to_json() const {
  Json j;
  j["corpus"] = corpus;
  j["embeddings"] = embeddings;
  j["responses"] = responses;
  if (!stoplist.empty()) j["stoplist"] = stoplist;
  j["templates_train"] = per_sense_json(templates_train);
  j["templates_test"] = per_sense_json(templates_test);
  j["seed"] = seed;
  j["annotators"] = annotators;
  j["per_sense"] = per_sense;
  j["test_per_sense"] = test_per_sense;
  j["alpha"] = {{"audible", alpha[0]}, {"olfactible", alpha[1]}};
  j["sentences_per_phrase"] = sentences_per_phrase;
  j["corpus_context"] = corpus_context;
  j["model"] = tagger_to_json(tagger);
  return j;
}

PreparedData prepare_data(const PipelineConfig& config, const std::filesystem::path& run_dir) {
  const bool write = !run_dir.empty();
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(run_dir, ec);
    if (ec) throw IoError("cannot create run directory " + run_dir.string() + ": " + ec.message());
    write_json_file(run_dir / "config.json", config.to_json());
  }
  PreparedData d;

  stage("extract", [&] {
    const StopList stop =
        config.stoplist.empty() ? StopList::load_default() : StopList::load(config.resolve(config.stoplist));
    d.extraction = scan_corpus(config.resolve(config.corpus), default_patterns(), stop);
    if (write) write_phrases(run_dir / "phrases.jsonl", d.extraction.phrases);
    if (config.corpus_context) {
      std::ifstream in(config.resolve(config.corpus), std::ios::binary);
      std::string line;
      while (std::getline(in, line)) {
        auto toks = tokenize(line);
        if (!toks.empty()) d.corpus_sentences.push_back(std::move(toks));
      }
    }
  });

  stage("annotate", [&] {
    d.tasks = build_tasks(d.extraction.phrases, config.per_sense, config.annotators,
                          stream_seed(config.seed, Stream::Tasks));
    std::set<std::string> ids;
    for (const AnnotationTask& t : d.tasks) ids.insert(t.task_id);
    std::vector<AnnotationResponse> kept;
    std::vector<AnnotationResponse> all = read_responses(config.resolve(config.responses));
    for (AnnotationResponse& r : all) {
      if (ids.contains(r.task_id)) {
        kept.push_back(std::move(r));
      } else {
        ++d.ignored_responses;
      }
    }
    d.verdicts = aggregate(kept, config.annotators);
    if (d.verdicts.size() != d.tasks.size()) {
      throw ValidationError(std::to_string(d.tasks.size() - d.verdicts.size()) +
                            " sampled tasks have no responses");
    }
    for (Sense s : kAllSenses) d.summaries[idx(s)] = summarize(d.verdicts, kept, s);
    if (write) {
      write_tasks(run_dir / "tasks.jsonl", d.tasks);
      write_json_file(run_dir / "verdicts.json", verdicts_json(d.verdicts));
    }
  });

  stage("split", [&] {
    std::map<std::pair<Sense, std::string>, long> freq;
    for (const LabeledPhrase& p : d.extraction.phrases) freq[{p.sense, p.text()}] = p.frequency;
    std::vector<LabeledPhrase> accepted;
    std::set<std::pair<Sense, std::string>> annotated;
    for (const Verdict& v : d.verdicts) {
      LabeledPhrase p{v.phrase, v.sense, Provenance::Crowd, 1};
      annotated.insert({p.sense, p.text()});
      if (!v.accepted) continue;
      if (auto it = freq.find({p.sense, p.text()}); it != freq.end()) p.frequency = it->second;
      accepted.push_back(std::move(p));
    }
    d.split = split_crowd(accepted, {stream_seed(config.seed, Stream::Split), config.test_per_sense});
    // Rejected and held-out phrases never re-enter training through the pattern pool.
    std::set<std::pair<Sense, std::string>> excluded;
    for (const Verdict& v : d.verdicts) {
      if (!v.accepted) excluded.insert({v.sense, join(v.phrase)});
    }
    for (const LabeledPhrase& p : d.split.test) excluded.insert({p.sense, p.text()});
    for (Sense s : kAllSenses) {
      d.crowd_train[idx(s)] = of_sense(d.split.train, s);
      for (const LabeledPhrase& p : d.extraction.phrases) {
        if (p.sense == s && !excluded.contains({s, p.text()})) d.pattern_pool[idx(s)].push_back(p);
      }
    }
    if (write) {
      write_phrases(run_dir / "crowd_train.jsonl", d.split.train);
      write_phrases(run_dir / "crowd_test.jsonl", d.split.test);
    }
  });

  stage("embeddings", [&] { d.embeddings = load_embeddings(config.resolve(config.embeddings)); });

  stage("test-sentences", [&] {
    for (Sense s : kAllSenses) {
      d.train_templates[idx(s)] = load_templates(config.resolve(config.templates_train[idx(s)]));
      const auto test_templates = load_templates(config.resolve(config.templates_test[idx(s)]));
      std::set<std::string> train_texts;
      for (const CarrierTemplate& t : d.train_templates[idx(s)]) train_texts.insert(t.text());
      for (const CarrierTemplate& t : test_templates) {
        if (train_texts.contains(t.text())) {
          throw ValidationError("template '" + t.text() + "' is in both the train and test pools");
        }
      }
      BuildOptions opts;
      opts.seed = stream_seed(config.seed, Stream::TestSentences) + static_cast<std::uint64_t>(idx(s));
      const auto test = of_sense(d.split.test, s);
      d.test_sentences[idx(s)] = build_sentences(test, test_templates, opts).sentences;
      if (write) {
        write_conll(run_dir / ("test_" + std::string(sense_name(s)) + ".conll"),
                    d.test_sentences[idx(s)]);
      }
    }
  });
  return d;
}

std::vector<TaggedSentence> training_sentences(const PipelineConfig& config,
                                               const PreparedData& data, Sense sense,
                                               std::span<const LabeledPhrase> expanded) {
  BuildOptions opts;
  opts.seed = stream_seed(config.seed, Stream::TrainSentences) + static_cast<std::uint64_t>(idx(sense));
  opts.per_phrase = config.sentences_per_phrase;
  auto sentences = build_sentences(expanded, data.train_templates[idx(sense)],
                                   config.corpus_context ? std::span(data.corpus_sentences)
                                                         : std::span<const std::vector<Token>>(),
                                   opts)
                       .sentences;
  if (sentences.empty()) {
    throw ValidationError("no training sentences for " + std::string(sense_name(sense)));
  }
  return sentences;
}

SenseTraining training_data(const PipelineConfig& config, const PreparedData& data, Sense sense,
                            double alpha) {
  SenseTraining t;
  t.expanded = expand(data.crowd_train[idx(sense)], data.pattern_pool[idx(sense)], alpha,
                      data.embeddings);
  t.sentences = training_sentences(config, data, sense, t.expanded);
  return t;
}

PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir) {
  const bool write = !run_dir.empty();
  const PreparedData data = prepare_data(config, run_dir);

  std::vector<TaggedSentence> gold;
  std::vector<std::vector<BioTag>> predicted;
  Json training;
  for (Sense s : kAllSenses) {
    const std::string name(sense_name(s));
    const double alpha = config.alpha[idx(s)];
    const SenseTraining t = stage("expand", [&] { return training_data(config, data, s, alpha); });
    if (write) {
      write_phrases(run_dir / ("expanded_" + name + ".jsonl"), t.expanded);
      write_conll(run_dir / ("train_" + name + ".conll"), t.sentences);
    }
    const Tagger tagger = stage("train", [&] {
      return train_tagger(config.tagger, t.sentences, &data.embeddings);
    });
    if (write) tagger.save(run_dir / ("model_" + name + ".json"));
    stage("evaluate", [&] {
      const auto& test = data.test_sentences[idx(s)];
      auto pred = tagger.tag_all(test);
      if (write) {
        std::vector<TaggedSentence> out;
        for (std::size_t k = 0; k < test.size(); ++k) out.emplace_back(test[k].tokens(), pred[k], s);
        write_conll(run_dir / ("predictions_" + name + ".conll"), out);
      }
      gold.insert(gold.end(), test.begin(), test.end());
      predicted.insert(predicted.end(), pred.begin(), pred.end());
    });
    training[name] = {{"alpha", alpha},
                      {"crowd_phrases", data.crowd_train[idx(s)].size()},
                      {"pattern_pool", data.pattern_pool[idx(s)].size()},
                      {"train_phrases", t.expanded.size()},
                      {"train_sentences", t.sentences.size()},
                      {"test_sentences", data.test_sentences[idx(s)].size()}};
  }

  PipelineResult result;
  result.report = span_prf(gold, predicted);
  Json extraction{{"lines", data.extraction.lines},
                  {"raw_matches", data.extraction.raw_matches},
                  {"discarded", data.extraction.discarded},
                  {"malformed_lines", data.extraction.malformed_lines}};
  Json annotation;
  for (Sense s : kAllSenses) {
    extraction[std::string(sense_name(s))] = data.extraction.count(s);
    annotation[std::string(sense_name(s))] = summary_json(data.summaries[idx(s)]);
  }
  annotation["ignored_responses"] = data.ignored_responses;
  Json& r = result.report_json;
  r["config"] = config.to_json();
  r["extraction"] = std::move(extraction);
  r["annotation"] = std::move(annotation);
  r["training"] = std::move(training);
  r["evaluation"] = result.report.to_json();
  if (write) write_text(run_dir / "report.json", r.dump(2) + "\n");
  return result;
}

SweepResult run_sweep(const PipelineConfig& config, std::span<const double> alphas,
                      const std::filesystem::path& run_dir) {
  const PreparedData data = prepare_data(config, run_dir);
  SweepResult result;
  for (Sense s : kAllSenses) {
    const auto& test = data.test_sentences[idx(s)];
    const TrainAndEval train_and_eval = [&](const std::vector<LabeledPhrase>& expanded, double) {
      const auto sentences = training_sentences(config, data, s, expanded);
      const Tagger tagger = train_tagger(config.tagger, sentences, &data.embeddings);
      const EvalReport r = span_prf(test, tagger.tag_all(test));
      return SweepScores{r.precision(), r.recall(), r.f1(),
                         r.total.gold,    r.total.predicted, r.total.correct};
    };
    result.rows[idx(s)] = stage("sweep", [&] {
      return alpha_sweep(alphas, data.crowd_train[idx(s)], data.pattern_pool[idx(s)],
                         data.embeddings, train_and_eval);
    });
    if (!run_dir.empty()) {
      write_sweep_csv(run_dir / ("sweep_" + std::string(sense_name(s)) + ".csv"), result.rows[idx(s)]);
    }
  }
  return result;
}

std::vector<SweepRow> pooled_rows(const SweepResult& result) {
  const auto& a = result.rows[0];
  const auto& b = result.rows[1];
  if (a.size() != b.size()) throw ValidationError("sweep senses have different alpha grids");
  std::vector<SweepRow> out;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].alpha != b[k].alpha) throw ValidationError("sweep senses have different alpha grids");
    SpanCounts c{a[k].gold + b[k].gold, a[k].predicted + b[k].predicted,
                 a[k].correct + b[k].correct};
    out.push_back({a[k].alpha, a[k].train_size + b[k].train_size, c.precision(), c.recall(), c.f1(),
                   c.gold, c.predicted, c.correct});
  }
  return out;
}

void write_sweep_table(const std::filesystem::path& path, const SweepResult& result) {
  std::string text = "sense,alpha,train_size,precision,recall,f1\n";
  char buf[200];
  const auto emit = [&](const std::string& name, const std::vector<SweepRow>& rows) {
    for (const SweepRow& r : rows) {
      std::snprintf(buf, sizeof buf, "%s,%.2f,%ld,%.2f,%.2f,%.2f\n", name.c_str(), r.alpha,
                    r.train_size, r.precision, r.recall, r.f1);
      text += buf;
    }
  };
  for (Sense s : kAllSenses) emit(std::string(sense_name(s)), result.rows[idx(s)]);
  emit("all", pooled_rows(result));
  write_text(path, text);
}

}  // namespace sensery
