// Command-line front end: one subcommand per pipeline stage plus `run` for
// the whole pipeline. Exit codes: 0 ok, 2 invalid input, 3 I/O, 4 divergence.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "sensery/annotation.hpp"
#include "sensery/annotation_service.hpp"
#include "sensery/embeddings.hpp"
#include "sensery/error.hpp"
#include "sensery/eval.hpp"
#include "sensery/mixture.hpp"
#include "sensery/model_io.hpp"
#include "sensery/patterns.hpp"
#include "sensery/pipeline.hpp"
#include "sensery/sentences.hpp"
#include "sensery/synthetic.hpp"
#include "sensery/tagger.hpp"

namespace fs = std::filesystem;
using namespace sensery;

namespace {

std::vector<Sense> senses_of(std::span<const LabeledPhrase> phrases) {
  std::vector<Sense> out;
  for (Sense s : kAllSenses) {
    for (const LabeledPhrase& p : phrases) {
      if (p.sense == s) {
        out.push_back(s);
        break;
      }
    }
  }
  return out;
}

// RFC 4180 field: quoted, with embedded quotes doubled.
std::string csv_field(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string format_kappa(const SenseSummary& s) {
  if (!s.kappa) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *s.kappa);
  return buf;
}

void print_summary(std::span<const Verdict> verdicts, std::span<const AnnotationResponse> responses,
                   bool exclude_notsure) {
  std::printf("%-12s %-6s %-9s %-14s %-8s %s\n", "sense", "tasks", "accepted", "%majority-yes",
              "kappa", "notsure");
  for (Sense s : kAllSenses) {
    const SenseSummary sum = summarize(verdicts, responses, s, exclude_notsure);
    std::printf("%-12s %-6d %-9d %-14.1f %-8s %ld\n", std::string(sense_name(s)).c_str(), sum.tasks,
                sum.accepted, sum.majority_yes, format_kappa(sum).c_str(), sum.notsure);
  }
}

std::vector<TaggedSentence> read_text_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<TaggedSentence> out;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (!tokens.empty()) out.push_back(TaggedSentence::untagged(std::move(tokens)));
  }
  return out;
}

struct TrainOptions {
  std::string model = "crf";
  std::string variant = "or,char";
  std::string train;
  std::string out;
  std::string embeddings;
  std::uint64_t seed = 1;
  int epochs = 0;  // 0: the model's default
  double step = 0.0;
  double l2 = -1.0;
  int batch_size = 0;
  double clip = 0.0;
  bool no_teacher_forcing = false;
  NeuralDims dims;
};

int cmd_train(const TrainOptions& o) {
  TaggerSpec spec;
  spec.kind = parse_model_kind(o.model);
  spec.variant = NeuralVariant::parse(o.variant);
  spec.dims = o.dims;
  spec.set_seed(o.seed);
  if (o.epochs > 0) spec.crf.epochs = spec.neural.epochs = o.epochs;
  if (o.step > 0.0) spec.crf.step = spec.neural.step = o.step;
  if (o.l2 >= 0.0) spec.crf.l2 = o.l2;
  if (o.batch_size > 0) spec.crf.batch_size = spec.neural.batch_size = o.batch_size;
  if (o.clip > 0.0) spec.neural.clip = o.clip;
  spec.neural.teacher_forcing = !o.no_teacher_forcing;

  const auto data = read_conll(fs::path(o.train));
  std::optional<EmbeddingTable> table;
  if (!o.embeddings.empty()) table = load_embeddings(o.embeddings);
  const Tagger tagger = train_tagger(spec, data, table ? &*table : nullptr);
  tagger.save(o.out);
  std::printf("trained %s on %zu sentences -> %s\n", std::string(model_kind_name(spec.kind)).c_str(),
              data.size(), o.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sense-mention toolkit: harvest, annotate, expand, train, evaluate"};
  app.require_subcommand(1);

  // extract
  std::string corpus, out, stoplist;
  auto* extract = app.add_subcommand("extract", "harvest 'sound of' / 'smell of' phrases");
  extract->add_option("--corpus", corpus, "plain-text corpus, one sentence per line")->required();
  extract->add_option("--out", out, "phrases JSONL")->required();
  extract->add_option("--stoplist", stoplist, "stop-word file (default: bundled list)");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "crowd annotation");
  annotate->require_subcommand(1);
  std::string phrases_path, journal, host = "127.0.0.1", static_dir;
  int per_sense = 500, annotators = 3, port = 8080;
  std::uint64_t seed = 1;
  auto* serve = annotate->add_subcommand("serve", "serve annotation tasks over HTTP");
  serve->add_option("--phrases", phrases_path, "phrases JSONL from extract")->required();
  serve->add_option("--per-sense", per_sense, "tasks per sense");
  serve->add_option("--annotators", annotators, "responses per task");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--journal", journal, "append-only response journal")->required();
  serve->add_option("--seed", seed);
  serve->add_option("--static", static_dir, "directory served at /");
  bool exclude_notsure = false, allow_incomplete = false;
  auto* aggregate_cmd = annotate->add_subcommand("aggregate", "majority verdicts and agreement");
  aggregate_cmd->add_option("--journal", journal)->required();
  aggregate_cmd->add_option("--out", out, "verdicts JSON")->required();
  aggregate_cmd->add_option("--annotators", annotators);
  aggregate_cmd->add_flag("--exclude-notsure", exclude_notsure,
                          "compute kappa over items without any notsure answer");
  aggregate_cmd->add_flag("--allow-incomplete", allow_incomplete,
                          "drop tasks with too few responses instead of failing");

  // expand
  std::string crowd_path, pattern_path, embeddings_path;
  std::optional<double> alpha;
  auto* expand_cmd = app.add_subcommand("expand", "grow the crowd set with similar pattern phrases");
  expand_cmd->add_option("--crowd", crowd_path)->required();
  expand_cmd->add_option("--pattern", pattern_path)->required();
  expand_cmd->add_option("--alpha", alpha, "threshold on (cos+1)/2 (default: per-sense)");
  expand_cmd->add_option("--embeddings", embeddings_path)->required();
  expand_cmd->add_option("--out", out)->required();

  // sweep
  std::string config_path, run_dir, alphas = "0:1:0.1", model_kind, variant;
  auto* sweep = app.add_subcommand("sweep", "score the pipeline over a grid of alphas");
  sweep->add_option("--config", config_path, "pipeline config JSON")->required();
  sweep->add_option("--alphas", alphas, "start:stop:step or a comma list");
  sweep->add_option("--model", model_kind, "crf or lstm (overrides the config)");
  sweep->add_option("--variant", variant, "LSTM variant, e.g. or,char");
  sweep->add_option("--out", out, "CSV")->required();
  sweep->add_option("--run-dir", run_dir, "where intermediate artifacts go");

  // build-sentences
  std::string templates_path;
  int per_phrase = 1;
  auto* build = app.add_subcommand("build-sentences", "place phrases in carrier sentences");
  build->add_option("--phrases", phrases_path)->required();
  build->add_option("--templates", templates_path)->required();
  build->add_option("--out", out, "CoNLL")->required();
  build->add_option("--seed", seed);
  build->add_option("--per-phrase", per_phrase);
  build->add_option("--corpus", corpus, "prefer corpus sentences containing the phrase");

  // train
  TrainOptions topt;
  auto* train = app.add_subcommand("train", "train a tagger");
  train->add_option("--model", topt.model, "crf or lstm");
  train->add_option("--variant", topt.variant, "base, or, char, or,char");
  train->add_option("--train", topt.train, "CoNLL training data")->required();
  train->add_option("--out", topt.out, "model JSON")->required();
  train->add_option("--seed", topt.seed);
  train->add_option("--embeddings", topt.embeddings, "pretrained word vectors (LSTM)");
  train->add_option("--epochs", topt.epochs);
  train->add_option("--step", topt.step);
  train->add_option("--l2", topt.l2);
  train->add_option("--batch-size", topt.batch_size);
  train->add_option("--clip", topt.clip);
  train->add_flag("--no-teacher-forcing", topt.no_teacher_forcing);
  train->add_option("--word-dim", topt.dims.word_dim);
  train->add_option("--window-hidden", topt.dims.window_hidden);
  train->add_option("--char-dim", topt.dims.char_dim);
  train->add_option("--char-hidden", topt.dims.char_hidden);
  train->add_option("--window", topt.dims.window);

  // tag
  std::string model_path, in_path;
  bool text_input = false;
  auto* tag = app.add_subcommand("tag", "tag sentences with a trained model");
  tag->add_option("--model", model_path)->required();
  tag->add_option("--in", in_path, "CoNLL (tags ignored) or, with --text, one sentence per line")
      ->required();
  tag->add_option("--out", out, "CoNLL")->required();
  tag->add_flag("--text", text_input);

  // eval
  std::string gold_path, pred_path, eval_sense = "audible";
  bool as_json = false;
  auto* eval = app.add_subcommand("eval", "exact-match span precision / recall / F1");
  eval->add_option("--gold", gold_path)->required();
  eval->add_option("--pred", pred_path)->required();
  eval->add_option("--sense", eval_sense, "sense the gold spans are reported under (CoNLL has no sense column)");
  eval->add_flag("--json", as_json);

  // pca
  auto* pca = app.add_subcommand("pca", "2-D PCA projection of phrase vectors");
  pca->add_option("--phrases", phrases_path)->required();
  pca->add_option("--embeddings", embeddings_path)->required();
  pca->add_option("--out", out, "CSV")->required();

  // run
  auto* run = app.add_subcommand("run", "run the whole pipeline from a config");
  run->add_option("--config", config_path)->required();
  run->add_option("--run-dir", run_dir)->required();

  // synth
  SyntheticSpec synth_spec;
  auto* synth = app.add_subcommand("synth", "write a planted synthetic world and its config");
  synth->add_option("--out", out, "directory")->required();
  synth->add_option("--seed", synth_spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*extract) {
      const StopList stop = stoplist.empty() ? StopList::load_default() : StopList::load(stoplist);
      const ScanResult r = scan_corpus(fs::path(corpus), default_patterns(), stop);
      write_phrases(fs::path(out), r.phrases);
      std::printf("lines %ld, matches %ld, discarded %ld, malformed %ld\n", r.lines, r.raw_matches,
                  r.discarded, r.malformed_lines);
      for (Sense s : kAllSenses) {
        std::printf("%s phrases: %ld\n", std::string(sense_name(s)).c_str(), r.count(s));
      }
    } else if (*serve) {
      const auto phrases = read_phrases(fs::path(phrases_path));
      AnnotationService service(build_tasks(phrases, per_sense, annotators, seed), fs::path(journal));
      std::printf("serving %zu tasks on http://%s:%d\n", service.tasks().size(), host.c_str(), port);
      std::fflush(stdout);
      serve_annotations(service, host, port,
                        static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
    } else if (*aggregate_cmd) {
      const auto responses = read_responses(fs::path(journal));
      const auto verdicts = allow_incomplete ? aggregate_complete(responses, annotators)
                                             : aggregate(responses, annotators);
      write_json_file(out, verdicts_json(verdicts));
      print_summary(verdicts, responses, exclude_notsure);
    } else if (*expand_cmd) {
      const auto crowd = read_phrases(fs::path(crowd_path));
      const auto pattern = read_phrases(fs::path(pattern_path));
      const EmbeddingTable table = load_embeddings(embeddings_path);
      std::vector<LabeledPhrase> all;
      for (Sense s : senses_of(crowd)) {
        std::vector<LabeledPhrase> c, p;
        for (const auto& x : crowd) if (x.sense == s) c.push_back(x);
        for (const auto& x : pattern) if (x.sense == s) p.push_back(x);
        const double a = alpha.value_or(default_alpha(s));
        const auto e = expand(c, p, a, table);
        std::printf("%s: alpha %.2f, %zu crowd + %zu admitted\n", std::string(sense_name(s)).c_str(),
                    a, c.size(), e.size() - c.size());
        all.insert(all.end(), e.begin(), e.end());
      }
      write_phrases(fs::path(out), all);
    } else if (*sweep) {
      PipelineConfig config = PipelineConfig::load(config_path);
      if (!model_kind.empty()) config.tagger.kind = parse_model_kind(model_kind);
      if (!variant.empty()) config.tagger.variant = NeuralVariant::parse(variant);
      const auto grid = parse_alpha_grid(alphas);
      const SweepResult r = run_sweep(config, grid, run_dir.empty() ? fs::path() : fs::path(run_dir));
      write_sweep_table(out, r);
      std::ifstream in(out);
      std::cout << in.rdbuf();
    } else if (*build) {
      const auto phrases = read_phrases(fs::path(phrases_path));
      const auto templates = load_templates(templates_path);
      std::vector<std::vector<Token>> corpus_sentences;
      if (!corpus.empty()) {
        for (const TaggedSentence& s : read_text_lines(corpus)) corpus_sentences.push_back(s.tokens());
      }
      BuildOptions opts;
      opts.seed = seed;
      opts.per_phrase = per_phrase;
      const BuildResult r = build_sentences(phrases, templates, corpus_sentences, opts);
      write_conll(fs::path(out), r.sentences);
      std::printf("%zu sentences (%ld from corpus, %ld skipped)\n", r.sentences.size(), r.from_corpus,
                  r.skipped);
    } else if (*train) {
      return cmd_train(topt);
    } else if (*tag) {
      const Tagger tagger = Tagger::load(model_path);
      const auto input = text_input ? read_text_lines(in_path) : read_conll(fs::path(in_path));
      std::vector<TaggedSentence> tagged;
      for (const TaggedSentence& s : input) tagged.emplace_back(s.tokens(), tagger.tag(s.tokens()));
      write_conll(fs::path(out), tagged);
    } else if (*eval) {
      const Sense sense = parse_sense(eval_sense);
      const auto gold = read_conll(fs::path(gold_path), sense);
      const auto pred = read_conll(fs::path(pred_path), sense);
      if (gold.size() != pred.size()) {
        throw ValidationError("gold has " + std::to_string(gold.size()) + " sentences, predictions " +
                              std::to_string(pred.size()));
      }
      std::vector<std::vector<BioTag>> tags;
      for (std::size_t k = 0; k < pred.size(); ++k) {
        if (pred[k].surfaces() != gold[k].surfaces()) {
          throw ValidationError("sentence " + std::to_string(k + 1) + " differs between gold and predictions");
        }
        tags.push_back(pred[k].tags());
      }
      const EvalReport r = span_prf(gold, tags);
      if (as_json) {
        std::cout << r.to_json().dump(2) << '\n';
      } else {
        std::cout << format_report(r);
      }
    } else if (*pca) {
      const auto phrases = read_phrases(fs::path(phrases_path));
      const EmbeddingTable table = load_embeddings(embeddings_path);
      std::vector<Vector> vectors;
      std::vector<const LabeledPhrase*> kept;
      for (const LabeledPhrase& p : phrases) {
        if (auto v = try_phrase_vector(p.tokens, table)) {
          vectors.push_back(std::move(v->vector));
          kept.push_back(&p);
        }
      }
      const Pca2Result r = pca2_full(vectors);
      std::ofstream csv(out, std::ios::binary);
      if (!csv) throw IoError("cannot write " + out);
      csv << "phrase,sense,x,y\n";
      char buf[64];
      for (std::size_t k = 0; k < kept.size(); ++k) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", r.points[k][0], r.points[k][1]);
        csv << csv_field(kept[k]->text()) << ',' << sense_name(kept[k]->sense) << buf;
      }
      std::printf("%zu phrases projected, %zu without vectors; eigenvalues %.6g %.6g\n", kept.size(),
                  phrases.size() - kept.size(), r.eigenvalues[0], r.eigenvalues[1]);
    } else if (*run) {
      const PipelineConfig config = PipelineConfig::load(config_path);
      const PipelineResult r = run_pipeline(config, run_dir);
      std::cout << format_report(r.report);
    } else if (*synth) {
      write_synthetic_world(out, synth_spec);
      std::printf("synthetic world written to %s (config.json inside)\n", out.c_str());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
