#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensery/annotation.hpp"
#include "sensery/embeddings.hpp"
#include "sensery/eval.hpp"
#include "sensery/mixture.hpp"
#include "sensery/patterns.hpp"
#include "sensery/sentences.hpp"
#include "sensery/tagger.hpp"

namespace sensery {

template <typename T>
using PerSense = std::array<T, 2>;  // indexed by Sense

// Everything one end-to-end run depends on. Relative paths are resolved
// against `base_dir` (the config file's directory when loaded from disk).
struct PipelineConfig {
  std::filesystem::path base_dir;

  std::string corpus;
  std::string embeddings;
  std::string responses;  // annotation journal (JSON lines)
  std::string stoplist;   // empty: the bundled list
  PerSense<std::string> templates_train;
  PerSense<std::string> templates_test;

  std::uint64_t seed = 1;
  int annotators = 3;
  int per_sense = 500;       // annotation tasks per sense
  int test_per_sense = 100;  // accepted crowd phrases held out per sense
  PerSense<double> alpha = {kDefaultAlphaAudible, kDefaultAlphaOlfactible};
  int sentences_per_phrase = 1;
  bool corpus_context = false;  // place training phrases in corpus sentences when possible

  TaggerSpec tagger;

  std::filesystem::path resolve(const std::string& p) const;

  // Template fields accept one path for both senses or {"audible": .., "olfactible": ..}.
  static PipelineConfig from_json(const nlohmann::ordered_json& j,
                                  const std::filesystem::path& base_dir = {});
  static PipelineConfig load(const std::filesystem::path& path);
  nlohmann::ordered_json to_json() const;
};

// Output of the stages shared by a single run and a sweep.
struct PreparedData {
  ScanResult extraction;
  std::vector<AnnotationTask> tasks;
  std::vector<Verdict> verdicts;
  long ignored_responses = 0;  // responses for phrases that were not sampled
  PerSense<SenseSummary> summaries;
  CrowdSplit split;
  PerSense<std::vector<LabeledPhrase>> crowd_train;
  PerSense<std::vector<LabeledPhrase>> pattern_pool;
  PerSense<std::vector<CarrierTemplate>> train_templates;
  PerSense<std::vector<TaggedSentence>> test_sentences;
  std::vector<std::vector<Token>> corpus_sentences;  // only with corpus_context
  EmbeddingTable embeddings{1};
};

// Extract, annotate, split, and build the held-out test sentences. Writes the
// intermediate artifacts to `run_dir` when it is non-empty.
PreparedData prepare_data(const PipelineConfig& config, const std::filesystem::path& run_dir);

struct SenseTraining {
  std::vector<LabeledPhrase> expanded;
  std::vector<TaggedSentence> sentences;
};

// Places already-expanded phrases in the sense's training templates.
std::vector<TaggedSentence> training_sentences(const PipelineConfig& config,
                                               const PreparedData& data, Sense sense,
                                               std::span<const LabeledPhrase> expanded);

// Mixture expansion at `alpha` and sentence generation for one sense.
SenseTraining training_data(const PipelineConfig& config, const PreparedData& data, Sense sense,
                            double alpha);

struct PipelineResult {
  EvalReport report;
  nlohmann::ordered_json report_json;
};

// One model per sense, trained on its expanded data and scored on its held-out
// sentences; the report pools both senses. Every artifact, report.json last,
// goes to `run_dir`. A failing stage raises with the stage name prefixed.
PipelineResult run_pipeline(const PipelineConfig& config, const std::filesystem::path& run_dir);

struct SweepResult {
  PerSense<std::vector<SweepRow>> rows;
};

// Per sense: expand at each alpha, train, and score on the fixed test split.
// Writes sweep_<sense>.csv to `run_dir` when it is non-empty.
SweepResult run_sweep(const PipelineConfig& config, std::span<const double> alphas,
                      const std::filesystem::path& run_dir);

// Scores of both senses pooled per alpha, from the span counts. Both senses
// must have been swept over the same grid.
std::vector<SweepRow> pooled_rows(const SweepResult& result);

// Both senses and their pooled "all" rows in one CSV:
// sense,alpha,train_size,precision,recall,f1.
void write_sweep_table(const std::filesystem::path& path, const SweepResult& result);

}  // namespace sensery
