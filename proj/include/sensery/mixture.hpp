#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sensery/embeddings.hpp"
#include "sensery/patterns.hpp"

namespace sensery {

struct MixtureConfig {
  double alpha = 0.6;
  Sense sense = Sense::Audible;
};

// Thresholds chosen per sense for the paper-scale data.
inline constexpr double kDefaultAlphaAudible = 0.6;
inline constexpr double kDefaultAlphaOlfactible = 0.4;
double default_alpha(Sense sense);

// Cosine mapped onto [0, 1]; this is what the threshold is compared with.
inline double shifted_similarity(double cos) { return (cos + 1.0) / 2.0; }

struct Candidate {
  LabeledPhrase phrase;
  std::optional<double> best_cosine;  // nullopt: no vector, or no crowd anchor
  bool admitted = false;
};

struct Expansion {
  std::vector<LabeledPhrase> phrases;  // crowd phrases, then admitted ones
  std::vector<Candidate> candidates;   // every distinct non-crowd pattern phrase
  int crowd_size = 0;
};

// crowd ∪ { p in pattern : max_c shifted_similarity(cos(c, p)) >= alpha }.
// Admitted phrases get provenance Mixture. Output is in canonical order and
// does not depend on the order of either input.
Expansion expand_detailed(std::span<const LabeledPhrase> crowd,
                          std::span<const LabeledPhrase> pattern, double alpha,
                          const EmbeddingTable& table);

std::vector<LabeledPhrase> expand(std::span<const LabeledPhrase> crowd,
                                  std::span<const LabeledPhrase> pattern, double alpha,
                                  const EmbeddingTable& table);

struct SweepScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Span counts behind the scores, when the callback knows them.
  long gold = 0;
  long predicted = 0;
  long correct = 0;
};

struct SweepRow {
  double alpha = 0.0;
  long train_size = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long gold = 0;
  long predicted = 0;
  long correct = 0;
};

// Trains on the expanded set and scores on the fixed held-out data.
using TrainAndEval =
    std::function<SweepScores(const std::vector<LabeledPhrase>& expanded, double alpha)>;

// Called with each expanded set, e.g. to dump it for audit.
using ExpansionSink = std::function<void(double alpha, const std::vector<LabeledPhrase>&)>;

std::vector<SweepRow> alpha_sweep(std::span<const double> alphas,
                                  std::span<const LabeledPhrase> crowd,
                                  std::span<const LabeledPhrase> pattern,
                                  const EmbeddingTable& table, const TrainAndEval& train_and_eval,
                                  const ExpansionSink& sink = {});

// "start:stop:step", inclusive of stop, or a comma list.
std::vector<double> parse_alpha_grid(const std::string& spec);

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);
void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows);

}  // namespace sensery
