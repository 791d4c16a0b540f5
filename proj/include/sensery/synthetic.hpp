#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "sensery/patterns.hpp"

namespace sensery {

// A planted world whose ground truth is known: modifier+head sense phrases
// drawn from two embedding clusters, metaphorical non-sense phrases ("the
// sound of money") from a third, and simulated crowd answers for every
// harvested phrase.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  int dim = 16;
  double word_noise = 0.6;    // spread of word vectors around their cluster center
  int pairs_per_sense = 170;  // modifier+head phrases planted per sense
  int filler_lines = 300;     // corpus lines without a trigger
  double yes_rate_true = 0.85;
  double yes_rate_noise = 0.05;
  double notsure_rate = 0.05;
};

struct SyntheticTruth {
  std::array<std::set<std::string>, 2> sense_phrases;  // indexed by Sense
  std::array<std::set<std::string>, 2> noise_phrases;
  std::vector<std::string> noise_words;
};

// Writes corpus.txt, vectors.txt, responses.jsonl, templates_train.txt,
// templates_test.txt and config.json (a CRF run at alpha 0.7 for both senses) to
// `dir`, and returns the planted labels. Raises if extraction over the
// generated corpus does not recover exactly the planted phrases.
SyntheticTruth write_synthetic_world(const std::filesystem::path& dir, const SyntheticSpec& spec);

}  // namespace sensery
