#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sensery/text.hpp"

namespace sensery {

// Frozen feature-string -> dense index map.
class FeatureVocab {
 public:
  FeatureVocab() = default;
  // Duplicates are dropped; first occurrence fixes the index.
  explicit FeatureVocab(std::span<const std::string> features);

  std::optional<int> find(std::string_view feature) const;
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// Features of token i: word identities in a +-2 window, prefixes/suffixes of
// length 1-4, POS of i-1..i+1, a shape class, and a bias. Tokens without
// POS get it from guess_pos().
std::vector<std::string> featurize(std::span<const Token> sentence, std::size_t i);

inline constexpr double kInitialMentionBias = -1e-3;

// Linear-chain CRF over {B, I, O}. All parameters live in one flat vector:
//   [emission F x 3 | transition 3 x 3 (from, to) | start 3 | stop 3]
class CrfModel {
 public:
  CrfModel() = default;
  CrfModel(FeatureVocab vocab, double l2);

  // Zero weights except a small negative B/I bias, so a featureless decode
  // is all-O instead of a tie.
  static CrfModel initial(FeatureVocab vocab, double l2);

  const FeatureVocab& vocab() const { return vocab_; }
  int num_features() const { return vocab_.size(); }
  double l2() const { return l2_; }
  void set_l2(double l2) { l2_ = l2; }

  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }

  std::size_t emission_index(int feature, int tag) const {
    return static_cast<std::size_t>(feature) * kNumTags + tag;
  }
  std::size_t transition_index(int from, int to) const {
    return static_cast<std::size_t>(num_features()) * kNumTags + from * kNumTags + to;
  }
  std::size_t start_index(int tag) const { return transition_index(0, 0) + 9 + tag; }
  std::size_t stop_index(int tag) const { return transition_index(0, 0) + 12 + tag; }

  double emission(int feature, int tag) const { return weights_[emission_index(feature, tag)]; }
  double transition(int from, int to) const { return weights_[transition_index(from, to)]; }
  double start(int tag) const { return weights_[start_index(tag)]; }
  double stop(int tag) const { return weights_[stop_index(tag)]; }

  nlohmann::ordered_json to_json() const;
  static CrfModel from_json(const nlohmann::ordered_json& doc, const std::string& source = "<json>");
  void save(const std::filesystem::path& path) const;
  static CrfModel load(const std::filesystem::path& path);

  bool operator==(const CrfModel& other) const {
    return vocab_.names() == other.vocab_.names() && l2_ == other.l2_ &&
           weights_ == other.weights_;
  }

 private:
  FeatureVocab vocab_;
  double l2_ = 0.0;
  std::vector<double> weights_;
};

// Feature ids per position; features unknown to the vocabulary are dropped.
using FeatureIds = std::vector<std::vector<int>>;
FeatureIds encode_features(const CrfModel& model, std::span<const Token> sentence);

// n x 3 emission scores.
using ScoreMatrix = std::vector<std::array<double, kNumTags>>;
ScoreMatrix emission_scores(const CrfModel& model, const FeatureIds& features);

// log of the sum of exp(score) over all 3^n tag sequences (forward recursion).
double log_partition(const CrfModel& model, std::span<const Token> sentence);
double log_partition(const CrfModel& model, const ScoreMatrix& emissions);

double sequence_score(const CrfModel& model, const ScoreMatrix& emissions,
                      std::span<const BioTag> tags);

// Per-position tag marginals from forward-backward.
std::vector<std::array<double, kNumTags>> marginals(const CrfModel& model,
                                                    std::span<const Token> sentence);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as CrfModel::weights()
};

// sum over the batch of (log Z - gold score) + l2/2 ||w||^2, and its gradient:
// expected minus empirical feature counts, plus l2 w.
LossAndGradient nll_and_gradient(const CrfModel& model, std::span<const TaggedSentence> batch);

// Best BIO-valid tag sequence: start->I and O->I are forbidden.
std::vector<BioTag> viterbi(const CrfModel& model, std::span<const Token> sentence);

struct CrfTrainConfig {
  int epochs = 30;
  double step = 0.1;
  double l2 = 1e-4;
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct CrfTrainStats {
  double initial_loss = 0.0;  // mean per-sentence objective before training
  double final_loss = 0.0;
  std::vector<double> epoch_losses;
};

// Mini-batch gradient descent, step decayed as step / (1 + epoch).
CrfModel train_crf(std::span<const TaggedSentence> data, const CrfTrainConfig& config,
                   CrfTrainStats* stats = nullptr);

// Mean per-sentence NLL plus the l2 term.
double crf_objective(const CrfModel& model, std::span<const TaggedSentence> data);

}  // namespace sensery
