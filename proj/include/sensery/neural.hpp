#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "sensery/embeddings.hpp"
#include "sensery/text.hpp"

namespace sensery {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Which optional inputs feed the output layer: the previous step's tag
// distribution (output recurrence) and the character encoding.
struct NeuralVariant {
  bool output_recurrence = true;
  bool chars = true;

  // "base", "or", "char", "or,char" (also accepts "+OR+CHAR" style)
  static NeuralVariant parse(std::string_view s);
  std::string name() const;
  bool operator==(const NeuralVariant&) const = default;
};

struct NeuralDims {
  int word_dim = 50;
  int window_hidden = 100;
  int char_dim = 25;
  int char_hidden = 50;  // both directions together; each direction gets half
  int window = 5;        // odd

  bool operator==(const NeuralDims&) const = default;
};

// Gate rows of W and b are stacked [input; forget; output; candidate].
struct LstmCell {
  int input_dim = 0;
  int hidden_dim = 0;
  MatrixXd weights;  // 4h x (input + hidden), acting on [x; h]
  VectorXd bias;     // 4h

  LstmCell() = default;
  LstmCell(int input, int hidden);
};

struct LstmState {
  VectorXd h;
  VectorXd c;
};

// i, f, o = sigmoid gates; g = tanh candidate; c' = f*c + i*g; h' = o*tanh(c').
LstmState lstm_step(const LstmCell& cell, const VectorXd& x, const VectorXd& h, const VectorXd& c);

struct NeuralTaggerModel {
  NeuralVariant variant;
  NeuralDims dims;

  // Index 0 is the unknown word, 1 the window padding.
  std::vector<std::string> words;
  std::unordered_map<std::string, int> word_index;
  // UTF-8 characters; index 0 is the unknown character.
  std::vector<std::string> chars;
  std::unordered_map<std::string, int> char_index;

  MatrixXd word_embeddings;  // word_dim x |words|
  MatrixXd char_embeddings;  // char_dim x |chars|  (empty without chars)
  LstmCell char_forward;
  LstmCell char_backward;
  LstmCell window_cell;
  MatrixXd output_weights;  // 3 x output_inputs()
  VectorXd output_bias;     // 3
  VectorXd initial_logits;  // softmax gives the distribution before the first token

  static constexpr int kUnknownWord = 0;
  static constexpr int kPadWord = 1;

  int word_id(std::string_view surface) const;
  int char_id(std::string_view utf8_char) const;

  // Column layout of the output layer: [v_m ; v_ca ; v_s ; d_prev].
  int char_block_offset() const { return dims.window_hidden; }
  int word_block_offset() const {
    return dims.window_hidden + (variant.chars ? dims.char_hidden : 0);
  }
  int recurrence_block_offset() const { return word_block_offset() + dims.word_dim; }
  int output_inputs() const {
    return recurrence_block_offset() + (variant.output_recurrence ? kNumTags : 0);
  }

  nlohmann::ordered_json to_json() const;
  static NeuralTaggerModel from_json(const nlohmann::ordered_json& doc,
                                     const std::string& source = "<json>");
  void save(const std::filesystem::path& path) const;
  static NeuralTaggerModel load(const std::filesystem::path& path);
};

struct NeuralInit {
  NeuralDims dims;
  NeuralVariant variant;
  std::uint64_t seed = 1;
  const EmbeddingTable* pretrained = nullptr;
  std::size_t max_pretrained_words = 200000;
};

// Vocabulary from the training words plus (up to a cap) the pretrained
// table's words; embeddings initialized from the table where available.
NeuralTaggerModel create_neural_model(std::span<const TaggedSentence> data, const NeuralInit& init);

std::vector<std::string> utf8_chars(std::string_view word);

// [forward final hidden ; backward final hidden], length char_hidden.
VectorXd encode_chars(std::string_view word, const NeuralTaggerModel& model);

struct WindowEncoding {
  VectorXd window;  // v_m: final hidden state of the window LSTM
  VectorXd word;    // v_s: embedding of the center token
};

// Ids of the window tokens centered at i; padding outside the sentence.
std::vector<int> window_ids(const NeuralTaggerModel& model, std::span<const Token> sentence,
                            std::size_t i);
WindowEncoding encode_window(std::span<const Token> sentence, std::size_t i,
                             const NeuralTaggerModel& model);

VectorXd softmax(const VectorXd& z);

// softmax(W [v_m ; v_ca ; v_s ; d_prev] + b). Blocks the variant omits must
// be passed empty.
VectorXd predict_step(const VectorXd& window, const VectorXd& chars, const VectorXd& word,
                      const VectorXd& previous, const NeuralTaggerModel& model);

// Per-position distributions of a greedy left-to-right pass.
std::vector<VectorXd> tag_distributions(const NeuralTaggerModel& model,
                                        std::span<const Token> sentence);

// Greedy decode (argmax, ties to B < I < O), then BIO repair.
std::vector<BioTag> tag_sentence(const NeuralTaggerModel& model, std::span<const Token> sentence);

// Drops blocks from the output layer (and the char encoder) to obtain a
// model of a smaller variant. `target` must be contained in the model's.
NeuralTaggerModel restrict_variant(const NeuralTaggerModel& model, NeuralVariant target);
void zero_char_block(NeuralTaggerModel& model);
void zero_recurrence_block(NeuralTaggerModel& model);

// Gradient with the model's shapes; word-embedding rows are sparse.
struct NeuralGradient {
  std::map<int, VectorXd> word_embeddings;
  MatrixXd char_embeddings;
  LstmCell char_forward;
  LstmCell char_backward;
  LstmCell window_cell;
  MatrixXd output_weights;
  VectorXd output_bias;
  VectorXd initial_logits;

  explicit NeuralGradient(const NeuralTaggerModel& model);
  void set_zero();
  double squared_norm() const;
  void scale(double factor);
};

// Summed per-token cross-entropy of one sentence; adds its gradient to `grad`.
// With teacher forcing the previous distribution is the gold one-hot tag.
double loss_and_gradient(const NeuralTaggerModel& model, const TaggedSentence& sentence,
                         bool teacher_forcing, NeuralGradient* grad);

// Named flat views of every parameter block, for checks and updates.
struct ParamBlock {
  std::string name;
  double* data;
  std::size_t size;
};
std::vector<ParamBlock> parameter_blocks(NeuralTaggerModel& model);

struct NeuralTrainConfig {
  int epochs = 30;
  double step = 0.05;
  std::uint64_t seed = 1;
  bool teacher_forcing = true;
  double clip = 5.0;
  int batch_size = 1;
};

struct NeuralTrainStats {
  std::vector<double> epoch_losses;  // mean per-sentence loss
};

NeuralTaggerModel train_neural(NeuralTaggerModel model, std::span<const TaggedSentence> data,
                               const NeuralTrainConfig& config, NeuralTrainStats* stats = nullptr);

}  // namespace sensery
