#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sensery/crf.hpp"
#include "sensery/embeddings.hpp"
#include "sensery/neural.hpp"
#include "sensery/text.hpp"

namespace sensery {

enum class ModelKind { Crf, Lstm };

ModelKind parse_model_kind(std::string_view s);  // "crf" / "lstm"
std::string_view model_kind_name(ModelKind k);

struct TaggerSpec {
  ModelKind kind = ModelKind::Crf;
  CrfTrainConfig crf;
  NeuralVariant variant;
  NeuralDims dims;
  NeuralTrainConfig neural;
  std::size_t max_pretrained_words = 200000;

  // Seeds every random choice of the model (shuffles and initialization).
  void set_seed(std::uint64_t seed);
};

// A trained model of either family.
class Tagger {
 public:
  explicit Tagger(CrfModel m) : model_(std::move(m)) {}
  explicit Tagger(NeuralTaggerModel m) : model_(std::move(m)) {}

  ModelKind kind() const;
  std::vector<BioTag> tag(std::span<const Token> tokens) const;
  std::vector<std::vector<BioTag>> tag_all(std::span<const TaggedSentence> sentences) const;

  nlohmann::ordered_json to_json() const;
  void save(const std::filesystem::path& path) const;
  // Dispatches on the file's "model" field.
  static Tagger load(const std::filesystem::path& path);

  const CrfModel* crf() const { return std::get_if<CrfModel>(&model_); }
  const NeuralTaggerModel* neural() const { return std::get_if<NeuralTaggerModel>(&model_); }

 private:
  std::variant<CrfModel, NeuralTaggerModel> model_;
};

// `pretrained` only matters for the LSTM, whose word embeddings start from it.
Tagger train_tagger(const TaggerSpec& spec, std::span<const TaggedSentence> data,
                    const EmbeddingTable* pretrained = nullptr);

}  // namespace sensery
