#include "sensery/tagger.hpp"

#include "sensery/error.hpp"
#include "sensery/model_io.hpp"

namespace sensery {

ModelKind parse_model_kind(std::string_view s) {
  if (s == "crf") return ModelKind::Crf;
  if (s == "lstm") return ModelKind::Lstm;
  throw ValidationError("unknown model '" + std::string(s) + "' (expected crf or lstm)");
}

std::string_view model_kind_name(ModelKind k) { return k == ModelKind::Crf ? "crf" : "lstm"; }

void TaggerSpec::set_seed(std::uint64_t seed) {
  crf.seed = seed;
  neural.seed = seed;
}

ModelKind Tagger::kind() const {
  return std::holds_alternative<CrfModel>(model_) ? ModelKind::Crf : ModelKind::Lstm;
}

std::vector<BioTag> Tagger::tag(std::span<const Token> tokens) const {
  if (tokens.empty()) return {};
  if (const CrfModel* m = crf()) return viterbi(*m, tokens);
  return tag_sentence(*neural(), tokens);
}

std::vector<std::vector<BioTag>> Tagger::tag_all(std::span<const TaggedSentence> sentences) const {
  std::vector<std::vector<BioTag>> out;
  out.reserve(sentences.size());
  for (const TaggedSentence& s : sentences) out.push_back(tag(s.tokens()));
  return out;
}

nlohmann::ordered_json Tagger::to_json() const {
  return std::visit([](const auto& m) { return m.to_json(); }, model_);
}

void Tagger::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

Tagger Tagger::load(const std::filesystem::path& path) {
  const nlohmann::ordered_json doc = read_json_file(path);
  const std::string kind = model_kind(doc);
  if (kind == "crf") return Tagger(CrfModel::from_json(doc, path.string()));
  if (kind == "lstm") return Tagger(NeuralTaggerModel::from_json(doc, path.string()));
  throw ValidationError(path.string() + ": unknown model kind '" + kind + "'");
}

Tagger train_tagger(const TaggerSpec& spec, std::span<const TaggedSentence> data,
                    const EmbeddingTable* pretrained) {
  if (spec.kind == ModelKind::Crf) {
    return Tagger(train_crf(data, spec.crf));
  }
  NeuralInit init;
  init.dims = spec.dims;
  init.variant = spec.variant;
  init.seed = spec.neural.seed;
  init.pretrained = pretrained;
  init.max_pretrained_words = spec.max_pretrained_words;
  return Tagger(train_neural(create_neural_model(data, init), data, spec.neural));
}

}  // namespace sensery
