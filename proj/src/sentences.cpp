#include "sensery/sentences.hpp"

#include <fstream>
#include <istream>
#include <unordered_map>

#include "sensery/error.hpp"
#include "sensery/rng.hpp"

namespace sensery {

namespace {
constexpr std::string_view kSlot = "<y>";
}

CarrierTemplate CarrierTemplate::parse(std::string_view line) {
  const auto slot = line.find(kSlot);
  if (slot == std::string_view::npos) {
    throw ValidationError("template has no <y> slot: '" + std::string(line) + "'");
  }
  if (line.find(kSlot, slot + kSlot.size()) != std::string_view::npos) {
    throw ValidationError("template has more than one <y> slot: '" + std::string(line) + "'");
  }
  return {tokenize(line.substr(0, slot)), tokenize(line.substr(slot + kSlot.size()))};
}

std::string CarrierTemplate::text() const {
  std::string out;
  for (const Token& t : prefix) out += t.surface + " ";
  out += kSlot;
  for (const Token& t : suffix) out += " " + t.surface;
  return out;
}

std::vector<CarrierTemplate> parse_templates(std::istream& in, const std::string& source) {
  std::vector<CarrierTemplate> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    try {
      out.push_back(CarrierTemplate::parse(line));
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::vector<CarrierTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open templates " + path.string());
  return parse_templates(in, path.string());
}

namespace {

struct CorpusIndex {
  std::span<const std::vector<Token>> sentences;
  std::unordered_map<std::string, std::vector<std::pair<std::size_t, std::size_t>>> by_first;

  explicit CorpusIndex(std::span<const std::vector<Token>> s) : sentences(s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t k = 0; k < s[i].size(); ++k) by_first[s[i][k].lower].emplace_back(i, k);
    }
  }

  // First occurrence of `phrase` per sentence, in corpus order.
  std::vector<std::pair<std::size_t, std::size_t>> find(std::span<const std::string> phrase) const {
    std::vector<std::pair<std::size_t, std::size_t>> hits;
    auto it = by_first.find(case_fold(phrase.front()));
    if (it == by_first.end()) return hits;
    for (auto [sent, pos] : it->second) {
      if (!hits.empty() && hits.back().first == sent) continue;
      const auto& toks = sentences[sent];
      if (pos + phrase.size() > toks.size()) continue;
      bool match = true;
      for (std::size_t k = 1; k < phrase.size() && match; ++k) {
        match = toks[pos + k].lower == case_fold(phrase[k]);
      }
      if (match) hits.emplace_back(sent, pos);
    }
    return hits;
  }
};

}  // namespace

BuildResult build_sentences(std::span<const LabeledPhrase> phrases,
                            std::span<const CarrierTemplate> templates,
                            std::span<const std::vector<Token>> corpus_sentences,
                            const BuildOptions& options) {
  if (templates.empty()) throw ValidationError("build_sentences needs at least one template");
  if (options.per_phrase < 1) throw ValidationError("per_phrase must be >= 1");

  std::vector<std::size_t> order(templates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(options.seed);
  rng.shuffle(order);

  const CorpusIndex index(corpus_sentences);
  BuildResult out;
  std::size_t slot = 0;
  for (const LabeledPhrase& p : phrases) {
    if (p.tokens.empty()) throw ValidationError("empty phrase");
    const auto hits = corpus_sentences.empty() ? decltype(index.find(p.tokens)){}
                                               : index.find(p.tokens);
    for (int copy = 0; copy < options.per_phrase; ++copy) {
      const std::size_t template_idx = order[slot++ % order.size()];
      std::vector<Token> tokens;
      int start = 0;
      if (static_cast<std::size_t>(copy) < hits.size()) {
        const auto [sent, pos] = hits[copy];
        tokens = corpus_sentences[sent];
        start = static_cast<int>(pos);
        ++out.from_corpus;
      } else {
        const CarrierTemplate& t = templates[template_idx];
        tokens = t.prefix;
        start = static_cast<int>(tokens.size());
        for (const std::string& w : p.tokens) tokens.emplace_back(w);
        tokens.insert(tokens.end(), t.suffix.begin(), t.suffix.end());
      }
      if (static_cast<int>(tokens.size()) > options.max_tokens) {
        ++out.skipped;
        continue;
      }
      const Span span{start, start + static_cast<int>(p.tokens.size())};
      auto tags = bio_encode(static_cast<int>(tokens.size()), std::span(&span, 1));
      out.sentences.emplace_back(std::move(tokens), std::move(tags), p.sense);
    }
  }
  return out;
}

BuildResult build_sentences(std::span<const LabeledPhrase> phrases,
                            std::span<const CarrierTemplate> templates,
                            const BuildOptions& options) {
  return build_sentences(phrases, templates, {}, options);
}

}  // namespace sensery
