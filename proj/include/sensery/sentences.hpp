#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sensery/patterns.hpp"
#include "sensery/text.hpp"

namespace sensery {

// A carrier sentence with one slot, written "<y>" in template files:
//   i noticed the smell of <y> today .
struct CarrierTemplate {
  std::vector<Token> prefix;
  std::vector<Token> suffix;

  static CarrierTemplate parse(std::string_view line);
  std::string text() const;
  bool operator==(const CarrierTemplate&) const = default;
};

// One template per non-blank line; '#' lines are comments.
std::vector<CarrierTemplate> parse_templates(std::istream& in, const std::string& source = "<stream>");
std::vector<CarrierTemplate> load_templates(const std::filesystem::path& path);

struct BuildOptions {
  std::uint64_t seed = 1;
  int per_phrase = 1;     // sentences generated for each phrase
  int max_tokens = 128;   // longer instantiations are skipped
};

struct BuildResult {
  std::vector<TaggedSentence> sentences;
  long skipped = 0;
  long from_corpus = 0;
};

// Places each phrase in a template (or, preferentially, in a corpus sentence
// that contains it) and tags the phrase B I..I, everything else O. Templates
// are assigned round-robin over a seeded shuffle.
BuildResult build_sentences(std::span<const LabeledPhrase> phrases,
                            std::span<const CarrierTemplate> templates,
                            std::span<const std::vector<Token>> corpus_sentences,
                            const BuildOptions& options);

BuildResult build_sentences(std::span<const LabeledPhrase> phrases,
                            std::span<const CarrierTemplate> templates,
                            const BuildOptions& options);

}  // namespace sensery
