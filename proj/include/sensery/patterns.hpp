#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "sensery/text.hpp"

namespace sensery {

enum class Provenance : std::uint8_t { Pattern, Crowd, Mixture };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view s);

// "<trigger> <y>": the phrase y is harvested right after the trigger tokens.
struct SensePattern {
  std::vector<std::string> trigger;  // case-folded
  Sense sense;
};

// "sound of <y>" and "smell of <y>".
std::vector<SensePattern> default_patterns();

// Phrase tokens are stored case-folded, so "Sound of Rain" and "sound of
// rain" count as the same phrase.
struct LabeledPhrase {
  std::vector<std::string> tokens;
  Sense sense = Sense::Audible;
  Provenance provenance = Provenance::Pattern;
  long frequency = 1;

  std::string text() const { return join(tokens); }
  bool operator==(const LabeledPhrase&) const = default;
};

// Words that end a harvested phrase: prepositions, conjunctions, pronouns.
// Loaded from a data file, one word per line, '#' starts a comment.
class StopList {
 public:
  StopList() = default;
  explicit StopList(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  static StopList load(const std::filesystem::path& path);
  static StopList parse(std::istream& in);
  // data/stoplist.txt from the source tree (or SENSERY_DATA_DIR at runtime).
  static StopList load_default();

  bool contains(std::string_view lower) const { return words_.contains(std::string(lower)); }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

inline constexpr std::size_t kMaxPhraseTokens = 4;

// Harvests the phrase that follows a trigger ending at `match_end`. Returns
// nullopt when nothing is left after stripping a leading determiner and
// cutting at the first boundary token.
std::optional<std::vector<std::string>> extract_phrase(std::span<const Token> tokens,
                                                       std::size_t match_end,
                                                       const StopList& stop,
                                                       std::span<const SensePattern> patterns = {});

struct ScanResult {
  std::vector<LabeledPhrase> phrases;  // sorted (sense, -frequency, text)
  long lines = 0;
  long raw_matches = 0;
  long discarded = 0;        // matches that yielded no phrase
  long malformed_lines = 0;  // invalid UTF-8, skipped

  long count(Sense sense) const;
};

// Accumulates matches line by line. Counters from independent shards merge
// by addition, so the result does not depend on how the corpus was split.
class PhraseCounter {
 public:
  PhraseCounter(std::vector<SensePattern> patterns, const StopList& stop);

  void add_line(std::string_view line);
  void merge(const PhraseCounter& other);
  ScanResult finish() const;

 private:
  std::vector<SensePattern> patterns_;
  const StopList* stop_;
  std::map<std::pair<Sense, std::vector<std::string>>, long> counts_;
  long lines_ = 0;
  long raw_matches_ = 0;
  long discarded_ = 0;
  long malformed_ = 0;
};

ScanResult scan_corpus(std::istream& corpus, std::span<const SensePattern> patterns,
                       const StopList& stop);
ScanResult scan_corpus(const std::filesystem::path& corpus,
                       std::span<const SensePattern> patterns, const StopList& stop);

bool is_valid_utf8(std::string_view s);

// JSON-lines: {"phrase": [...], "sense": "...", "provenance": "...", "freq": n}
void write_phrases(std::ostream& out, std::span<const LabeledPhrase> phrases);
void write_phrases(const std::filesystem::path& path, std::span<const LabeledPhrase> phrases);
std::vector<LabeledPhrase> read_phrases(std::istream& in, const std::string& source = "<stream>");
std::vector<LabeledPhrase> read_phrases(const std::filesystem::path& path);

std::filesystem::path default_data_dir();

}  // namespace sensery
