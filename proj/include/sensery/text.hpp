#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sensery {

// Which sense a mention refers to. Sound and smell taggers are trained
// separately, so tags never carry the sense themselves.
enum class Sense : std::uint8_t { Audible = 0, Olfactible = 1 };

inline constexpr Sense kAllSenses[] = {Sense::Audible, Sense::Olfactible};

std::string_view sense_name(Sense sense);  // "audible" / "olfactible"
Sense parse_sense(std::string_view name);  // also accepts "sound" / "smell"

enum class BioTag : std::uint8_t { B = 0, I = 1, O = 2 };

inline constexpr int kNumTags = 3;

inline int tag_index(BioTag t) { return static_cast<int>(t); }
inline BioTag tag_from_index(int i) { return static_cast<BioTag>(i); }
std::string_view tag_name(BioTag tag);
BioTag parse_tag(std::string_view s);  // throws ValidationError

struct Token {
  std::string surface;              // original case
  std::string lower;                // ASCII case-folded surface
  std::optional<std::string> pos;

  Token() = default;
  explicit Token(std::string surface_text,
                 std::optional<std::string> pos_tag = std::nullopt);

  bool operator==(const Token&) const = default;
};

std::string case_fold(std::string_view s);
bool is_ascii_punct(char c);
bool is_punct_token(std::string_view s);

// Half-open token range [start, end).
struct Span {
  int start = 0;
  int end = 0;

  int length() const { return end - start; }
  auto operator<=>(const Span&) const = default;
};

bool is_bio_valid(std::span<const BioTag> tags);

// A sentence whose tags are guaranteed BIO-valid: the constructor rejects
// anything else, so every instance in the program satisfies the invariant.
class TaggedSentence {
 public:
  TaggedSentence() = default;
  TaggedSentence(std::vector<Token> tokens, std::vector<BioTag> tags,
                 Sense sense = Sense::Audible);

  // All-O sentence.
  static TaggedSentence untagged(std::vector<Token> tokens,
                                 Sense sense = Sense::Audible);

  const std::vector<Token>& tokens() const { return tokens_; }
  const std::vector<BioTag>& tags() const { return tags_; }
  Sense sense() const { return sense_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  std::vector<Span> spans() const;
  std::vector<std::string> surfaces() const;

  bool operator==(const TaggedSentence&) const = default;

 private:
  std::vector<Token> tokens_;
  std::vector<BioTag> tags_;
  Sense sense_ = Sense::Audible;
};

// Whitespace split, then ASCII punctuation peeled off each chunk's edges into
// single-character tokens. Internal punctuation ("fresh-cut") stays.
std::vector<Token> tokenize(std::string_view text);

std::vector<BioTag> bio_encode(int n, std::span<const Span> spans);
std::vector<Span> bio_decode(std::span<const BioTag> tags);

// Rewrites every I that does not continue a mention into B.
void repair_bio(std::vector<BioTag>& tags);

// CoNLL-style TSV: surface<TAB>pos<TAB>tag, "_" for missing POS, blank line
// between sentences. The format has no sense column; the caller supplies it.
std::vector<TaggedSentence> read_conll(std::istream& in, Sense sense = Sense::Audible,
                                       const std::string& source = "<stream>");
std::vector<TaggedSentence> read_conll(const std::filesystem::path& path,
                                       Sense sense = Sense::Audible);
void write_conll(std::ostream& out, std::span<const TaggedSentence> sentences);
void write_conll(const std::filesystem::path& path,
                 std::span<const TaggedSentence> sentences);

std::string join(std::span<const std::string> words, std::string_view sep = " ");

}  // namespace sensery
