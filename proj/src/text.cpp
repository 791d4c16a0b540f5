#include "sensery/text.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "sensery/error.hpp"

namespace sensery {

std::string_view sense_name(Sense sense) {
  return sense == Sense::Audible ? "audible" : "olfactible";
}

Sense parse_sense(std::string_view name) {
  if (name == "audible" || name == "sound") return Sense::Audible;
  if (name == "olfactible" || name == "smell") return Sense::Olfactible;
  throw ValidationError("unknown sense '" + std::string(name) + "'");
}

std::string_view tag_name(BioTag tag) {
  switch (tag) {
    case BioTag::B: return "B";
    case BioTag::I: return "I";
    case BioTag::O: return "O";
  }
  return "O";
}

BioTag parse_tag(std::string_view s) {
  if (s == "B") return BioTag::B;
  if (s == "I") return BioTag::I;
  if (s == "O") return BioTag::O;
  throw ValidationError("invalid tag '" + std::string(s) + "' (expected B, I or O)");
}

std::string case_fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

Token::Token(std::string surface_text, std::optional<std::string> pos_tag)
    : surface(std::move(surface_text)), lower(case_fold(surface)), pos(std::move(pos_tag)) {}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

bool is_punct_token(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_ascii_punct);
}

bool is_bio_valid(std::span<const BioTag> tags) {
  BioTag prev = BioTag::O;
  for (BioTag t : tags) {
    if (t == BioTag::I && prev == BioTag::O) return false;
    prev = t;
  }
  return true;
}

TaggedSentence::TaggedSentence(std::vector<Token> tokens, std::vector<BioTag> tags,
                               Sense sense)
    : tokens_(std::move(tokens)), tags_(std::move(tags)), sense_(sense) {
  if (tokens_.size() != tags_.size()) {
    throw ValidationError("sentence has " + std::to_string(tokens_.size()) +
                          " tokens but " + std::to_string(tags_.size()) + " tags");
  }
  if (!is_bio_valid(tags_)) throw ValidationError("tag sequence is not BIO-valid");
  for (const Token& t : tokens_) {
    if (t.surface.empty()) throw ValidationError("empty token surface");
  }
}

TaggedSentence TaggedSentence::untagged(std::vector<Token> tokens, Sense sense) {
  std::vector<BioTag> tags(tokens.size(), BioTag::O);
  return TaggedSentence(std::move(tokens), std::move(tags), sense);
}

std::vector<Span> TaggedSentence::spans() const { return bio_decode(tags_); }

std::vector<std::string> TaggedSentence::surfaces() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const Token& t : tokens_) out.push_back(t.surface);
  return out;
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    std::string_view chunk = text.substr(i, j - i);
    i = j;

    std::size_t lo = 0;
    std::size_t hi = chunk.size();
    while (lo < hi && is_ascii_punct(chunk[lo])) ++lo;
    while (hi > lo && is_ascii_punct(chunk[hi - 1])) --hi;
    for (std::size_t k = 0; k < lo; ++k) out.emplace_back(std::string(1, chunk[k]));
    if (hi > lo) out.emplace_back(std::string(chunk.substr(lo, hi - lo)));
    for (std::size_t k = std::max(hi, lo); k < chunk.size(); ++k) {
      out.emplace_back(std::string(1, chunk[k]));
    }
  }
  return out;
}

std::vector<BioTag> bio_encode(int n, std::span<const Span> spans) {
  if (n < 0) throw ValidationError("negative sentence length");
  std::vector<BioTag> tags(static_cast<std::size_t>(n), BioTag::O);
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (const Span& s : spans) {
    if (s.start < 0 || s.start >= s.end || s.end > n) {
      throw ValidationError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                            ") out of range for length " + std::to_string(n));
    }
    for (int k = s.start; k < s.end; ++k) {
      if (used[k]) throw ValidationError("overlapping spans at token " + std::to_string(k));
      used[k] = true;
      tags[k] = k == s.start ? BioTag::B : BioTag::I;
    }
  }
  return tags;
}

std::vector<Span> bio_decode(std::span<const BioTag> tags) {
  std::vector<Span> spans;
  int open = -1;
  const int n = static_cast<int>(tags.size());
  for (int k = 0; k < n; ++k) {
    switch (tags[k]) {
      case BioTag::B:
        if (open >= 0) spans.push_back({open, k});
        open = k;
        break;
      case BioTag::I:
        if (open < 0) {
          throw ValidationError("I tag at position " + std::to_string(k) +
                                " does not continue a mention");
        }
        break;
      case BioTag::O:
        if (open >= 0) spans.push_back({open, k});
        open = -1;
        break;
    }
  }
  if (open >= 0) spans.push_back({open, n});
  return spans;
}

void repair_bio(std::vector<BioTag>& tags) {
  BioTag prev = BioTag::O;
  for (BioTag& t : tags) {
    if (t == BioTag::I && prev == BioTag::O) t = BioTag::B;
    prev = t;
  }
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> cols;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

}  // namespace

std::vector<TaggedSentence> read_conll(std::istream& in, Sense sense, const std::string& source) {
  std::vector<TaggedSentence> out;
  std::vector<Token> tokens;
  std::vector<BioTag> tags;
  long sentence_line = 0;
  long line_no = 0;

  const auto flush = [&]() {
    if (tokens.empty()) return;
    if (!is_bio_valid(tags)) {
      throw ParseError(source, sentence_line, "sentence is not BIO-valid");
    }
    out.emplace_back(std::move(tokens), std::move(tags), sense);
    tokens.clear();
    tags.clear();
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    const auto cols = split_tabs(line);
    if (cols.size() != 3) {
      throw ParseError(source, line_no,
                       "expected 3 tab-separated columns, found " + std::to_string(cols.size()));
    }
    if (cols[0].empty()) throw ParseError(source, line_no, "empty token");
    BioTag tag;
    try {
      tag = parse_tag(cols[2]);
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (tokens.empty()) sentence_line = line_no;
    if (tag == BioTag::I && (tags.empty() || tags.back() == BioTag::O)) {
      throw ParseError(source, line_no, "I tag does not continue a mention");
    }
    std::optional<std::string> pos;
    if (cols[1] != "_" && !cols[1].empty()) pos = std::string(cols[1]);
    tokens.emplace_back(std::string(cols[0]), std::move(pos));
    tags.push_back(tag);
  }
  if (in.bad()) throw IoError("read failed: " + source);
  flush();
  return out;
}

std::vector<TaggedSentence> read_conll(const std::filesystem::path& path, Sense sense) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_conll(in, sense, path.string());
}

void write_conll(std::ostream& out, std::span<const TaggedSentence> sentences) {
  for (const TaggedSentence& s : sentences) {
    if (s.empty()) throw ValidationError("cannot write an empty sentence in CoNLL format");
    for (std::size_t i = 0; i < s.size(); ++i) {
      const Token& t = s.tokens()[i];
      if (t.surface.find_first_of("\t\n\r") != std::string::npos) {
        throw ValidationError("token contains a tab or newline: '" + t.surface + "'");
      }
      out << t.surface << '\t' << (t.pos ? *t.pos : "_") << '\t' << tag_name(s.tags()[i])
          << '\n';
    }
    out << '\n';
  }
}

void write_conll(const std::filesystem::path& path, std::span<const TaggedSentence> sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_conll(out, sentences);
  if (!out) throw IoError("write failed: " + path.string());
}

std::string join(std::span<const std::string> words, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

}  // namespace sensery
