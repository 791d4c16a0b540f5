#include "sensery/pos.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

namespace sensery {

namespace {

const std::unordered_map<std::string_view, std::string_view>& lexicon() {
  static const std::unordered_map<std::string_view, std::string_view> table = {
      {"a", "DT"},       {"an", "DT"},     {"the", "DT"},     {"this", "DT"},
      {"that", "DT"},    {"these", "DT"},  {"those", "DT"},   {"some", "DT"},
      {"every", "DT"},   {"no", "DT"},     {"any", "DT"},     {"all", "DT"},
      {"of", "IN"},      {"in", "IN"},     {"on", "IN"},      {"at", "IN"},
      {"from", "IN"},    {"with", "IN"},   {"by", "IN"},      {"for", "IN"},
      {"into", "IN"},    {"over", "IN"},   {"under", "IN"},   {"through", "IN"},
      {"near", "IN"},    {"behind", "IN"}, {"after", "IN"},   {"before", "IN"},
      {"during", "IN"},  {"like", "IN"},   {"about", "IN"},   {"across", "IN"},
      {"outside", "IN"}, {"inside", "IN"}, {"while", "IN"},   {"because", "IN"},
      {"and", "CC"},     {"or", "CC"},     {"but", "CC"},     {"nor", "CC"},
      {"to", "TO"},      {"i", "PRP"},     {"you", "PRP"},    {"he", "PRP"},
      {"she", "PRP"},    {"it", "PRP"},    {"we", "PRP"},     {"they", "PRP"},
      {"me", "PRP"},     {"him", "PRP"},   {"her", "PRP$"},   {"us", "PRP"},
      {"them", "PRP"},   {"my", "PRP$"},   {"your", "PRP$"},  {"his", "PRP$"},
      {"its", "PRP$"},   {"our", "PRP$"},  {"their", "PRP$"}, {"is", "VBZ"},
      {"was", "VBD"},    {"are", "VBP"},   {"were", "VBD"},   {"be", "VB"},
      {"been", "VBN"},   {"has", "VBZ"},   {"had", "VBD"},    {"have", "VBP"},
      {"can", "MD"},     {"could", "MD"},  {"would", "MD"},   {"will", "MD"},
      {"should", "MD"},  {"may", "MD"},    {"might", "MD"},   {"must", "MD"},
      {"not", "RB"},     {"very", "RB"},   {"there", "EX"},
  };
  return table;
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() > suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace

std::string guess_pos(std::string_view surface) {
  if (is_punct_token(surface)) return surface == "." || surface == "!" || surface == "?" ? "." : ",";
  if (std::any_of(surface.begin(), surface.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return "CD";
  }
  const std::string lower = case_fold(surface);
  if (auto it = lexicon().find(lower); it != lexicon().end()) return std::string(it->second);
  if (ends_with(lower, "ing")) return "VBG";
  if (ends_with(lower, "ed")) return "VBD";
  if (ends_with(lower, "ly")) return "RB";
  if (ends_with(lower, "ous") || ends_with(lower, "ful") || ends_with(lower, "ive") ||
      ends_with(lower, "able")) {
    return "JJ";
  }
  if (ends_with(lower, "s") && !ends_with(lower, "ss")) return "NNS";
  return "NN";
}

std::vector<Token> with_pos(std::span<const Token> tokens) {
  std::vector<Token> out(tokens.begin(), tokens.end());
  for (Token& t : out) {
    if (!t.pos) t.pos = guess_pos(t.surface);
  }
  return out;
}

TaggedSentence with_pos(const TaggedSentence& sentence) {
  return TaggedSentence(with_pos(sentence.tokens()), sentence.tags(), sentence.sense());
}

}  // namespace sensery
