#include "sensery/patterns.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "sensery/error.hpp"

#ifndef SENSERY_DEFAULT_DATA_DIR
#define SENSERY_DEFAULT_DATA_DIR "data"
#endif

namespace sensery {

std::string_view provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Pattern: return "pattern";
    case Provenance::Crowd: return "crowd";
    case Provenance::Mixture: return "mixture";
  }
  return "pattern";
}

Provenance parse_provenance(std::string_view s) {
  if (s == "pattern") return Provenance::Pattern;
  if (s == "crowd") return Provenance::Crowd;
  if (s == "mixture") return Provenance::Mixture;
  throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

std::vector<SensePattern> default_patterns() {
  return {{{"sound", "of"}, Sense::Audible}, {{"smell", "of"}, Sense::Olfactible}};
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("SENSERY_DATA_DIR"); env && *env) return env;
  return SENSERY_DEFAULT_DATA_DIR;
}

StopList StopList::parse(std::istream& in) {
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    for (const Token& t : tokenize(line)) words.insert(t.lower);
  }
  return StopList(std::move(words));
}

StopList StopList::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open stop list " + path.string());
  return parse(in);
}

StopList StopList::load_default() { return load(default_data_dir() / "stoplist.txt"); }

namespace {

bool is_determiner(std::string_view w) { return w == "a" || w == "an" || w == "the"; }

bool is_trigger_word(std::string_view w, std::span<const SensePattern> patterns) {
  for (const SensePattern& p : patterns) {
    if (std::find(p.trigger.begin(), p.trigger.end(), w) != p.trigger.end()) return true;
  }
  return false;
}

}  // namespace

std::optional<std::vector<std::string>> extract_phrase(std::span<const Token> tokens,
                                                       std::size_t match_end,
                                                       const StopList& stop,
                                                       std::span<const SensePattern> patterns) {
  std::size_t i = match_end;
  if (i < tokens.size() && is_determiner(tokens[i].lower)) ++i;
  std::vector<std::string> phrase;
  for (; i < tokens.size() && phrase.size() < kMaxPhraseTokens; ++i) {
    const std::string& w = tokens[i].lower;
    if (is_punct_token(w) || stop.contains(w) || is_trigger_word(w, patterns)) break;
    phrase.push_back(w);
  }
  if (phrase.empty()) return std::nullopt;
  return phrase;
}

long ScanResult::count(Sense sense) const {
  return std::count_if(phrases.begin(), phrases.end(),
                       [&](const LabeledPhrase& p) { return p.sense == sense; });
}

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (int k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates, out of range.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) || (extra == 3 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

PhraseCounter::PhraseCounter(std::vector<SensePattern> patterns, const StopList& stop)
    : patterns_(std::move(patterns)), stop_(&stop) {
  for (const SensePattern& p : patterns_) {
    if (p.trigger.empty()) throw ValidationError("pattern with an empty trigger");
  }
}

void PhraseCounter::add_line(std::string_view line) {
  ++lines_;
  if (!is_valid_utf8(line)) {
    ++malformed_;
    return;
  }
  const std::vector<Token> tokens = tokenize(line);
  for (const SensePattern& p : patterns_) {
    const std::size_t len = p.trigger.size();
    for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
      bool hit = true;
      for (std::size_t k = 0; k < len && hit; ++k) hit = tokens[i + k].lower == p.trigger[k];
      if (!hit) continue;
      ++raw_matches_;
      auto phrase = extract_phrase(tokens, i + len, *stop_, patterns_);
      if (!phrase) {
        ++discarded_;
        continue;
      }
      ++counts_[{p.sense, std::move(*phrase)}];
    }
  }
}

void PhraseCounter::merge(const PhraseCounter& other) {
  for (const auto& [key, n] : other.counts_) counts_[key] += n;
  lines_ += other.lines_;
  raw_matches_ += other.raw_matches_;
  discarded_ += other.discarded_;
  malformed_ += other.malformed_;
}

ScanResult PhraseCounter::finish() const {
  ScanResult r;
  r.lines = lines_;
  r.raw_matches = raw_matches_;
  r.discarded = discarded_;
  r.malformed_lines = malformed_;
  r.phrases.reserve(counts_.size());
  for (const auto& [key, n] : counts_) {
    r.phrases.push_back({key.second, key.first, Provenance::Pattern, n});
  }
  std::stable_sort(r.phrases.begin(), r.phrases.end(),
                   [](const LabeledPhrase& a, const LabeledPhrase& b) {
                     if (a.sense != b.sense) return a.sense < b.sense;
                     if (a.frequency != b.frequency) return a.frequency > b.frequency;
                     return a.text() < b.text();
                   });
  return r;
}

ScanResult scan_corpus(std::istream& corpus, std::span<const SensePattern> patterns,
                       const StopList& stop) {
  PhraseCounter counter({patterns.begin(), patterns.end()}, stop);
  std::string line;
  while (std::getline(corpus, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    counter.add_line(line);
  }
  if (corpus.bad()) throw IoError("corpus read failed");
  return counter.finish();
}

ScanResult scan_corpus(const std::filesystem::path& corpus, std::span<const SensePattern> patterns,
                       const StopList& stop) {
  std::ifstream in(corpus, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + corpus.string());
  return scan_corpus(in, patterns, stop);
}

void write_phrases(std::ostream& out, std::span<const LabeledPhrase> phrases) {
  for (const LabeledPhrase& p : phrases) {
    nlohmann::ordered_json j;
    j["phrase"] = p.tokens;
    j["sense"] = sense_name(p.sense);
    j["provenance"] = provenance_name(p.provenance);
    j["freq"] = p.frequency;
    out << j.dump() << '\n';
  }
}

void write_phrases(const std::filesystem::path& path, std::span<const LabeledPhrase> phrases) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_phrases(out, phrases);
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<LabeledPhrase> read_phrases(std::istream& in, const std::string& source) {
  std::vector<LabeledPhrase> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledPhrase p;
      p.tokens = j.at("phrase").get<std::vector<std::string>>();
      p.sense = parse_sense(j.at("sense").get<std::string>());
      p.provenance = parse_provenance(j.value("provenance", std::string("pattern")));
      p.frequency = j.value("freq", 1L);
      if (p.tokens.empty()) throw ValidationError("empty phrase");
      if (p.frequency < 1) throw ValidationError("frequency must be >= 1");
      out.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::vector<LabeledPhrase> read_phrases(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_phrases(in, path.string());
}

}  // namespace sensery
