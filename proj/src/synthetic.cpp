#include "sensery/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "sensery/annotation.hpp"
#include "sensery/error.hpp"
#include "sensery/model_io.hpp"
#include "sensery/rng.hpp"

namespace sensery {

namespace {

struct SenseLexicon {
  std::vector<std::string> heads;
  std::vector<std::string> modifiers;
  std::vector<std::string> required_pairs;  // always planted
  std::string trigger;                      // "sound" / "smell"
  std::vector<std::string> openers;         // text before "the <trigger> of"
  std::vector<std::string> closers;         // start with a stop word or punctuation
};

SenseLexicon audible_lexicon() {
  return {{"cars", "glass", "music", "thunder", "bells", "drums", "sirens", "engines", "footsteps",
           "laughter", "applause", "whistles", "waves", "rain", "wind", "birds", "dogs", "horns",
           "trains", "guitars", "voices", "hammers", "chimes", "crickets", "gunshots", "snoring",
           "fireworks", "trumpets", "owls", "frogs"},
          {"honking", "breaking", "live", "distant", "loud", "rolling", "ringing", "crashing",
           "barking", "chirping", "ticking", "roaring", "clanging", "howling", "buzzing"},
          {"honking cars", "breaking glass", "live music"},
          "sound",
          {"i heard", "we could hear", "she loved", "they complained about", "he woke up to",
           "nobody minded"},
          {"in the street .", "at night .", "from the window .", "near the station .", ".",
           "during the storm .", "outside the house ."}};
}

SenseLexicon olfactible_lexicon() {
  return {{"rubber", "paint", "blossoms", "chlorine", "coffee", "bread", "smoke", "garlic", "roses",
           "perfume", "bacon", "vinegar", "pine", "lavender", "onions", "gasoline", "cinnamon",
           "leather", "compost", "sewage", "seaweed", "tobacco", "popcorn", "lilacs", "manure",
           "bleach", "incense", "mint", "toast", "fish"},
          {"burning", "fresh", "citrus", "baking", "rotting", "roasted", "sweet", "stale", "damp",
           "smoky", "sour", "frying", "toasted", "spicy", "musty"},
          {"burning rubber", "fresh paint", "citrus blossoms"},
          "smell",
          {"i noticed", "we could smell", "she loved", "they complained about", "he woke up to",
           "nobody minded"},
          {"in the kitchen .", "at the market .", "from the garden .", "near the harbor .", ".",
           "after the rain .", "inside the car ."}};
}

const std::vector<std::string>& noise_words() {
  static const std::vector<std::string> words = {
      "money",   "success",  "victory", "fear",     "trouble", "change",     "doubt",
      "danger",  "freedom",  "progress", "history", "youth",   "defeat",     "ambition",
      "power",   "reason",   "despair", "hope",     "treason", "scandal",    "betrayal",
      "greed",   "fame",     "revolution", "desperation"};
  return words;
}

const std::vector<std::string>& filler_lines() {
  static const std::vector<std::string> lines = {
      "the meeting ran late again .", "we walked to the station after lunch .",
      "she painted the fence on sunday .", "the sound was great .",
      "they smell trouble everywhere .", "our neighbors moved away last year .",
      "he fixed the old radio .", "the train left at noon .",
      "i bought bread and milk .", "the river was calm that morning .",
      "nobody answered the phone .", "the museum opens at nine .",
      "we planted tomatoes in the garden .", "the dog slept by the door .",
      "she read the letter twice .", "the bus was late .",
      "the festival drew a large crowd .", "he forgot his umbrella .",
      "the smell lingered .", "our team won the final ."};
  return lines;
}

// Test carriers rearrange words of the training carriers; the non-sense
// words are the only tokens they add.
const std::vector<std::string>& train_templates() {
  static const std::vector<std::string> t = {
      "<y> filled the hall that evening .",
      "everyone remembers <y> from the trip .",
      "we talked about <y> for hours .",
      "the children loved <y> .",
      "<y> was the first thing she described .",
      "nobody expected <y> at the party .",
      "he wrote a poem about <y> .",
      "<y> came up again in the story .",
      "our guide pointed out <y> .",
      "she mentioned <y> twice .",
      "later , <y> was all anyone discussed .",
      "the report said <y> was common there .",
      "i still think about <y> .",
      "they described <y> in detail .",
      "there was <y> near the old bridge .",
      "<y> reminded her of home .",
      "a feeling of calm came with <y> .",
      "the old books describe <y> .",
      "memories of <y> stayed with him .",
      "despite the cold , <y> kept us awake .",
      "with the window open , we noticed <y> .",
      "<y> brought back the summer .",
      "for a moment , <y> was everywhere .",
      "amid the crowd , she recalled <y> .",
      "the guests never mention <y> .",
      "besides <y> , little else was left .",
      "<y> and the long walk home made the day .",
      "for reasons unknown , <y> was ignored ."};
  return t;
}

const std::vector<std::string>& test_templates() {
  static const std::vector<std::string> t = {
      "<y> reminded him of money and fear .",
      "despite the trouble , <y> stayed with us .",
      "there was <y> and a feeling of victory .",
      "amid all the scandal , we recalled <y> .",
      "<y> brought back memories of youth and ambition .",
      "with little hope left , she described <y> .",
      "the history books never mention <y> .",
      "for reasons of power and greed , <y> was ignored ."};
  return t;
}

std::vector<double> unit_gaussian(Rng& rng, int dim) {
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = rng.normal() / std::sqrt(static_cast<double>(dim));
  return v;
}

// Three mutually orthogonal unit centers.
std::array<std::vector<double>, 3> cluster_centers(Rng& rng, int dim) {
  std::array<std::vector<double>, 3> c;
  for (int k = 0; k < 3; ++k) {
    std::vector<double> v = unit_gaussian(rng, dim);
    for (int j = 0; j < k; ++j) {
      double dot = 0.0;
      for (int d = 0; d < dim; ++d) dot += v[d] * c[j][d];
      for (int d = 0; d < dim; ++d) v[d] -= dot * c[j][d];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
    c[k] = std::move(v);
  }
  return c;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

SyntheticTruth write_synthetic_world(const std::filesystem::path& dir, const SyntheticSpec& spec) {
  if (spec.dim < 3 || spec.pairs_per_sense < 0 || spec.filler_lines < 0) {
    throw ValidationError("synthetic spec: dim must be >= 3 and counts non-negative");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  Rng rng(spec.seed);
  SyntheticTruth truth;
  truth.noise_words = noise_words();
  const std::array<SenseLexicon, 2> lex = {audible_lexicon(), olfactible_lexicon()};

  std::vector<std::string> lines;
  for (Sense s : kAllSenses) {
    const SenseLexicon& L = lex[static_cast<int>(s)];
    auto& planted = truth.sense_phrases[static_cast<int>(s)];
    for (const std::string& p : L.required_pairs) planted.insert(p);
    std::vector<std::string> pairs;
    for (const std::string& m : L.modifiers) {
      for (const std::string& h : L.heads) pairs.push_back(m + " " + h);
    }
    const std::size_t want = std::min(pairs.size(), static_cast<std::size_t>(spec.pairs_per_sense));
    for (std::size_t i : rng.sample_indices(pairs.size(), pairs.size())) {
      if (planted.size() >= want) break;
      planted.insert(pairs[i]);
    }
    for (const std::string& w : truth.noise_words) truth.noise_phrases[static_cast<int>(s)].insert(w);

    const auto emit = [&](const std::string& phrase, int copies) {
      for (int c = 0; c < copies; ++c) {
        const std::string& opener = L.openers[rng.uniform_index(L.openers.size())];
        const std::string& closer = L.closers[rng.uniform_index(L.closers.size())];
        const bool capitalize = rng.uniform() < 0.2;
        std::string line = opener + " the " + L.trigger + " of " + phrase + " " + closer;
        if (capitalize) line[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(line[0])));
        lines.push_back(std::move(line));
      }
    };
    for (const std::string& p : planted) emit(p, 1 + static_cast<int>(rng.uniform_index(3)));
    for (const std::string& p : truth.noise_phrases[static_cast<int>(s)]) {
      emit(p, 1 + static_cast<int>(rng.uniform_index(2)));
    }
  }
  // Lines carrying both triggers.
  for (int k = 0; k < 20; ++k) {
    const auto& a = truth.sense_phrases[0];
    const auto& o = truth.sense_phrases[1];
    const auto pick = [&](const std::set<std::string>& s) {
      return *std::next(s.begin(), static_cast<long>(rng.uniform_index(s.size())));
    };
    lines.push_back("the sound of " + pick(a) + " and the smell of " + pick(o) + " in the air .");
  }
  for (int k = 0; k < spec.filler_lines; ++k) {
    lines.push_back(filler_lines()[rng.uniform_index(filler_lines().size())]);
  }
  rng.shuffle(lines);
  {
    auto out = open_out(dir / "corpus.txt");
    for (const std::string& l : lines) out << l << '\n';
  }

  // Extraction over the generated corpus must recover the plan exactly.
  const ScanResult scan = scan_corpus(dir / "corpus.txt", default_patterns(), StopList::load_default());
  for (Sense s : kAllSenses) {
    std::set<std::string> expected = truth.sense_phrases[static_cast<int>(s)];
    expected.insert(truth.noise_phrases[static_cast<int>(s)].begin(),
                    truth.noise_phrases[static_cast<int>(s)].end());
    std::set<std::string> got;
    for (const LabeledPhrase& p : scan.phrases) {
      if (p.sense == s) got.insert(p.text());
    }
    if (got != expected) {
      throw ValidationError("synthetic world: extraction does not match the planted " +
                            std::string(sense_name(s)) + " phrases");
    }
  }

  // Word vectors: sense words around their cluster, noise words around a
  // third, all remaining words isotropic.
  const auto centers = cluster_centers(rng, spec.dim);
  std::map<std::string, int> cluster;
  for (Sense s : kAllSenses) {
    const SenseLexicon& L = lex[static_cast<int>(s)];
    for (const auto& w : L.heads) cluster[w] = static_cast<int>(s);
    for (const auto& w : L.modifiers) cluster[w] = static_cast<int>(s);
  }
  for (const auto& w : truth.noise_words) cluster[w] = 2;
  std::set<std::string> vocab;
  const auto add_words = [&](const std::string& text) {
    for (const Token& t : tokenize(text)) {
      if (t.surface != "<y>") vocab.insert(t.lower);
    }
  };
  for (const auto& l : lines) add_words(l);
  for (const auto& t : train_templates()) add_words(t);
  for (const auto& t : test_templates()) add_words(t);
  {
    auto out = open_out(dir / "vectors.txt");
    out << vocab.size() << ' ' << spec.dim << '\n';
    char buf[32];
    for (const std::string& w : vocab) {
      const std::vector<double> g = unit_gaussian(rng, spec.dim);
      const auto it = cluster.find(w);
      out << w;
      for (int d = 0; d < spec.dim; ++d) {
        const double x = it == cluster.end() ? g[d] : centers[it->second][d] + spec.word_noise * g[d];
        std::snprintf(buf, sizeof buf, " %.6f", x);
        out << buf;
      }
      out << '\n';
    }
  }

  // Three simulated annotators answer every harvested phrase.
  std::vector<AnnotationResponse> responses;
  std::int64_t clock = 1700000000;
  for (const LabeledPhrase& p : scan.phrases) {
    const bool real = truth.sense_phrases[static_cast<int>(p.sense)].contains(p.text());
    const double yes = real ? spec.yes_rate_true : spec.yes_rate_noise;
    for (const char* who : {"a1", "a2", "a3"}) {
      const double u = rng.uniform();
      const Answer a = u < yes                          ? Answer::Yes
                       : u < yes + spec.notsure_rate ? Answer::NotSure
                                                      : Answer::No;
      responses.push_back({make_task_id(p), who, a, clock++});
    }
  }
  write_responses(dir / "responses.jsonl", responses);

  {
    auto out = open_out(dir / "templates_train.txt");
    out << "# carrier sentences for training data; <y> marks the phrase slot\n";
    for (const auto& t : train_templates()) out << t << '\n';
  }
  {
    auto out = open_out(dir / "templates_test.txt");
    out << "# held-out carriers; each mentions a metaphorical non-sense word\n";
    for (const auto& t : test_templates()) out << t << '\n';
  }

  nlohmann::ordered_json config = {{"corpus", "corpus.txt"},
                                   {"embeddings", "vectors.txt"},
                                   {"responses", "responses.jsonl"},
                                   {"templates_train", "templates_train.txt"},
                                   {"templates_test", "templates_test.txt"},
                                   {"seed", 1},
                                   {"annotators", 3},
                                   {"per_sense", 80},
                                   {"test_per_sense", 40},
                                   {"alpha", {{"audible", 0.7}, {"olfactible", 0.7}}},
                                   {"model", {{"kind", "crf"}}}};
  write_json_file(dir / "config.json", config);
  return truth;
}

}  // namespace sensery
