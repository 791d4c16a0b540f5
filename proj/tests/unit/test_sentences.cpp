#include <algorithm>
#include <sstream>

#include "doctest.h"
#include "sensery/error.hpp"
#include "sensery/rng.hpp"
#include "sensery/sentences.hpp"

using namespace sensery;

namespace {

constexpr BioTag B = BioTag::B, I = BioTag::I, O = BioTag::O;

std::vector<CarrierTemplate> templates(std::initializer_list<const char*> lines) {
  std::vector<CarrierTemplate> out;
  for (const char* l : lines) out.push_back(CarrierTemplate::parse(l));
  return out;
}

}  // namespace

TEST_CASE("template parsing") {
  const auto t = CarrierTemplate::parse("i noticed the smell of <y> today .");
  CHECK(t.prefix.size() == 5);
  CHECK(t.suffix.size() == 2);
  CHECK(t.text() == "i noticed the smell of <y> today .");
  CHECK_THROWS_AS(CarrierTemplate::parse("no slot here"), ValidationError);
  CHECK_THROWS_AS(CarrierTemplate::parse("<y> and <y>"), ValidationError);

  std::istringstream file("# comment\n\nthe sound of <y> .\n<y> was loud\n");
  CHECK(parse_templates(file).size() == 2);
  std::istringstream bad("ok <y>\nbroken\n");
  CHECK_THROWS_AS(parse_templates(bad), ParseError);
}

TEST_CASE("build_sentences examples") {
  const auto ts = templates({"i noticed the smell of <y> today ."});
  const std::vector<LabeledPhrase> paint{{{"fresh", "paint"}, Sense::Olfactible}};
  const auto r = build_sentences(paint, ts, {});
  REQUIRE(r.sentences.size() == 1);
  CHECK(r.sentences[0].tags() == std::vector<BioTag>{O, O, O, O, O, B, I, O, O});
  CHECK(r.sentences[0].sense() == Sense::Olfactible);

  const std::vector<LabeledPhrase> snoring{{{"snoring"}, Sense::Audible}};
  const auto s = build_sentences(snoring, ts, {}).sentences.at(0);
  CHECK(std::ranges::count(s.tags(), B) == 1);
  CHECK(std::ranges::count(s.tags(), I) == 0);

  CHECK_THROWS_AS(build_sentences(paint, {}, {}), ValidationError);
}

TEST_CASE("every sentence carries exactly its phrase as the one span") {
  const auto ts = templates({"the sound of <y> .", "<y> filled the room", "we heard <y>",
                             "after dinner , the smell of <y> came back"});
  Rng rng(4);
  const std::vector<std::string> words{"loud", "music", "fresh", "paint", "rain", "dogs"};
  std::vector<LabeledPhrase> phrases;
  for (int k = 0; k < 300; ++k) {
    LabeledPhrase p;
    const auto n = 1 + rng.uniform_index(4);
    for (std::size_t i = 0; i < n; ++i) p.tokens.push_back(words[rng.uniform_index(words.size())]);
    phrases.push_back(p);
  }
  BuildOptions opt;
  opt.seed = 9;
  const auto r = build_sentences(phrases, ts, opt);
  REQUIRE(r.sentences.size() == phrases.size());
  for (std::size_t k = 0; k < phrases.size(); ++k) {
    const auto& s = r.sentences[k];
    REQUIRE(is_bio_valid(s.tags()));
    const auto spans = s.spans();
    REQUIRE(spans.size() == 1);
    std::vector<std::string> got;
    for (int i = spans[0].start; i < spans[0].end; ++i) got.push_back(s.tokens()[i].lower);
    REQUIRE(got == phrases[k].tokens);
  }
  CHECK(build_sentences(phrases, ts, opt).sentences == r.sentences);

  opt.per_phrase = 3;
  CHECK(build_sentences(phrases, ts, opt).sentences.size() == 3 * phrases.size());
}

TEST_CASE("corpus sentences are preferred and long sentences skipped") {
  const auto ts = templates({"the sound of <y> ."});
  const std::vector<std::vector<Token>> corpus{tokenize("nothing here"),
                                               tokenize("Then Breaking Glass woke us")};
  const std::vector<LabeledPhrase> phrases{{{"breaking", "glass"}}, {{"rain"}}};
  const auto r = build_sentences(phrases, ts, corpus, {});
  REQUIRE(r.sentences.size() == 2);
  CHECK(r.from_corpus == 1);
  CHECK(r.sentences[0].surfaces()[1] == "Breaking");
  CHECK(r.sentences[0].spans() == std::vector<Span>{{1, 3}});
  CHECK(r.sentences[1].surfaces() == std::vector<std::string>{"the", "sound", "of", "rain", "."});

  BuildOptions tight;
  tight.max_tokens = 4;
  const auto t = build_sentences(phrases, ts, tight);
  CHECK(t.skipped == 2);
  CHECK(t.sentences.empty());
}

TEST_CASE("shipped carrier pools parse and keep test carriers out of training") {
  for (const char* sense : {"audible", "olfactible"}) {
    const auto dir = default_data_dir();
    const auto train = load_templates(dir / (std::string("templates_") + sense + "_train.txt"));
    const auto test = load_templates(dir / (std::string("templates_") + sense + "_test.txt"));
    CHECK(train.size() >= 10);
    CHECK(test.size() >= 5);
    for (const auto& t : test) {
      CHECK_MESSAGE(std::find(train.begin(), train.end(), t) == train.end(), t.text());
    }
  }
}
