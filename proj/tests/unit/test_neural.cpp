#include <cmath>
#include <sstream>

#include "../support/neural_oracle.hpp"
#include "doctest.h"
#include "sensery/error.hpp"
#include "sensery/neural.hpp"

using namespace sensery;

namespace {

constexpr BioTag B = BioTag::B, I = BioTag::I, O = BioTag::O;

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

int argmax(const VectorXd& d) {
  int best = 0;
  for (int k = 1; k < d.size(); ++k)
    if (d[k] > d[best]) best = k;
  return best;
}

}  // namespace

TEST_CASE("lstm_step with zero parameters and state stays at zero") {
  const LstmCell cell(3, 2);
  const auto s = lstm_step(cell, vec({0.4, -1, 2}), VectorXd::Zero(2), VectorXd::Zero(2));
  CHECK(s.h.isZero(0.0));
  CHECK(s.c.isZero(0.0));
}

TEST_CASE("single-unit lstm_step against hand evaluation") {
  LstmCell cell(1, 1);
  cell.weights << 0.1, 0.2,  // input gate
      0.3, -0.4,             // forget gate
      0.5, 0.6,              // output gate
      -0.7, 0.8;             // candidate
  cell.bias << 0.01, 0.02, 0.03, 0.04;
  // i = s(0), f = s(0.29), o = s(0.10), g = tanh(-0.55), evaluated separately.
  const auto s = lstm_step(cell, vec({0.5}), vec({-0.3}), vec({0.8}));
  CHECK(s.c[0] == doctest::Approx(0.2073368007500973).epsilon(1e-13));
  CHECK(s.h[0] == doctest::Approx(0.10731413465332691).epsilon(1e-13));
}

TEST_CASE("large forget bias keeps the memory") {
  LstmCell cell(2, 1);
  cell.bias << 0.0, 5.0, 0.0, 0.0;
  const auto s = lstm_step(cell, vec({3, -2}), vec({0.7}), vec({2.0}));
  const double sig5 = 1.0 / (1.0 + std::exp(-5.0));
  CHECK(sig5 > 0.99);
  // g = tanh(0) = 0, so c' = sigmoid(5) * c exactly.
  CHECK(s.c[0] == doctest::Approx(sig5 * 2.0).epsilon(1e-15));
}

TEST_CASE("lstm_step rejects mismatched dimensions") {
  const LstmCell cell(2, 3);
  CHECK_THROWS_AS(lstm_step(cell, VectorXd::Zero(3), VectorXd::Zero(3), VectorXd::Zero(3)),
                  ValidationError);
  CHECK_THROWS_AS(lstm_step(cell, VectorXd::Zero(2), VectorXd::Zero(2), VectorXd::Zero(3)),
                  ValidationError);
}

TEST_CASE("variant names") {
  CHECK(NeuralVariant::parse("+OR+CHAR") == NeuralVariant{true, true});
  CHECK(NeuralVariant::parse("base") == NeuralVariant{false, false});
  CHECK(NeuralVariant::parse("char").name() == "char");
  CHECK(NeuralVariant::parse("or").name() == "or");
  CHECK_THROWS_AS(NeuralVariant::parse("crf"), ValidationError);
}

TEST_CASE("model layout follows the concatenation") {
  Rng rng(1);
  const auto m = oracle::random_neural(rng, {true, true}, 0.1);
  const auto d = oracle::small_dims();
  CHECK(m.output_weights.cols() == d.window_hidden + d.char_hidden + d.word_dim + 3);
  CHECK(m.words[0] == "<unk>");
  CHECK(m.word_id("HONKING") == m.word_id("honking"));
  CHECK(m.word_id("never-seen") == NeuralTaggerModel::kUnknownWord);
  const auto base = oracle::random_neural(rng, {false, false}, 0.1);
  CHECK(base.output_weights.cols() == d.window_hidden + d.word_dim);
}

TEST_CASE("encode_chars") {
  Rng rng(2);
  auto m = oracle::random_neural(rng, {true, true}, 0.5);
  SUBCASE("zero cells give a zero encoding") {
    auto z = m;
    z.char_forward = LstmCell(z.char_forward.input_dim, z.char_forward.hidden_dim);
    z.char_backward = LstmCell(z.char_backward.input_dim, z.char_backward.hidden_dim);
    CHECK(encode_chars("paint", z).isZero(0.0));
  }
  SUBCASE("one character: both directions see the same sequence") {
    auto same = m;
    same.char_backward = same.char_forward;
    const auto v = encode_chars("a", same);
    const int half = m.dims.char_hidden / 2;
    CHECK(v.head(half) == v.tail(half));
  }
  SUBCASE("direct forward computation") {
    const auto direct = [&](const std::string& word) {
      const int half = m.dims.char_hidden / 2;
      VectorXd h = VectorXd::Zero(half), c = VectorXd::Zero(half);
      const auto chars = utf8_chars(word);
      for (const auto& ch : chars) {
        const auto s = lstm_step(m.char_forward, m.char_embeddings.col(m.char_id(ch)), h, c);
        h = s.h;
        c = s.c;
      }
      VectorXd hb = VectorXd::Zero(half), cb = VectorXd::Zero(half);
      for (auto it = chars.rbegin(); it != chars.rend(); ++it) {
        const auto s = lstm_step(m.char_backward, m.char_embeddings.col(m.char_id(*it)), hb, cb);
        hb = s.h;
        cb = s.c;
      }
      VectorXd out(2 * half);
      out << h, hb;
      return out;
    };
    const auto paint = encode_chars("paint", m);
    const auto print = encode_chars("print", m);
    CHECK((paint - direct("paint")).norm() < 1e-14);
    CHECK((print - direct("print")).norm() < 1e-14);
    CHECK(paint.dot(print) / (paint.norm() * print.norm()) < 1.0);
  }
  SUBCASE("unknown characters and empty words") {
    CHECK(m.char_id("\xe2\x98\x83") == 0);
    CHECK_NOTHROW(encode_chars("\xe2\x98\x83", m));
    CHECK_THROWS_AS(encode_chars("", m), ValidationError);
  }
  CHECK(utf8_chars("caf\xc3\xa9") == std::vector<std::string>{"c", "a", "f", "\xc3\xa9"});
}

TEST_CASE("encode_window") {
  Rng rng(3);
  auto dims = oracle::small_dims();
  dims.window = 5;
  auto m = oracle::random_neural(rng, {true, true}, 0.5, dims);
  const auto s = tokenize("i heard honking cars");
  const auto ids = window_ids(m, s, 0);
  REQUIRE(ids.size() == 5);
  CHECK(ids[0] == NeuralTaggerModel::kPadWord);
  CHECK(ids[1] == NeuralTaggerModel::kPadWord);
  CHECK(ids[2] == m.word_id("i"));

  // Composition of lstm_step over the window.
  const auto w = encode_window(s, 2, m);
  VectorXd h = VectorXd::Zero(dims.window_hidden), c = VectorXd::Zero(dims.window_hidden);
  for (int id : window_ids(m, s, 2)) {
    const auto st = lstm_step(m.window_cell, m.word_embeddings.col(id), h, c);
    h = st.h;
    c = st.c;
  }
  CHECK((w.window - h).norm() < 1e-14);
  CHECK(w.word == m.word_embeddings.col(m.word_id("honking")));

  dims.window = 1;
  auto one = oracle::random_neural(rng, {false, false}, 0.5, dims);
  CHECK(window_ids(one, s, 3) == std::vector<int>{one.word_id("cars")});
  CHECK_THROWS_AS(encode_window(s, 4, m), ValidationError);
}

TEST_CASE("predict_step") {
  Rng rng(4);
  auto m = oracle::random_neural(rng, {true, false}, 0.5);
  const VectorXd vm = VectorXd::Random(m.dims.window_hidden);
  const VectorXd vs = VectorXd::Random(m.dims.word_dim);
  const VectorXd none;

  auto zero = m;
  zero.output_weights.setZero();
  zero.output_bias.setZero();
  const auto u = predict_step(vm, none, vs, vec({0.2, 0.3, 0.5}), zero);
  for (int k = 0; k < 3; ++k) CHECK(u[k] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  // +10 from d_prev[O] to logit O.
  zero.output_weights(2, zero.recurrence_block_offset() + 2) = 10.0;
  const auto d = predict_step(vm, none, vs, vec({0, 0, 1}), zero);
  CHECK(d[2] == doctest::Approx(std::exp(10.0) / (std::exp(10.0) + 2.0)).epsilon(1e-14));
  CHECK(d[0] == doctest::Approx(1.0 / (std::exp(10.0) + 2.0)).epsilon(1e-14));
  // Flipping d_prev changes the argmax: the output recurrence has an effect.
  zero.output_weights(0, zero.recurrence_block_offset() + 0) = 10.0;
  CHECK(argmax(predict_step(vm, none, vs, vec({0, 0, 1}), zero)) == 2);
  CHECK(argmax(predict_step(vm, none, vs, vec({1, 0, 0}), zero)) == 0);

  CHECK_THROWS_AS(predict_step(vm, none, vs, vec({0.5, 0.5, 0.5}), m), ValidationError);
  CHECK_THROWS_AS(predict_step(vm, none, vs, vec({-0.5, 1.0, 0.5}), m), ValidationError);
  CHECK_THROWS_AS(predict_step(vm, none, vs, vec({1.0, 0.0}), m), ValidationError);
  CHECK_THROWS_AS(predict_step(vm, VectorXd::Zero(4), vs, vec({1, 0, 0}), m), ValidationError);
}

TEST_CASE("distributions always sum to one") {
  Rng rng(5);
  long steps = 0;
  while (steps < 3000) {
    const auto variant = NeuralVariant{rng.uniform() < 0.5, rng.uniform() < 0.5};
    const auto m = oracle::random_neural(rng, variant, rng.uniform(0.1, 20.0));
    const auto s = oracle::random_words(rng, 1 + rng.uniform_index(12));
    for (const auto& d : tag_distributions(m, s)) {
      REQUIRE(std::abs(d.sum() - 1.0) <= 1e-12);
      REQUIRE((d.array() >= 0.0).all());
      ++steps;
    }
  }
}

TEST_CASE("variant containment") {
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    auto full = oracle::random_neural(rng, {true, true}, 2.0);
    const auto s = oracle::random_words(rng, 1 + rng.uniform_index(10));
    zero_char_block(full);
    const auto or_only = restrict_variant(full, {true, false});
    REQUIRE(tag_sentence(full, s) == tag_sentence(or_only, s));

    auto with_or = oracle::random_neural(rng, {true, false}, 2.0);
    zero_recurrence_block(with_or);
    const auto base = restrict_variant(with_or, {false, false});
    REQUIRE(tag_sentence(with_or, s) == tag_sentence(base, s));
  }
  Rng r2(1);
  const auto base = oracle::random_neural(r2, {false, false}, 1.0);
  CHECK_THROWS_AS(restrict_variant(base, {true, false}), ValidationError);
}

TEST_CASE("uniform model decodes to a valid sequence") {
  Rng rng(7);
  auto m = oracle::random_neural(rng, {true, true}, 1.0);
  m.output_weights.setZero();
  m.output_bias.setZero();
  const auto tags = tag_sentence(m, tokenize("a b c d"));
  CHECK(is_bio_valid(tags));
  CHECK(tags == std::vector<BioTag>{B, B, B, B});  // ties go to B
  CHECK(tag_sentence(m, std::vector<Token>{}).empty());
}

TEST_CASE("gradient matches finite differences on every block") {
  Rng rng(8);
  const auto s = TaggedSentence(tokenize("heard honking cars"), {O, B, I});
  for (auto variant : {NeuralVariant{true, true}, NeuralVariant{false, false},
                       NeuralVariant{true, false}, NeuralVariant{false, true}}) {
    const auto m = oracle::random_neural(rng, variant, 0.5);
    for (bool tf : {true, false}) {
      for (const auto& e : oracle::neural_gradient_check(m, s, tf)) {
        INFO(variant.name(), " ", e.name, " teacher_forcing=", tf);
        CHECK(e.max_relative < 1e-4);
      }
    }
  }
}

TEST_CASE("training memorizes one sentence and is deterministic") {
  NeuralInit init;
  init.dims = oracle::small_dims();
  init.seed = 3;
  const std::vector<TaggedSentence> data{
      TaggedSentence(tokenize("we heard honking cars outside"), {O, O, B, I, O})};
  NeuralTrainConfig cfg;
  cfg.epochs = 200;
  cfg.step = 0.1;
  NeuralTrainStats stats;
  const auto m = train_neural(create_neural_model(data, init), data, cfg, &stats);
  CHECK(tag_sentence(m, data[0].tokens()) == data[0].tags());
  CHECK(stats.epoch_losses.back() < stats.epoch_losses.front());
  const auto again = train_neural(create_neural_model(data, init), data, cfg);
  CHECK(again.to_json().dump() == m.to_json().dump());

  cfg.epochs = 3;
  cfg.step = 1e300;
  cfg.clip = 1e300;
  CHECK_THROWS_AS(train_neural(create_neural_model(data, init), data, cfg), DivergenceError);
}

TEST_CASE("pretrained vectors seed the word embeddings") {
  std::istringstream in("honking 1 2 3\ncars -1 0 1\nextra 9 9 9\n");
  const auto table = parse_embeddings(in);
  NeuralInit init;
  init.dims = oracle::small_dims();
  init.pretrained = &table;
  const auto data = oracle::neural_corpus();
  const auto m = create_neural_model(data, init);
  CHECK(m.dims.word_dim == 3);
  CHECK(m.word_embeddings.col(m.word_id("honking")) == vec({1, 2, 3}));
  CHECK(m.word_id("extra") != NeuralTaggerModel::kUnknownWord);
}

TEST_CASE("neural JSON round trip") {
  Rng rng(9);
  const auto m = oracle::random_neural(rng, {true, true}, 1.0);
  const auto back = NeuralTaggerModel::from_json(m.to_json());
  CHECK(back.to_json().dump() == m.to_json().dump());
  const auto s = oracle::random_words(rng, 6);
  CHECK(tag_sentence(back, s) == tag_sentence(m, s));
  auto doc = m.to_json();
  doc["variant"] = "base";
  CHECK_THROWS_AS(NeuralTaggerModel::from_json(doc), ValidationError);
}
