#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "sensery/annotation.hpp"
#include "sensery/rng.hpp"

using namespace sensery;

namespace {

std::vector<LabeledPhrase> pool(int per_sense) {
  std::vector<LabeledPhrase> out;
  for (Sense s : kAllSenses) {
    for (int i = 0; i < per_sense; ++i) {
      out.push_back({{std::string(sense_name(s)).substr(0, 3), "p" + std::to_string(i)}, s});
    }
  }
  return out;
}

std::vector<AnnotationResponse> responses_for(const std::string& task_id,
                                              std::span<const Answer> answers) {
  std::vector<AnnotationResponse> out;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    out.push_back({task_id, "a" + std::to_string(i + 1), answers[i], 0});
  }
  return out;
}

// Fleiss' kappa evaluated term by term, independently of the library.
double kappa_by_hand(const std::vector<std::vector<int>>& rows, int k) {
  const double n = static_cast<double>(rows.size());
  double po = 0.0;
  std::vector<double> col(rows[0].size(), 0.0);
  for (const auto& r : rows) {
    double agree = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      agree += r[j] * (r[j] - 1.0);
      col[j] += r[j];
    }
    po += agree / (k * (k - 1.0));
  }
  po /= n;
  double pe = 0.0;
  for (double c : col) pe += (c / (n * k)) * (c / (n * k));
  return (po - pe) / (1.0 - pe);
}

const std::string kTask = "audible:breaking glass";

}  // namespace

TEST_CASE("build_tasks samples per sense deterministically") {
  const auto phrases = pool(600);
  const auto tasks = build_tasks(phrases, 500, 3, 42);
  CHECK(tasks.size() == 1000);
  for (Sense s : kAllSenses) {
    CHECK(std::ranges::count_if(tasks, [&](const auto& t) { return t.phrase.sense == s; }) == 500);
  }
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    ids.insert(t.task_id);
    CHECK(t.required_annotators == 3);
  }
  CHECK(ids.size() == 1000);

  const auto again = build_tasks(phrases, 500, 3, 42);
  CHECK(std::ranges::equal(tasks, again, {}, &AnnotationTask::task_id, &AnnotationTask::task_id));

  auto reversed = phrases;
  std::ranges::reverse(reversed);
  const auto rev = build_tasks(reversed, 500, 3, 42);
  CHECK(std::ranges::equal(tasks, rev, {}, &AnnotationTask::task_id, &AnnotationTask::task_id));

  CHECK(build_tasks(phrases, 0, 3, 1).empty());
}

TEST_CASE("build_tasks names the short sense") {
  auto phrases = pool(10);
  std::erase_if(phrases, [](const auto& p) {
    return p.sense == Sense::Olfactible && p.tokens[1] < "p3";
  });
  try {
    build_tasks(phrases, 8, 3, 1);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("olfactible") != std::string::npos);
    CHECK(msg.find("short by 1") != std::string::npos);
  }
}

TEST_CASE("task ids round trip") {
  const LabeledPhrase p{{"fresh", "paint"}, Sense::Olfactible};
  const auto id = make_task_id(p);
  CHECK(id == "olfactible:fresh paint");
  const auto [sense, words] = parse_task_id(id);
  CHECK(sense == Sense::Olfactible);
  CHECK(words == p.tokens);
  CHECK_THROWS_AS(parse_task_id("nosense"), ValidationError);
}

TEST_CASE("aggregate examples") {
  using enum Answer;
  const std::array<Answer, 3> yyn{Yes, Yes, No}, ynu{Yes, No, NotSure}, yyy{Yes, Yes, Yes};
  CHECK(aggregate(responses_for(kTask, yyn), 3)[0].accepted);
  CHECK_FALSE(aggregate(responses_for(kTask, ynu), 3)[0].accepted);
  CHECK(aggregate(responses_for(kTask, yyy), 3)[0].accepted);
  const auto v = aggregate(responses_for(kTask, ynu), 3)[0];
  CHECK(v.tally == Tally{1, 1, 1});
  CHECK(v.sense == Sense::Audible);
  CHECK(v.phrase == std::vector<std::string>{"breaking", "glass"});
}

TEST_CASE("aggregate over all 27 triples matches yes-count >= 2") {
  int checked = 0;
  for (int code = 0; code < 27; ++code) {
    const std::array<Answer, 3> triple{static_cast<Answer>(code % 3),
                                       static_cast<Answer>(code / 3 % 3),
                                       static_cast<Answer>(code / 9)};
    const auto yes = std::ranges::count(triple, Answer::Yes);
    const auto v = aggregate(responses_for(kTask, triple), 3);
    REQUIRE(v.size() == 1);
    CHECK(v[0].accepted == (yes >= 2));
    ++checked;
  }
  CHECK(checked == 27);
}

TEST_CASE("aggregate reports incomplete tasks and duplicates") {
  using enum Answer;
  const std::array<Answer, 2> two{Yes, No};
  auto rs = responses_for("audible:rain", two);
  const std::array<Answer, 3> three{Yes, No, No};
  auto full = responses_for(kTask, three);
  rs.insert(rs.end(), full.begin(), full.end());
  try {
    aggregate(rs, 3);
    FAIL("expected an error");
  } catch (const IncompleteTaskError& e) {
    CHECK(e.task_ids() == std::vector<std::string>{"audible:rain"});
  }
  CHECK(aggregate_complete(rs, 3).size() == 1);

  rs = full;
  rs.push_back(rs.front());
  CHECK_THROWS_AS(aggregate(rs, 3), ValidationError);
}

TEST_CASE("aggregate ignores arrival order") {
  Rng rng(6);
  std::vector<AnnotationResponse> rs;
  for (int t = 0; t < 30; ++t) {
    std::array<Answer, 3> a;
    for (auto& x : a) x = static_cast<Answer>(rng.uniform_index(3));
    const auto part = responses_for("olfactible:thing " + std::to_string(t), a);
    rs.insert(rs.end(), part.begin(), part.end());
  }
  const auto base = aggregate(rs, 3);
  for (int k = 0; k < 10; ++k) {
    rng.shuffle(rs);
    const auto v = aggregate(rs, 3);
    REQUIRE(v.size() == base.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(v[i].task_id == base[i].task_id);
      CHECK(v[i].accepted == base[i].accepted);
      CHECK(v[i].tally == base[i].tally);
    }
  }
}

TEST_CASE("majority_yes_rate") {
  const auto make = [](int accepted, int total, Sense s) {
    std::vector<Verdict> vs(total);
    for (int i = 0; i < total; ++i) {
      vs[i].sense = s;
      vs[i].accepted = i < accepted;
    }
    return vs;
  };
  CHECK(majority_yes_rate(make(367, 500, Sense::Audible), Sense::Audible) ==
        doctest::Approx(73.4).epsilon(1e-12));
  CHECK(majority_yes_rate(make(448, 500, Sense::Olfactible), Sense::Olfactible) ==
        doctest::Approx(89.6).epsilon(1e-12));
  CHECK(majority_yes_rate(make(7, 7, Sense::Audible), Sense::Audible) == 100.0);
  CHECK_THROWS_AS(majority_yes_rate(make(3, 3, Sense::Audible), Sense::Olfactible),
                  ValidationError);
}

TEST_CASE("fleiss_kappa fixtures") {
  const std::vector<std::vector<int>> unanimous{{3, 0, 0}, {0, 3, 0}};
  CHECK(fleiss_kappa(unanimous, 3) == 1.0);

  // Po = (1 + 1 + 0)/3, Pe = (4/9)^2 + (4/9)^2 + (1/9)^2 = 11/27.
  const std::vector<std::vector<int>> mixed{{3, 0, 0}, {0, 3, 0}, {1, 1, 1}};
  const double po = 2.0 / 3.0, pe = 11.0 / 27.0;
  const double symbolic = (po - pe) / (1.0 - pe);
  CHECK(std::abs(symbolic - 7.0 / 16.0) < 1e-15);
  CHECK(std::abs(fleiss_kappa(mixed, 3) - symbolic) <= 1e-12);

  const std::vector<std::vector<int>> all_yes{{3, 0, 0}, {3, 0, 0}, {3, 0, 0}};
  CHECK_THROWS_AS(fleiss_kappa(all_yes, 3), UndefinedAgreementError);

  const std::vector<std::vector<int>> bad_row{{3, 0, 0}, {2, 0, 0}};
  CHECK_THROWS_AS(fleiss_kappa(bad_row, 3), ValidationError);
}

TEST_CASE("fleiss_kappa agrees with hand evaluation and ignores category labels") {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_index(4));
    const int n = 2 + static_cast<int>(rng.uniform_index(20));
    std::vector<std::vector<int>> rows(n, std::vector<int>(3, 0));
    for (auto& r : rows)
      for (int j = 0; j < k; ++j) ++r[rng.uniform_index(3)];
    if (std::ranges::all_of(rows, [&](const auto& r) { return r == rows[0]; }) &&
        std::ranges::count(rows[0], k) == 1) {
      continue;  // all one category
    }
    const double kappa = fleiss_kappa(rows, k);
    REQUIRE(std::abs(kappa - kappa_by_hand(rows, k)) < 1e-12);
    std::array<int, 3> perm{0, 1, 2};
    while (std::ranges::next_permutation(perm).found) {
      auto relabeled = rows;
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < 3; ++j) relabeled[i][perm[j]] = rows[i][j];
      REQUIRE(std::abs(fleiss_kappa(relabeled, k) - kappa) < 1e-12);
    }
  }
}

TEST_CASE("unanimous items with two categories give kappa exactly 1") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(30));
    std::vector<std::vector<int>> rows(n, std::vector<int>(3, 0));
    for (auto& r : rows) r[rng.uniform_index(3)] = 3;
    rows[0] = {3, 0, 0};
    rows[1] = {0, 0, 3};
    REQUIRE(fleiss_kappa(rows, 3) == 1.0);
  }
}

TEST_CASE("notsure counts and the exclude-notsure matrix") {
  using enum Answer;
  std::vector<AnnotationResponse> rs;
  for (int i = 0; i < 27; ++i) rs.push_back({"olfactible:x" + std::to_string(i), "a", NotSure, 0});
  for (int i = 0; i < 10; ++i) rs.push_back({"audible:x" + std::to_string(i), "a", NotSure, 0});
  rs.push_back({"olfactible:y", "a", Yes, 0});
  CHECK(notsure_count(rs, Sense::Olfactible) == 27);
  CHECK(notsure_count(rs, Sense::Audible) == 10);
  CHECK(notsure_count({}, Sense::Audible) == 0);

  const std::array<Answer, 5> five{Yes, NotSure, No, NotSure, Yes};
  CHECK(notsure_count(responses_for("audible:z", five), Sense::Audible) == 2);

  std::vector<Verdict> vs(3);
  vs[0].tally = {3, 0, 0};
  vs[1].tally = {0, 2, 1};
  vs[2].tally = {1, 2, 0};
  CHECK(kappa_matrix(vs, Sense::Audible).size() == 3);
  const auto two_col = kappa_matrix(vs, Sense::Audible, true);
  CHECK(two_col == std::vector<std::vector<int>>{{3, 0}, {1, 2}});
}

TEST_CASE("journal round trip") {
  std::vector<AnnotationResponse> rs{{kTask, "ann-1", Answer::Yes, 1700000000},
                                     {kTask, "ann-2", Answer::NotSure, 0}};
  std::stringstream buf;
  for (const auto& r : rs) buf << response_to_json(r) << "\n";
  const auto back = read_responses(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].annotator_id == "ann-1");
  CHECK(back[0].timestamp == 1700000000);
  CHECK(back[1].answer == Answer::NotSure);

  std::istringstream bad(R"({"task_id":"audible:a","annotator":"x","answer":"maybe"})");
  CHECK_THROWS_AS(read_responses(bad), ParseError);
}
