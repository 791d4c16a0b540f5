#include "sensery/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <set>

#include "json.hpp"
#include "sensery/rng.hpp"

namespace sensery {

std::string_view answer_name(Answer a) {
  switch (a) {
    case Answer::Yes: return "yes";
    case Answer::No: return "no";
    case Answer::NotSure: return "notsure";
  }
  return "notsure";
}

std::optional<Answer> parse_answer(std::string_view s) {
  if (s == "yes") return Answer::Yes;
  if (s == "no") return Answer::No;
  if (s == "notsure") return Answer::NotSure;
  return std::nullopt;
}

std::string make_task_id(const LabeledPhrase& phrase) {
  return std::string(sense_name(phrase.sense)) + ":" + phrase.text();
}

std::pair<Sense, std::vector<std::string>> parse_task_id(std::string_view task_id) {
  const auto colon = task_id.find(':');
  if (colon == std::string_view::npos) {
    throw ValidationError("malformed task id '" + std::string(task_id) + "'");
  }
  const Sense sense = parse_sense(task_id.substr(0, colon));
  std::vector<std::string> words;
  std::string_view rest = task_id.substr(colon + 1);
  while (!rest.empty()) {
    const auto sp = rest.find(' ');
    if (sp != 0) words.emplace_back(rest.substr(0, sp));
    if (sp == std::string_view::npos) break;
    rest.remove_prefix(sp + 1);
  }
  if (words.empty()) throw ValidationError("task id '" + std::string(task_id) + "' has no phrase");
  return {sense, std::move(words)};
}

void Tally::add(Answer a) {
  switch (a) {
    case Answer::Yes: ++yes; break;
    case Answer::No: ++no; break;
    case Answer::NotSure: ++notsure; break;
  }
}

std::vector<AnnotationTask> build_tasks(std::span<const LabeledPhrase> phrases, int per_sense,
                                        int annotators, std::uint64_t seed) {
  if (per_sense < 0) throw ValidationError("per-sense task count must be >= 0");
  if (annotators < 1) throw ValidationError("need at least one annotator per task");
  Rng rng(seed);
  std::vector<AnnotationTask> tasks;
  for (Sense sense : kAllSenses) {
    // Canonical pool order, so the sample depends only on the phrase set.
    std::map<std::string, const LabeledPhrase*> pool;
    for (const LabeledPhrase& p : phrases) {
      if (p.sense == sense) pool.emplace(p.text(), &p);
    }
    if (static_cast<int>(pool.size()) < per_sense) {
      throw ValidationError("not enough " + std::string(sense_name(sense)) + " phrases: need " +
                            std::to_string(per_sense) + ", have " + std::to_string(pool.size()) +
                            " (short by " + std::to_string(per_sense - pool.size()) + ")");
    }
    std::vector<const LabeledPhrase*> ordered;
    ordered.reserve(pool.size());
    for (const auto& [text, p] : pool) ordered.push_back(p);
    for (std::size_t idx : rng.sample_indices(ordered.size(), per_sense)) {
      AnnotationTask t;
      t.phrase = *ordered[idx];
      t.task_id = make_task_id(t.phrase);
      t.required_annotators = annotators;
      tasks.push_back(std::move(t));
    }
  }
  return tasks;
}

bool majority_yes(const Tally& t, int annotators) { return 2 * t.yes > annotators; }

namespace {

std::map<std::string, Tally> tally_by_task(std::span<const AnnotationResponse> responses) {
  std::map<std::string, Tally> tallies;
  std::set<std::pair<std::string, std::string>> seen;
  for (const AnnotationResponse& r : responses) {
    if (!seen.emplace(r.task_id, r.annotator_id).second) {
      throw ValidationError("annotator '" + r.annotator_id + "' answered task '" + r.task_id +
                            "' more than once");
    }
    tallies[r.task_id].add(r.answer);
  }
  return tallies;
}

Verdict make_verdict(const std::string& id, const Tally& t, int annotators) {
  auto [sense, words] = parse_task_id(id);
  return {id, sense, std::move(words), majority_yes(t, annotators), t};
}

}  // namespace

std::vector<Verdict> aggregate(std::span<const AnnotationResponse> responses, int annotators) {
  const auto tallies = tally_by_task(responses);
  std::vector<std::string> incomplete;
  for (const auto& [id, t] : tallies) {
    if (t.total() != annotators) incomplete.push_back(id);
  }
  if (!incomplete.empty()) {
    std::string msg = std::to_string(incomplete.size()) + " task(s) do not have exactly " +
                      std::to_string(annotators) + " responses:";
    for (const auto& id : incomplete) msg += " '" + id + "'";
    throw IncompleteTaskError(std::move(incomplete), msg);
  }
  std::vector<Verdict> out;
  for (const auto& [id, t] : tallies) out.push_back(make_verdict(id, t, annotators));
  return out;
}

std::vector<Verdict> aggregate_complete(std::span<const AnnotationResponse> responses,
                                        int annotators) {
  std::vector<Verdict> out;
  for (const auto& [id, t] : tally_by_task(responses)) {
    if (t.total() >= annotators) out.push_back(make_verdict(id, t, annotators));
  }
  return out;
}

double majority_yes_rate(std::span<const Verdict> verdicts, Sense sense) {
  long total = 0;
  long accepted = 0;
  for (const Verdict& v : verdicts) {
    if (v.sense != sense) continue;
    ++total;
    accepted += v.accepted ? 1 : 0;
  }
  if (total == 0) {
    throw ValidationError("no verdicts for sense " + std::string(sense_name(sense)));
  }
  return 100.0 * static_cast<double>(accepted) / static_cast<double>(total);
}

double fleiss_kappa(std::span<const std::vector<int>> counts, int raters) {
  if (raters < 2) throw ValidationError("Fleiss kappa needs at least 2 raters per item");
  if (counts.size() < 2) throw ValidationError("Fleiss kappa needs at least 2 items");
  const std::size_t categories = counts.front().size();
  if (categories < 2) throw ValidationError("Fleiss kappa needs at least 2 categories");

  std::vector<long> column(categories, 0);
  double agreement_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const auto& row = counts[i];
    if (row.size() != categories) throw ValidationError("ragged Fleiss count matrix");
    long sum = 0;
    long squares = 0;
    for (std::size_t j = 0; j < categories; ++j) {
      if (row[j] < 0) throw ValidationError("negative count in Fleiss matrix");
      sum += row[j];
      squares += static_cast<long>(row[j]) * row[j];
      column[j] += row[j];
    }
    if (sum != raters) {
      throw ValidationError("item " + std::to_string(i) + " has " + std::to_string(sum) +
                            " ratings, expected " + std::to_string(raters));
    }
    agreement_sum += static_cast<double>(squares - raters) /
                     (static_cast<double>(raters) * (raters - 1));
  }
  const long total = static_cast<long>(counts.size()) * raters;
  if (std::any_of(column.begin(), column.end(), [&](long c) { return c == total; })) {
    throw UndefinedAgreementError(
        "Fleiss kappa is undefined: every response falls in one category");
  }
  const double observed = agreement_sum / static_cast<double>(counts.size());
  double expected = 0.0;
  for (long c : column) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    expected += p * p;
  }
  return (observed - expected) / (1.0 - expected);
}

std::vector<std::vector<int>> kappa_matrix(std::span<const Verdict> verdicts, Sense sense,
                                           bool exclude_notsure) {
  std::vector<std::vector<int>> rows;
  for (const Verdict& v : verdicts) {
    if (v.sense != sense) continue;
    if (exclude_notsure) {
      if (v.tally.notsure > 0) continue;
      rows.push_back({v.tally.yes, v.tally.no});
    } else {
      rows.push_back({v.tally.yes, v.tally.no, v.tally.notsure});
    }
  }
  return rows;
}

long notsure_count(std::span<const AnnotationResponse> responses, Sense sense) {
  long n = 0;
  for (const AnnotationResponse& r : responses) {
    if (r.answer != Answer::NotSure) continue;
    if (parse_task_id(r.task_id).first == sense) ++n;
  }
  return n;
}

SenseSummary summarize(std::span<const Verdict> verdicts,
                       std::span<const AnnotationResponse> responses, Sense sense,
                       bool exclude_notsure) {
  SenseSummary s;
  s.sense = sense;
  int raters = 0;
  for (const Verdict& v : verdicts) {
    if (v.sense != sense) continue;
    ++s.tasks;
    s.accepted += v.accepted ? 1 : 0;
    raters = v.tally.total();
  }
  if (s.tasks > 0) s.majority_yes = majority_yes_rate(verdicts, sense);
  // Only responses to the summarized tasks count toward notsure.
  std::set<std::string> ids;
  for (const Verdict& v : verdicts) {
    if (v.sense == sense) ids.insert(v.task_id);
  }
  for (const AnnotationResponse& r : responses) {
    if (r.answer == Answer::NotSure && ids.contains(r.task_id)) ++s.notsure;
  }
  try {
    const auto matrix = kappa_matrix(verdicts, sense, exclude_notsure);
    s.kappa = fleiss_kappa(matrix, raters);
  } catch (const ValidationError& e) {
    s.kappa_error = e.what();
  }
  return s;
}

std::string response_to_json(const AnnotationResponse& r) {
  nlohmann::ordered_json j;
  j["task_id"] = r.task_id;
  j["annotator"] = r.annotator_id;
  j["answer"] = answer_name(r.answer);
  j["timestamp"] = r.timestamp;
  return j.dump();
}

std::vector<AnnotationResponse> read_responses(std::istream& in, const std::string& source) {
  std::vector<AnnotationResponse> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      AnnotationResponse r;
      r.task_id = j.at("task_id").get<std::string>();
      r.annotator_id = j.at("annotator").get<std::string>();
      const auto answer = parse_answer(j.at("answer").get<std::string>());
      if (!answer) throw ParseError(source, line_no, "unknown answer " + j.at("answer").dump());
      r.answer = *answer;
      r.timestamp = j.value("timestamp", std::int64_t{0});
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::vector<AnnotationResponse> read_responses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_responses(in, path.string());
}

void write_responses(const std::filesystem::path& path,
                     std::span<const AnnotationResponse> responses) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : responses) out << response_to_json(r) << '\n';
}

void write_tasks(const std::filesystem::path& path, std::span<const AnnotationTask> tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  for (const AnnotationTask& t : tasks) {
    nlohmann::ordered_json j;
    j["task_id"] = t.task_id;
    j["phrase"] = t.phrase.tokens;
    j["sense"] = sense_name(t.phrase.sense);
    j["annotators"] = t.required_annotators;
    out << j.dump() << '\n';
  }
}

nlohmann::ordered_json verdicts_json(std::span<const Verdict> verdicts) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const Verdict& v : verdicts) {
    out.push_back({{"task_id", v.task_id},
                   {"sense", sense_name(v.sense)},
                   {"phrase", join(v.phrase)},
                   {"accepted", v.accepted},
                   {"yes", v.tally.yes},
                   {"no", v.tally.no},
                   {"notsure", v.tally.notsure}});
  }
  return out;
}

}  // namespace sensery
