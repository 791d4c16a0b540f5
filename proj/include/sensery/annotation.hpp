#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "sensery/error.hpp"
#include "sensery/patterns.hpp"

namespace sensery {

enum class Answer : std::uint8_t { Yes = 0, No = 1, NotSure = 2 };

std::string_view answer_name(Answer a);  // "yes" / "no" / "notsure"
std::optional<Answer> parse_answer(std::string_view s);

struct AnnotationTask {
  std::string task_id;
  LabeledPhrase phrase;
  int required_annotators = 3;
};

// Task ids are "<sense>:<phrase text>", so responses collected offline can
// be matched to tasks without a shared task file.
std::string make_task_id(const LabeledPhrase& phrase);
std::pair<Sense, std::vector<std::string>> parse_task_id(std::string_view task_id);

struct AnnotationResponse {
  std::string task_id;
  std::string annotator_id;
  Answer answer = Answer::NotSure;
  std::int64_t timestamp = 0;  // unix seconds; 0 when unknown
};

struct Tally {
  int yes = 0;
  int no = 0;
  int notsure = 0;

  int total() const { return yes + no + notsure; }
  void add(Answer a);
  bool operator==(const Tally&) const = default;
};

struct Verdict {
  std::string task_id;
  Sense sense = Sense::Audible;
  std::vector<std::string> phrase;
  bool accepted = false;  // strict yes-majority
  Tally tally;
};

// n phrases per sense, sampled uniformly without replacement.
std::vector<AnnotationTask> build_tasks(std::span<const LabeledPhrase> phrases, int per_sense,
                                        int annotators, std::uint64_t seed);

class IncompleteTaskError : public ValidationError {
 public:
  IncompleteTaskError(std::vector<std::string> ids, const std::string& what)
      : ValidationError(what), task_ids_(std::move(ids)) {}
  const std::vector<std::string>& task_ids() const { return task_ids_; }

 private:
  std::vector<std::string> task_ids_;
};

// Groups responses by task and applies the majority rule. Every task must
// have exactly `annotators` responses. Output is sorted by task id, so the
// result does not depend on arrival order.
std::vector<Verdict> aggregate(std::span<const AnnotationResponse> responses, int annotators);

// Same, but tasks with fewer than `annotators` responses are dropped
// instead of raising.
std::vector<Verdict> aggregate_complete(std::span<const AnnotationResponse> responses,
                                        int annotators);

bool majority_yes(const Tally& t, int annotators);

// 100 * accepted / total for one sense.
double majority_yes_rate(std::span<const Verdict> verdicts, Sense sense);

class UndefinedAgreementError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Fleiss' kappa for a fixed number of raters per item. `counts` is an
// items x categories matrix; every row must sum to `raters`.
double fleiss_kappa(std::span<const std::vector<int>> counts, int raters);

// items x {yes, no, notsure} rows for the verdicts of one sense. With
// `exclude_notsure`, items that received any notsure answer are dropped and
// the matrix has two columns.
std::vector<std::vector<int>> kappa_matrix(std::span<const Verdict> verdicts, Sense sense,
                                           bool exclude_notsure = false);

long notsure_count(std::span<const AnnotationResponse> responses, Sense sense);

// Per-sense summary in the shape of the crowd-annotation results table.
struct SenseSummary {
  Sense sense;
  int tasks = 0;
  int accepted = 0;
  double majority_yes = 0.0;
  std::optional<double> kappa;
  std::string kappa_error;
  long notsure = 0;
};

SenseSummary summarize(std::span<const Verdict> verdicts,
                       std::span<const AnnotationResponse> responses, Sense sense,
                       bool exclude_notsure = false);

// Journal: append-only JSON lines
// {"task_id": ..., "annotator": ..., "answer": ..., "timestamp": ...}
std::string response_to_json(const AnnotationResponse& r);
std::vector<AnnotationResponse> read_responses(std::istream& in,
                                               const std::string& source = "<stream>");
std::vector<AnnotationResponse> read_responses(const std::filesystem::path& path);
void write_responses(const std::filesystem::path& path,
                     std::span<const AnnotationResponse> responses);

// [{"task_id", "sense", "phrase", "accepted", "yes", "no", "notsure"}, ...]
nlohmann::ordered_json verdicts_json(std::span<const Verdict> verdicts);

void write_tasks(const std::filesystem::path& path, std::span<const AnnotationTask> tasks);

}  // namespace sensery
