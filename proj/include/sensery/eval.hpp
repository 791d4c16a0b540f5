#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sensery/patterns.hpp"
#include "sensery/text.hpp"

namespace sensery {

struct SpanCounts {
  long gold = 0;
  long predicted = 0;
  long correct = 0;

  // Percentages; 0 when the denominator is 0.
  double precision() const;
  double recall() const;
  double f1() const;
  SpanCounts& operator+=(const SpanCounts& o);
};

struct EvalReport {
  SpanCounts total;
  std::array<SpanCounts, 2> per_sense;  // indexed by Sense

  double precision() const { return total.precision(); }
  double recall() const { return total.recall(); }
  double f1() const { return total.f1(); }
  const SpanCounts& sense(Sense s) const { return per_sense[static_cast<int>(s)]; }

  // Scores rounded to 2 decimals.
  nlohmann::ordered_json to_json() const;
};

// Exact-match span scoring: a predicted span counts iff (sentence, start,
// end) equals a gold span.
EvalReport span_prf(std::span<const TaggedSentence> gold,
                    std::span<const std::vector<BioTag>> predicted);

// Table with one row per sense plus the total, scores to 2 decimals.
std::string format_report(const EvalReport& report);

double round2(double x);

struct SplitSpec {
  std::uint64_t seed = 1;
  int test_per_sense = 100;
};

struct CrowdSplit {
  std::vector<LabeledPhrase> train;
  std::vector<LabeledPhrase> test;
};

// Per sense, a seeded uniform sample of `test_per_sense` phrases goes to
// test and the rest to train. The result does not depend on input order.
CrowdSplit split_crowd(std::span<const LabeledPhrase> accepted, const SplitSpec& spec);

}  // namespace sensery
