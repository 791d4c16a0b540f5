#include "sensery/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "sensery/error.hpp"
#include "sensery/rng.hpp"

namespace sensery {

namespace {

double percent(long num, long den) {
  return den > 0 ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
}

}  // namespace

double SpanCounts::precision() const { return percent(correct, predicted); }
double SpanCounts::recall() const { return percent(correct, gold); }

double SpanCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

SpanCounts& SpanCounts::operator+=(const SpanCounts& o) {
  gold += o.gold;
  predicted += o.predicted;
  correct += o.correct;
  return *this;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

nlohmann::ordered_json EvalReport::to_json() const {
  const auto counts = [](const SpanCounts& c) {
    return nlohmann::ordered_json{{"precision", round2(c.precision())},
                                  {"recall", round2(c.recall())},
                                  {"f1", round2(c.f1())},
                                  {"gold_spans", c.gold},
                                  {"predicted_spans", c.predicted},
                                  {"correct_spans", c.correct}};
  };
  nlohmann::ordered_json j = counts(total);
  nlohmann::ordered_json senses;
  for (Sense s : kAllSenses) senses[std::string(sense_name(s))] = counts(sense(s));
  j["per_sense"] = std::move(senses);
  return j;
}

EvalReport span_prf(std::span<const TaggedSentence> gold,
                    std::span<const std::vector<BioTag>> predicted) {
  if (gold.size() != predicted.size()) {
    throw ValidationError("span_prf: " + std::to_string(gold.size()) + " gold sentences but " +
                          std::to_string(predicted.size()) + " predictions");
  }
  EvalReport report;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    if (predicted[k].size() != gold[k].size()) {
      throw ValidationError("span_prf: sentence " + std::to_string(k + 1) + " has " +
                            std::to_string(gold[k].size()) + " tokens but " +
                            std::to_string(predicted[k].size()) + " predicted tags");
    }
    const std::vector<Span> g = gold[k].spans();
    const std::vector<Span> p = bio_decode(predicted[k]);
    const std::set<Span> gs(g.begin(), g.end());
    SpanCounts c;
    c.gold = static_cast<long>(g.size());
    c.predicted = static_cast<long>(p.size());
    c.correct = static_cast<long>(std::count_if(p.begin(), p.end(),
                                                [&](const Span& s) { return gs.contains(s); }));
    report.per_sense[static_cast<int>(gold[k].sense())] += c;
    report.total += c;
  }
  return report;
}

std::string format_report(const EvalReport& report) {
  std::string out = "sense        F1      P       R       gold  pred  correct\n";
  char line[128];
  const auto row = [&](std::string_view name, const SpanCounts& c) {
    std::snprintf(line, sizeof line, "%-12s %-7.2f %-7.2f %-7.2f %-5ld %-5ld %ld\n",
                  std::string(name).c_str(), c.f1(), c.precision(), c.recall(), c.gold,
                  c.predicted, c.correct);
    out += line;
  };
  for (Sense s : kAllSenses) row(sense_name(s), report.sense(s));
  row("all", report.total);
  return out;
}

CrowdSplit split_crowd(std::span<const LabeledPhrase> accepted, const SplitSpec& spec) {
  if (spec.test_per_sense < 0) throw ValidationError("test_per_sense must be >= 0");
  std::map<Sense, std::map<std::string, const LabeledPhrase*>> by_sense;
  for (const LabeledPhrase& p : accepted) {
    if (!by_sense[p.sense].emplace(p.text(), &p).second) {
      throw ValidationError("split_crowd: duplicate phrase '" + p.text() + "' (" +
                            std::string(sense_name(p.sense)) + ")");
    }
  }
  CrowdSplit split;
  Rng rng(spec.seed);
  for (Sense s : kAllSenses) {
    std::vector<const LabeledPhrase*> ordered;
    for (const auto& [text, p] : by_sense[s]) ordered.push_back(p);
    const auto need = static_cast<std::size_t>(spec.test_per_sense);
    if (ordered.size() < need) {
      throw ValidationError("split_crowd: " + std::string(sense_name(s)) + " has " +
                            std::to_string(ordered.size()) + " accepted phrases, " +
                            std::to_string(need) + " needed for the test split");
    }
    std::vector<bool> in_test(ordered.size(), false);
    for (std::size_t idx : rng.sample_indices(ordered.size(), need)) in_test[idx] = true;
    for (std::size_t k = 0; k < ordered.size(); ++k) {
      (in_test[k] ? split.test : split.train).push_back(*ordered[k]);
    }
  }
  return split;
}

}  // namespace sensery
