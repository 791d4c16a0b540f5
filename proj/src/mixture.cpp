#include "sensery/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>

namespace sensery {

double default_alpha(Sense sense) {
  return sense == Sense::Audible ? kDefaultAlphaAudible : kDefaultAlphaOlfactible;
}

namespace {

// Cosines this close to 1 are exact-direction matches up to rounding.
constexpr double kUnitCosineSlack = 1e-12;

void require_sense(std::span<const LabeledPhrase> phrases, Sense sense, const char* what) {
  for (const LabeledPhrase& p : phrases) {
    if (p.sense != sense) {
      throw ValidationError(std::string(what) + " phrase '" + p.text() + "' is " +
                            std::string(sense_name(p.sense)) + ", expected " +
                            std::string(sense_name(sense)));
    }
  }
}

}  // namespace

Expansion expand_detailed(std::span<const LabeledPhrase> crowd,
                          std::span<const LabeledPhrase> pattern, double alpha,
                          const EmbeddingTable& table) {
  if (crowd.empty()) throw ValidationError("expand needs at least one crowd phrase");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  const Sense sense = crowd.front().sense;
  require_sense(crowd, sense, "crowd");
  require_sense(pattern, sense, "pattern");

  std::map<std::string, LabeledPhrase> crowd_set;
  for (const LabeledPhrase& p : crowd) crowd_set.emplace(p.text(), p);

  std::vector<Vector> anchors;
  for (const auto& [text, p] : crowd_set) {
    if (auto v = try_phrase_vector(p.tokens, table)) anchors.push_back(std::move(v->vector));
  }

  // Duplicates inside the pattern list merge with summed frequency.
  std::map<std::string, LabeledPhrase> pool;
  for (const LabeledPhrase& p : pattern) {
    const std::string key = p.text();
    if (crowd_set.contains(key)) continue;
    auto [it, fresh] = pool.emplace(key, p);
    if (!fresh) it->second.frequency += p.frequency;
  }

  Expansion out;
  out.crowd_size = static_cast<int>(crowd_set.size());
  for (const auto& [text, p] : crowd_set) out.phrases.push_back(p);
  for (auto& [text, p] : pool) {
    Candidate c{p, std::nullopt, false};
    if (auto v = try_phrase_vector(p.tokens, table); v && !anchors.empty()) {
      double best = -1.0;
      for (const Vector& a : anchors) best = std::max(best, cosine(a, v->vector));
      if (best >= 1.0 - kUnitCosineSlack) best = 1.0;
      c.best_cosine = best;
      c.admitted = shifted_similarity(best) >= alpha;
    }
    if (c.admitted) {
      LabeledPhrase added = c.phrase;
      added.provenance = Provenance::Mixture;
      out.phrases.push_back(std::move(added));
    }
    out.candidates.push_back(std::move(c));
  }
  return out;
}

std::vector<LabeledPhrase> expand(std::span<const LabeledPhrase> crowd,
                                  std::span<const LabeledPhrase> pattern, double alpha,
                                  const EmbeddingTable& table) {
  return expand_detailed(crowd, pattern, alpha, table).phrases;
}

std::vector<SweepRow> alpha_sweep(std::span<const double> alphas,
                                  std::span<const LabeledPhrase> crowd,
                                  std::span<const LabeledPhrase> pattern,
                                  const EmbeddingTable& table, const TrainAndEval& train_and_eval,
                                  const ExpansionSink& sink) {
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) {
      throw ValidationError("alpha " + std::to_string(a) + " outside [0, 1]");
    }
  }
  std::vector<double> ordered(alphas.begin(), alphas.end());
  std::sort(ordered.begin(), ordered.end());

  std::vector<SweepRow> rows;
  for (double a : ordered) {
    const auto expanded = expand(crowd, pattern, a, table);
    if (sink) sink(a, expanded);
    SweepScores s;
    try {
      s = train_and_eval(expanded, a);
    } catch (...) {
      rethrow_with_context("sweep at alpha=" + std::to_string(a));
    }
    rows.push_back({a, static_cast<long>(expanded.size()), s.precision, s.recall, s.f1, s.gold,
                    s.predicted, s.correct});
  }
  return rows;
}

std::vector<double> parse_alpha_grid(const std::string& spec) {
  std::vector<double> out;
  const auto number = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty()) {
      throw ValidationError("bad number '" + s + "' in alpha grid '" + spec + "'");
    }
    return v;
  };
  if (spec.find(':') != std::string::npos) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ValidationError("alpha grid must be start:stop:step");
    const double start = number(spec.substr(0, c1));
    const double stop = number(spec.substr(c1 + 1, c2 - c1 - 1));
    const double step = number(spec.substr(c2 + 1));
    if (!(step > 0.0) || stop < start) throw ValidationError("empty or invalid alpha grid");
    const long n = std::lround(std::floor((stop - start) / step + 1e-9));
    for (long i = 0; i <= n; ++i) {
      // Round to 1e-9 so 0.1 * 3 prints and compares as 0.3.
      out.push_back(std::round((start + i * step) * 1e9) / 1e9);
    }
  } else {
    std::size_t pos = 0;
    while (pos <= spec.size()) {
      const auto comma = spec.find(',', pos);
      out.push_back(number(spec.substr(pos, comma == std::string::npos ? spec.npos : comma - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  return out;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "alpha,train_size,precision,recall,f1\n";
  char buf[160];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.2f,%ld,%.2f,%.2f,%.2f\n", r.alpha, r.train_size,
                  r.precision, r.recall, r.f1);
    out << buf;
  }
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_sweep_csv(out, rows);
}

}  // namespace sensery
