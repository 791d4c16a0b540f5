// Acceptance gate: one PASS/FAIL line per primary criterion. Exits non-zero
// if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "../support/crf_oracle.hpp"
#include "../support/fixtures.hpp"
#include "../support/neural_oracle.hpp"
#include "../support/process.hpp"
#include "sensery/annotation.hpp"
#include "sensery/eval.hpp"
#include "sensery/mixture.hpp"
#include "sensery/pipeline.hpp"
#include "sensery/synthetic.hpp"

using namespace sensery;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_seconds > 0 && secs >= limit_seconds) {
    o.pass = false;
    o.detail += "; over the " + std::to_string(static_cast<int>(limit_seconds)) + " s budget";
  }
  if (!o.pass) ++g_failures;
  std::printf("%s  %-28s %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sensery_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Outcome crf_oracle() {
  Rng rng(20240601);
  double worst_z = 0.0;
  int viterbi_mismatch = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const auto s = oracle::random_sentence(rng, 1 + rng.uniform_index(5));
    const auto m = oracle::random_crf(rng, s, 0.5 + 2.0 * rng.uniform(), 0.0);
    worst_z = std::max(worst_z, std::abs(log_partition(m, s) - oracle::brute_log_partition(m, s)));
    if (viterbi(m, s) != oracle::brute_viterbi(m, s)) ++viterbi_mismatch;
  }
  return {worst_z <= 1e-10 && viterbi_mismatch == 0,
          "50 models, max |logZ - brute| " + fmt("%.2e", worst_z) + ", viterbi mismatches " +
              std::to_string(viterbi_mismatch)};
}

Outcome crf_gradient() {
  Rng rng(77);
  double worst = 0.0;
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<TaggedSentence> batch;
    std::vector<Token> all;
    for (int k = 0; k < 2; ++k) {
      const auto s = oracle::random_sentence(rng, 1 + rng.uniform_index(5));
      std::vector<BioTag> tags(s.size());
      for (auto& t : tags) t = tag_from_index(static_cast<int>(rng.uniform_index(3)));
      repair_bio(tags);
      batch.emplace_back(s, tags);
      all.insert(all.end(), s.begin(), s.end());
    }
    auto m = oracle::random_crf(rng, all, 0.5, 0.01);
    const auto analytic = nll_and_gradient(m, batch).gradient;
    const double h = 1e-5;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      const double w = m.weights()[k];
      m.weights()[k] = w + h;
      const double up = nll_and_gradient(m, batch).loss;
      m.weights()[k] = w - h;
      const double down = nll_and_gradient(m, batch).loss;
      m.weights()[k] = w;
      worst = std::max(worst, oracle::relative_error(analytic[k], (up - down) / (2 * h)));
    }
  }
  return {worst < 1e-4, "20 draws, max relative error " + fmt("%.2e", worst)};
}

Outcome neural_gradient() {
  Rng rng(31);
  NeuralDims dims;
  dims.word_dim = 6;
  dims.window_hidden = 8;
  dims.char_dim = 4;
  dims.char_hidden = 6;
  dims.window = 5;
  const auto model = oracle::random_neural(rng, {true, true}, 0.5, dims);
  const TaggedSentence s(tokenize("heard honking cars"), {BioTag::O, BioTag::B, BioTag::I});
  double worst = 0.0;
  std::string worst_block;
  std::size_t blocks = 0;
  for (bool tf : {true, false}) {
    for (const auto& e : oracle::neural_gradient_check(model, s, tf)) {
      ++blocks;
      if (e.max_relative >= worst) {
        worst = e.max_relative;
        worst_block = e.name;
      }
    }
  }
  return {worst < 1e-4 && blocks == 22,
          std::to_string(blocks / 2) + " blocks x teacher forcing on/off, max relative error " +
              fmt("%.2e", worst) + " (" + worst_block + ")"};
}

Outcome normalization() {
  Rng rng(404);
  long steps = 0;
  double worst = 0.0;
  const NeuralVariant variants[] = {{true, true}, {true, false}, {false, true}, {false, false}};
  while (steps < 10000) {
    const auto m = oracle::random_neural(rng, variants[rng.uniform_index(4)], rng.uniform(0.1, 25.0));
    const auto s = oracle::random_words(rng, 1 + rng.uniform_index(20));
    for (const auto& d : tag_distributions(m, s)) {
      worst = std::max(worst, std::abs(d.sum() - 1.0));
      ++steps;
    }
  }
  return {worst <= 1e-12, std::to_string(steps) + " steps, max |sum - 1| " + fmt("%.2e", worst)};
}

Outcome containment() {
  Rng rng(505);
  int char_mismatch = 0, or_mismatch = 0;
  for (int k = 0; k < 100; ++k) {
    const auto s = oracle::random_words(rng, 1 + rng.uniform_index(12));
    auto full = oracle::random_neural(rng, {true, true}, 3.0);
    zero_char_block(full);
    if (tag_sentence(full, s) != tag_sentence(restrict_variant(full, {true, false}), s)) ++char_mismatch;
    auto with_or = oracle::random_neural(rng, {true, false}, 3.0);
    zero_recurrence_block(with_or);
    if (tag_sentence(with_or, s) != tag_sentence(restrict_variant(with_or, {false, false}), s)) {
      ++or_mismatch;
    }
  }
  return {char_mismatch == 0 && or_mismatch == 0,
          "100 sentences, +OR+CHAR vs +OR mismatches " + std::to_string(char_mismatch) +
              ", +OR vs base mismatches " + std::to_string(or_mismatch)};
}

Outcome bio_algebra() {
  Rng rng(606);
  long failures = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = static_cast<int>(rng.uniform_index(16));
    // Round trip on a random valid span set.
    std::vector<Span> spans;
    for (int i = 0; i < n;) {
      if (rng.uniform() < 0.35) {
        const int len = 1 + static_cast<int>(rng.uniform_index(std::min(4, n - i)));
        spans.push_back({i, i + len});
        i += len;
      } else {
        ++i;
      }
    }
    const auto tags = bio_encode(n, spans);
    if (!is_bio_valid(tags) || bio_decode(tags) != spans) ++failures;

    // Arbitrary sequences: decode succeeds exactly on valid ones, and then
    // re-encoding reproduces them; repair always yields a valid sequence.
    std::vector<BioTag> any(n);
    for (auto& t : any) t = tag_from_index(static_cast<int>(rng.uniform_index(3)));
    const bool valid = is_bio_valid(any);
    try {
      const auto decoded = bio_decode(any);
      if (!valid || bio_encode(n, decoded) != any) ++failures;
      for (const Span& sp : decoded) {
        if (sp.start < 0 || sp.end > n || sp.length() < 1) ++failures;
      }
    } catch (const ValidationError&) {
      if (valid) ++failures;
    }
    repair_bio(any);
    if (!is_bio_valid(any)) ++failures;
  }
  return {failures == 0, "10000 cases, " + std::to_string(failures) + " failures"};
}

Outcome mixture_monotonicity() {
  const auto table = fixtures::planar_table();
  const auto crowd = fixtures::planar_crowd();
  const auto pattern = fixtures::planar_pattern();
  const auto texts = [](const std::vector<LabeledPhrase>& ps) {
    std::set<std::string> out;
    for (const auto& p : ps) out.insert(p.text());
    return out;
  };
  std::vector<std::set<std::string>> grid;
  for (int k = 0; k <= 10; ++k) grid.push_back(texts(expand(crowd, pattern, k / 10.0, table)));
  int violations = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i; j < grid.size(); ++j) {
      if (!std::ranges::includes(grid[i], grid[j])) ++violations;
    }
  }
  const bool top_is_crowd = grid.back() == texts(crowd);
  bool bottom_has_all = true;
  for (const auto& p : pattern) {
    if (try_phrase_vector(p.tokens, table) && !grid.front().contains(p.text())) bottom_has_all = false;
  }
  return {violations == 0 && top_is_crowd && bottom_has_all,
          "11-point grid, subset violations " + std::to_string(violations) + ", expand(1)==crowd " +
              (top_is_crowd ? "yes" : "no") + ", expand(0) covers vectors " +
              (bottom_has_all ? "yes" : "no") + ", sizes " + std::to_string(grid.front().size()) +
              "->" + std::to_string(grid.back().size())};
}

Outcome kappa() {
  const std::vector<std::vector<int>> unanimous{{3, 0, 0}, {0, 3, 0}};
  const double k1 = fleiss_kappa(unanimous, 3);
  const std::vector<std::vector<int>> mixed{{3, 0, 0}, {0, 3, 0}, {1, 1, 1}};
  // Po = 2/3; Pe = (4/9)^2 + (4/9)^2 + (1/9)^2 = 11/27.
  const double symbolic = (2.0 / 3.0 - 11.0 / 27.0) / (1.0 - 11.0 / 27.0);
  const double k3 = fleiss_kappa(mixed, 3);
  bool undefined_raised = false;
  try {
    const std::vector<std::vector<int>> all_yes{{3, 0, 0}, {3, 0, 0}, {3, 0, 0}};
    fleiss_kappa(all_yes, 3);
  } catch (const UndefinedAgreementError&) {
    undefined_raised = true;
  }
  return {k1 == 1.0 && std::abs(k3 - symbolic) <= 1e-12 && undefined_raised,
          "unanimous " + fmt("%.17g", k1) + ", 3-item " + fmt("%.15f", k3) + " vs " +
              fmt("%.15f", symbolic) + ", all-yes raises " + (undefined_raised ? "yes" : "no")};
}

Outcome aggregation() {
  int agree = 0;
  for (int code = 0; code < 27; ++code) {
    const Answer triple[] = {static_cast<Answer>(code % 3), static_cast<Answer>(code / 3 % 3),
                             static_cast<Answer>(code / 9)};
    std::vector<AnnotationResponse> rs;
    int yes = 0;
    for (int a = 0; a < 3; ++a) {
      rs.push_back({"audible:breaking glass", "w" + std::to_string(a), triple[a], 0});
      yes += triple[a] == Answer::Yes;
    }
    const auto v = aggregate(rs, 3);
    if (v.size() == 1 && v[0].accepted == (yes >= 2)) ++agree;
  }
  return {agree == 27, std::to_string(agree) + "/27 triples agree with yes-count >= 2"};
}

std::string sweep_line(const std::vector<SweepRow>& rows) {
  std::string out;
  for (const auto& r : rows) out += fmt(" %.1f:", r.alpha) + fmt("%.2f", r.f1);
  return out;
}

Outcome synthetic_end_to_end() {
  const fs::path dir = scratch("synthetic");
  write_synthetic_world(dir, SyntheticSpec{});
  const PipelineConfig base = PipelineConfig::load(dir / "config.json");
  const auto grid = parse_alpha_grid("0:1:0.1");

  PipelineConfig crf = base;
  crf.tagger.kind = ModelKind::Crf;
  PipelineConfig lstm = base;
  lstm.tagger.kind = ModelKind::Lstm;
  lstm.tagger.variant = NeuralVariant::parse("or,char");

  bool ok = true;
  std::string detail;
  std::vector<long> sizes;
  for (const auto& [name, config] : {std::pair{"crf", crf}, std::pair{"lstm or,char", lstm}}) {
    const SweepResult sweep = run_sweep(config, grid, dir / name);
    write_sweep_table(dir / (std::string(name) + ".csv"), sweep);
    const auto pooled = pooled_rows(sweep);

    // (a) admitted training set shrinks as alpha grows, per sense.
    bool shrinking = true;
    for (const auto& rows : sweep.rows) {
      for (std::size_t k = 1; k < rows.size(); ++k) shrinking &= rows[k].train_size <= rows[k - 1].train_size;
    }
    // (b) the best F1 is reached strictly inside (0, 1) and beats alpha = 1.
    double best = -1.0;
    double best_alpha = -1.0;
    for (const auto& r : pooled) {
      if (r.alpha > 0.0 && r.alpha < 1.0 && r.f1 > best) {
        best = r.f1;
        best_alpha = r.alpha;
      }
    }
    double best_any = 0.0;
    for (const auto& r : pooled) best_any = std::max(best_any, r.f1);
    const double at_one = pooled.back().f1;
    const bool interior = best >= best_any && best > at_one;
    // (c) span F1 of at least 95% at the best alpha.
    const bool strong = best_any >= 95.0;
    ok &= shrinking && interior && strong;
    detail += std::string(name) + ": (a) " + (shrinking ? "ok" : "violated") + ", (b) best " +
              fmt("%.2f", best) + fmt(" at %.1f", best_alpha) + " vs " + fmt("%.2f", at_one) +
              " at 1.0, (c) " + (strong ? "ok" : "below 95") + "; F1 by alpha" +
              sweep_line(pooled) + ". ";
    if (sizes.empty()) {
      for (const auto& r : pooled) sizes.push_back(r.train_size);
    }
  }
  detail += "train sizes";
  for (long s : sizes) detail += " " + std::to_string(s);
  return {ok, detail};
}

Outcome protocol_shape() {
  std::vector<LabeledPhrase> fixture;
  for (Sense s : kAllSenses) {
    for (int i = 0; i < 500; ++i) {
      fixture.push_back({{"phrase", std::to_string(i)}, s, Provenance::Crowd});
    }
  }
  const CrowdSplit split = split_crowd(fixture, {1, 100});
  bool counts_ok = true;
  std::string detail;
  for (Sense s : kAllSenses) {
    const auto tr = std::ranges::count_if(split.train, [&](const auto& p) { return p.sense == s; });
    const auto te = std::ranges::count_if(split.test, [&](const auto& p) { return p.sense == s; });
    counts_ok &= tr == 400 && te == 100;
    detail += std::string(sense_name(s)) + " " + std::to_string(tr) + "/" + std::to_string(te) + ", ";
  }
  std::set<std::pair<Sense, std::string>> train, test;
  for (const auto& p : split.train) train.emplace(p.sense, p.text());
  for (const auto& p : split.test) test.emplace(p.sense, p.text());
  long overlap = 0;
  for (const auto& k : test) overlap += train.contains(k);
  const bool covers = train.size() + test.size() == fixture.size();
  return {counts_ok && overlap == 0 && covers,
          detail + "overlap " + std::to_string(overlap) + ", covers input " + (covers ? "yes" : "no")};
}

Outcome determinism() {
  const fs::path dir = scratch("determinism");
  write_synthetic_world(dir / "world", SyntheticSpec{});
  const PipelineConfig config = PipelineConfig::load(dir / "world" / "config.json");

  // Training data for the CLI runs comes from the pipeline's own artifacts.
  run_pipeline(config, dir / "run1");
  run_pipeline(config, dir / "run2");
  const bool reports_equal = slurp(dir / "run1" / "report.json") == slurp(dir / "run2" / "report.json");

  using testing::quoted;
  const std::string cli = quoted(SENSERY_CLI_PATH);
  const std::string train = quoted((dir / "run1" / "train_audible.conll").string());
  bool models_equal = true;
  std::string detail;
  for (const std::string model : {"crf", "lstm"}) {
    std::string files[2];
    for (int k = 0; k < 2; ++k) {
      const fs::path out = dir / (model + std::to_string(k) + ".json");
      const auto r = testing::run_command(cli + " train --model " + model + " --seed 5 --epochs 5 --train " +
                                          train + " --out " + quoted(out.string()));
      if (r.code != 0) return {false, "sensery train failed: " + r.output};
      files[k] = slurp(out);
    }
    const bool same = !files[0].empty() && files[0] == files[1];
    models_equal &= same;
    detail += model + " model files " + (same ? "identical" : "differ") + ", ";
  }
  return {reports_equal && models_equal,
          detail + "pipeline reports " + (reports_equal ? "identical" : "differ")};
}

}  // namespace

int main() {
  criterion("crf-oracle-equivalence", 10, crf_oracle);
  criterion("crf-gradient", 30, crf_gradient);
  criterion("neural-gradient", 60, neural_gradient);
  criterion("distribution-normalization", 0, normalization);
  criterion("variant-containment", 0, containment);
  criterion("bio-algebra", 0, bio_algebra);
  criterion("mixture-monotonicity", 0, mixture_monotonicity);
  criterion("fleiss-kappa", 0, kappa);
  criterion("aggregation-exhaustive", 0, aggregation);
  criterion("synthetic-end-to-end", 600, synthetic_end_to_end);
  criterion("protocol-shape", 0, protocol_shape);
  criterion("determinism", 0, determinism);
  std::printf("%d of 12 criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
