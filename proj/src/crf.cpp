#include "sensery/crf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "sensery/error.hpp"
#include "sensery/model_io.hpp"
#include "sensery/pos.hpp"
#include "sensery/rng.hpp"

namespace sensery {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kB = 0;
constexpr int kI = 1;
constexpr int kO = 2;

double log_sum_exp(const double* x, int n) {
  double m = kNegInf;
  for (int k = 0; k < n; ++k) m = std::max(m, x[k]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (int k = 0; k < n; ++k) s += std::exp(x[k] - m);
  return m + std::log(s);
}

const char* offset_name(int d) {
  switch (d) {
    case -2: return "[-2]";
    case -1: return "[-1]";
    case 0: return "[0]";
    case 1: return "[+1]";
    case 2: return "[+2]";
  }
  return "[?]";
}

std::string shape_class(std::string_view s) {
  if (is_punct_token(s)) return "punct";
  if (std::any_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return "digit";
  }
  if (s.front() >= 'A' && s.front() <= 'Z') return "cap";
  return "lower";
}

}  // namespace

FeatureVocab::FeatureVocab(std::span<const std::string> features) {
  for (const std::string& f : features) {
    if (index_.emplace(f, static_cast<int>(names_.size())).second) names_.push_back(f);
  }
}

std::optional<int> FeatureVocab::find(std::string_view feature) const {
  auto it = index_.find(std::string(feature));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> featurize(std::span<const Token> sentence, std::size_t i) {
  const auto n = static_cast<long>(sentence.size());
  const auto at = static_cast<long>(i);
  const auto pos_of = [&](long k) -> std::string {
    if (k < 0) return "__BOS__";
    if (k >= n) return "__EOS__";
    const Token& t = sentence[k];
    return t.pos ? *t.pos : guess_pos(t.surface);
  };

  std::vector<std::string> f;
  f.reserve(20);
  f.emplace_back("bias");
  for (int d = -2; d <= 2; ++d) {
    const long k = at + d;
    std::string w = k < 0 ? "__BOS__" : k >= n ? "__EOS__" : sentence[k].lower;
    f.push_back(std::string("w") + offset_name(d) + "=" + w);
  }
  const std::string& word = sentence[i].lower;
  for (std::size_t len = 1; len <= 4 && len <= word.size(); ++len) {
    f.push_back("x[0]pre" + std::to_string(len) + "=" + word.substr(0, len));
  }
  for (std::size_t len = 1; len <= 4 && len <= word.size(); ++len) {
    f.push_back("x[0]suf" + std::to_string(len) + "=" + word.substr(word.size() - len));
  }
  for (int d = -1; d <= 1; ++d) f.push_back(std::string("p") + offset_name(d) + "=" + pos_of(at + d));
  f.push_back("shape=" + shape_class(sentence[i].surface));
  return f;
}

CrfModel::CrfModel(FeatureVocab vocab, double l2)
    : vocab_(std::move(vocab)),
      l2_(l2),
      weights_(static_cast<std::size_t>(vocab_.size()) * kNumTags + 9 + 3 + 3, 0.0) {}

CrfModel CrfModel::initial(FeatureVocab vocab, double l2) {
  CrfModel m(std::move(vocab), l2);
  if (auto bias = m.vocab().find("bias")) {
    m.weights_[m.emission_index(*bias, kB)] = kInitialMentionBias;
    m.weights_[m.emission_index(*bias, kI)] = kInitialMentionBias;
  }
  return m;
}

FeatureIds encode_features(const CrfModel& model, std::span<const Token> sentence) {
  FeatureIds ids(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    for (const std::string& f : featurize(sentence, i)) {
      if (auto id = model.vocab().find(f)) ids[i].push_back(*id);
    }
  }
  return ids;
}

ScoreMatrix emission_scores(const CrfModel& model, const FeatureIds& features) {
  ScoreMatrix s(features.size(), {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < features.size(); ++i) {
    for (int f : features[i]) {
      for (int y = 0; y < kNumTags; ++y) s[i][y] += model.emission(f, y);
    }
  }
  return s;
}

namespace {

struct Lattice {
  std::vector<std::array<double, kNumTags>> alpha;
  std::vector<std::array<double, kNumTags>> beta;
  double log_z = 0.0;
};

Lattice forward_backward(const CrfModel& model, const ScoreMatrix& e, bool need_beta) {
  const std::size_t n = e.size();
  Lattice lat;
  lat.alpha.resize(n);
  for (int y = 0; y < kNumTags; ++y) lat.alpha[0][y] = model.start(y) + e[0][y];
  double tmp[kNumTags];
  for (std::size_t t = 1; t < n; ++t) {
    for (int y = 0; y < kNumTags; ++y) {
      for (int p = 0; p < kNumTags; ++p) tmp[p] = lat.alpha[t - 1][p] + model.transition(p, y);
      lat.alpha[t][y] = log_sum_exp(tmp, kNumTags) + e[t][y];
    }
  }
  for (int y = 0; y < kNumTags; ++y) tmp[y] = lat.alpha[n - 1][y] + model.stop(y);
  lat.log_z = log_sum_exp(tmp, kNumTags);
  if (!need_beta) return lat;

  lat.beta.resize(n);
  for (int y = 0; y < kNumTags; ++y) lat.beta[n - 1][y] = model.stop(y);
  for (std::size_t t = n - 1; t-- > 0;) {
    for (int p = 0; p < kNumTags; ++p) {
      for (int y = 0; y < kNumTags; ++y) {
        tmp[y] = model.transition(p, y) + e[t + 1][y] + lat.beta[t + 1][y];
      }
      lat.beta[t][p] = log_sum_exp(tmp, kNumTags);
    }
  }
  return lat;
}

// Adds this sentence's NLL gradient (without l2) into `grad`; returns its NLL.
double accumulate(const CrfModel& model, const FeatureIds& ids, std::span<const BioTag> gold,
                  std::vector<double>& grad) {
  const std::size_t n = ids.size();
  const ScoreMatrix e = emission_scores(model, ids);
  const Lattice lat = forward_backward(model, e, true);

  // Expected counts.
  for (std::size_t t = 0; t < n; ++t) {
    for (int y = 0; y < kNumTags; ++y) {
      const double p = std::exp(lat.alpha[t][y] + lat.beta[t][y] - lat.log_z);
      for (int f : ids[t]) grad[model.emission_index(f, y)] += p;
      if (t == 0) grad[model.start_index(y)] += p;
      if (t == n - 1) grad[model.stop_index(y)] += p;
    }
    if (t + 1 < n) {
      for (int p = 0; p < kNumTags; ++p) {
        for (int y = 0; y < kNumTags; ++y) {
          const double pe = std::exp(lat.alpha[t][p] + model.transition(p, y) + e[t + 1][y] +
                                     lat.beta[t + 1][y] - lat.log_z);
          grad[model.transition_index(p, y)] += pe;
        }
      }
    }
  }
  // Empirical counts.
  for (std::size_t t = 0; t < n; ++t) {
    const int y = tag_index(gold[t]);
    for (int f : ids[t]) grad[model.emission_index(f, y)] -= 1.0;
    if (t > 0) grad[model.transition_index(tag_index(gold[t - 1]), y)] -= 1.0;
  }
  grad[model.start_index(tag_index(gold.front()))] -= 1.0;
  grad[model.stop_index(tag_index(gold.back()))] -= 1.0;

  return lat.log_z - sequence_score(model, e, gold);
}

double l2_term(const CrfModel& model) {
  double sq = 0.0;
  for (double w : model.weights()) sq += w * w;
  return 0.5 * model.l2() * sq;
}

}  // namespace

double log_partition(const CrfModel& model, const ScoreMatrix& emissions) {
  if (emissions.empty()) throw ValidationError("log_partition of an empty sentence");
  return forward_backward(model, emissions, false).log_z;
}

double log_partition(const CrfModel& model, std::span<const Token> sentence) {
  return log_partition(model, emission_scores(model, encode_features(model, sentence)));
}

double sequence_score(const CrfModel& model, const ScoreMatrix& emissions,
                      std::span<const BioTag> tags) {
  if (tags.size() != emissions.size() || tags.empty()) {
    throw ValidationError("tag sequence does not match the sentence");
  }
  double s = model.start(tag_index(tags.front())) + model.stop(tag_index(tags.back()));
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += emissions[t][tag_index(tags[t])];
    if (t > 0) s += model.transition(tag_index(tags[t - 1]), tag_index(tags[t]));
  }
  return s;
}

std::vector<std::array<double, kNumTags>> marginals(const CrfModel& model,
                                                    std::span<const Token> sentence) {
  if (sentence.empty()) return {};
  const ScoreMatrix e = emission_scores(model, encode_features(model, sentence));
  const Lattice lat = forward_backward(model, e, true);
  std::vector<std::array<double, kNumTags>> out(sentence.size());
  for (std::size_t t = 0; t < sentence.size(); ++t) {
    for (int y = 0; y < kNumTags; ++y) {
      out[t][y] = std::exp(lat.alpha[t][y] + lat.beta[t][y] - lat.log_z);
    }
  }
  return out;
}

LossAndGradient nll_and_gradient(const CrfModel& model, std::span<const TaggedSentence> batch) {
  LossAndGradient out;
  out.gradient.assign(model.weights().size(), 0.0);
  for (const TaggedSentence& s : batch) {
    if (s.empty()) continue;
    out.loss += accumulate(model, encode_features(model, s.tokens()), s.tags(), out.gradient);
  }
  out.loss += l2_term(model);
  const auto w = model.weights();
  for (std::size_t k = 0; k < w.size(); ++k) out.gradient[k] += model.l2() * w[k];
  return out;
}

std::vector<BioTag> viterbi(const CrfModel& model, std::span<const Token> sentence) {
  if (sentence.empty()) return {};
  const ScoreMatrix e = emission_scores(model, encode_features(model, sentence));
  const std::size_t n = e.size();
  const auto allowed = [](int from, int to) { return !(from == kO && to == kI); };

  std::vector<std::array<double, kNumTags>> best(n);
  std::vector<std::array<int, kNumTags>> back(n);
  for (int y = 0; y < kNumTags; ++y) {
    best[0][y] = y == kI ? kNegInf : model.start(y) + e[0][y];
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (int y = 0; y < kNumTags; ++y) {
      double top = kNegInf;
      int arg = kO;
      for (int p = 0; p < kNumTags; ++p) {
        if (!allowed(p, y) || best[t - 1][p] == kNegInf) continue;
        const double s = best[t - 1][p] + model.transition(p, y);
        if (s > top) {
          top = s;
          arg = p;
        }
      }
      best[t][y] = top == kNegInf ? kNegInf : top + e[t][y];
      back[t][y] = arg;
    }
  }
  double top = kNegInf;
  int last = kO;
  for (int y = 0; y < kNumTags; ++y) {
    if (best[n - 1][y] == kNegInf) continue;
    const double s = best[n - 1][y] + model.stop(y);
    if (s > top) {
      top = s;
      last = y;
    }
  }
  std::vector<BioTag> tags(n);
  tags[n - 1] = tag_from_index(last);
  for (std::size_t t = n - 1; t > 0; --t) {
    last = back[t][last];
    tags[t - 1] = tag_from_index(last);
  }
  return tags;
}

double crf_objective(const CrfModel& model, std::span<const TaggedSentence> data) {
  double total = 0.0;
  long n = 0;
  for (const TaggedSentence& s : data) {
    if (s.empty()) continue;
    const FeatureIds ids = encode_features(model, s.tokens());
    const ScoreMatrix e = emission_scores(model, ids);
    total += log_partition(model, e) - sequence_score(model, e, s.tags());
    ++n;
  }
  return (n > 0 ? total / static_cast<double>(n) : 0.0) + l2_term(model);
}

CrfModel train_crf(std::span<const TaggedSentence> data, const CrfTrainConfig& config,
                   CrfTrainStats* stats) {
  if (data.empty()) throw ValidationError("train_crf needs at least one sentence");
  if (config.epochs < 1 || config.batch_size < 1 || !(config.step > 0.0)) {
    throw ValidationError("invalid CRF training configuration");
  }

  // Sentences with POS filled in, featurized once.
  std::vector<std::vector<Token>> tokens;
  std::vector<std::string> all_features;
  for (const TaggedSentence& s : data) {
    if (s.empty()) continue;
    tokens.push_back(with_pos(s.tokens()));
    for (std::size_t i = 0; i < tokens.back().size(); ++i) {
      for (std::string& f : featurize(tokens.back(), i)) all_features.push_back(std::move(f));
    }
  }
  if (tokens.empty()) throw ValidationError("train_crf: every sentence is empty");
  std::set<std::string> unique(all_features.begin(), all_features.end());
  std::vector<std::string> sorted(unique.begin(), unique.end());
  CrfModel model = CrfModel::initial(FeatureVocab(sorted), config.l2);

  std::vector<FeatureIds> ids;
  std::vector<std::vector<BioTag>> gold;
  for (std::size_t k = 0, d = 0; d < data.size(); ++d) {
    if (data[d].empty()) continue;
    ids.push_back(encode_features(model, tokens[k++]));
    gold.push_back(data[d].tags());
  }

  const auto objective = [&]() {
    double total = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const ScoreMatrix e = emission_scores(model, ids[k]);
      total += log_partition(model, e) - sequence_score(model, e, gold[k]);
    }
    return total / static_cast<double>(ids.size()) + l2_term(model);
  };

  CrfTrainStats local;
  local.initial_loss = objective();

  Rng rng(config.seed);
  std::vector<std::size_t> order(ids.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::vector<double> grad(model.weights().size());
  auto w = model.weights();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    const double step = config.step / (1.0 + epoch);
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      for (std::size_t k = b; k < e; ++k) loss += accumulate(model, ids[order[k]], gold[order[k]], grad);
      if (!std::isfinite(loss)) {
        throw DivergenceError("CRF training diverged in epoch " + std::to_string(epoch + 1));
      }
      const double scale = 1.0 / static_cast<double>(e - b);
      for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] -= step * (grad[k] * scale + config.l2 * w[k]);
      }
    }
    const double loss = objective();
    if (!std::isfinite(loss)) {
      throw DivergenceError("CRF training diverged in epoch " + std::to_string(epoch + 1));
    }
    local.epoch_losses.push_back(loss);
  }
  local.final_loss = local.epoch_losses.back();
  if (stats) *stats = std::move(local);
  return model;
}

nlohmann::ordered_json CrfModel::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = "crf";
  j["version"] = 1;
  j["labels"] = {"B", "I", "O"};
  j["l2"] = l2_;
  j["vocab"] = vocab_.names();
  const std::size_t f = static_cast<std::size_t>(num_features());
  j["shapes"] = {{"emission", {f, kNumTags}},
                 {"transition", {kNumTags, kNumTags}},
                 {"start", {kNumTags}},
                 {"stop", {kNumTags}}};
  const auto slice = [&](std::size_t from, std::size_t count) {
    return std::vector<double>(weights_.begin() + from, weights_.begin() + from + count);
  };
  j["emission"] = slice(0, f * kNumTags);
  j["transition"] = slice(transition_index(0, 0), 9);
  j["start"] = slice(start_index(0), 3);
  j["stop"] = slice(stop_index(0), 3);
  seal(j);
  return j;
}

CrfModel CrfModel::from_json(const nlohmann::ordered_json& doc, const std::string& source) {
  if (model_kind(doc) != "crf") throw ValidationError(source + ": not a CRF model");
  if (doc.value("version", 0) != 1) throw ValidationError(source + ": unsupported CRF version");
  verify_seal(doc, source);
  try {
    const auto names = doc.at("vocab").get<std::vector<std::string>>();
    CrfModel m(FeatureVocab(names), doc.at("l2").get<double>());
    if (m.num_features() != static_cast<int>(names.size())) {
      throw ValidationError(source + ": duplicate features in vocab");
    }
    const auto put = [&](const char* key, std::size_t from, std::size_t count) {
      const auto v = doc.at(key).get<std::vector<double>>();
      if (v.size() != count) throw ValidationError(source + ": wrong size for " + key);
      std::copy(v.begin(), v.end(), m.weights_.begin() + from);
    };
    put("emission", 0, names.size() * kNumTags);
    put("transition", m.transition_index(0, 0), 9);
    put("start", m.start_index(0), 3);
    put("stop", m.stop_index(0), 3);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

void CrfModel::save(const std::filesystem::path& path) const { write_json_file(path, to_json()); }

CrfModel CrfModel::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.string());
}

}  // namespace sensery
