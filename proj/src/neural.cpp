#include "sensery/neural.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "sensery/error.hpp"
#include "sensery/model_io.hpp"
#include "sensery/rng.hpp"

namespace sensery {

NeuralVariant NeuralVariant::parse(std::string_view s) {
  NeuralVariant v{false, false};
  std::string norm;
  for (char c : s) {
    if (c == '+' || c == ',' || c == ' ') {
      norm += ',';
    } else {
      norm += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  std::size_t pos = 0;
  while (pos <= norm.size()) {
    const auto comma = norm.find(',', pos);
    const std::string part = norm.substr(pos, comma == std::string::npos ? norm.npos : comma - pos);
    if (part == "or") {
      v.output_recurrence = true;
    } else if (part == "char") {
      v.chars = true;
    } else if (!part.empty() && part != "base" && part != "lstm") {
      throw ValidationError("unknown variant component '" + part + "' in '" + std::string(s) + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return v;
}

std::string NeuralVariant::name() const {
  if (output_recurrence && chars) return "or,char";
  if (output_recurrence) return "or";
  if (chars) return "char";
  return "base";
}

LstmCell::LstmCell(int input, int hidden)
    : input_dim(input),
      hidden_dim(hidden),
      weights(MatrixXd::Zero(4 * hidden, input + hidden)),
      bias(VectorXd::Zero(4 * hidden)) {}

namespace {

VectorXd sigmoid(const VectorXd& a) {
  return (1.0 + (-a.array()).exp()).inverse().matrix();
}

struct StepCache {
  VectorXd input;  // [x; h_prev]
  VectorXd c_prev;
  VectorXd i, f, o, g;
  VectorXd c;
  VectorXd tanh_c;
};

LstmState step_cached(const LstmCell& cell, const VectorXd& x, const VectorXd& h,
                      const VectorXd& c, StepCache* cache) {
  const int n = cell.hidden_dim;
  VectorXd input(cell.input_dim + n);
  input << x, h;
  const VectorXd a = cell.weights * input + cell.bias;
  VectorXd i = sigmoid(a.segment(0, n));
  VectorXd f = sigmoid(a.segment(n, n));
  VectorXd o = sigmoid(a.segment(2 * n, n));
  VectorXd g = a.segment(3 * n, n).array().tanh().matrix();
  VectorXd c_next = f.cwiseProduct(c) + i.cwiseProduct(g);
  VectorXd tanh_c = c_next.array().tanh().matrix();
  LstmState out{o.cwiseProduct(tanh_c), c_next};
  if (cache) {
    cache->input = std::move(input);
    cache->c_prev = c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->o = std::move(o);
    cache->g = std::move(g);
    cache->c = std::move(c_next);
    cache->tanh_c = std::move(tanh_c);
  }
  return out;
}

// Backpropagates (dh, dc) through one step. Accumulates into `grad_cell`,
// returns dx and overwrites dh/dc with the gradients for the previous state.
VectorXd step_backward(const LstmCell& cell, const StepCache& s, VectorXd& dh, VectorXd& dc,
                       LstmCell& grad_cell) {
  const int n = cell.hidden_dim;
  const VectorXd d_o = dh.cwiseProduct(s.tanh_c);
  const VectorXd dct =
      dc + dh.cwiseProduct(s.o).cwiseProduct((1.0 - s.tanh_c.array().square()).matrix());
  VectorXd da(4 * n);
  da.segment(0, n) = dct.cwiseProduct(s.g).cwiseProduct(s.i.cwiseProduct((1.0 - s.i.array()).matrix()));
  da.segment(n, n) =
      dct.cwiseProduct(s.c_prev).cwiseProduct(s.f.cwiseProduct((1.0 - s.f.array()).matrix()));
  da.segment(2 * n, n) = d_o.cwiseProduct(s.o.cwiseProduct((1.0 - s.o.array()).matrix()));
  da.segment(3 * n, n) = dct.cwiseProduct(s.i).cwiseProduct((1.0 - s.g.array().square()).matrix());

  grad_cell.weights.noalias() += da * s.input.transpose();
  grad_cell.bias += da;
  const VectorXd d_input = cell.weights.transpose() * da;
  dc = dct.cwiseProduct(s.f);
  dh = d_input.tail(n);
  return d_input.head(cell.input_dim);
}

// Runs the cell over `inputs` from a zero state; returns the final hidden state.
VectorXd run_sequence(const LstmCell& cell, const std::vector<const double*>& inputs,
                      std::vector<StepCache>* caches) {
  VectorXd h = VectorXd::Zero(cell.hidden_dim);
  VectorXd c = VectorXd::Zero(cell.hidden_dim);
  if (caches) caches->resize(inputs.size());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Eigen::Map<const VectorXd> x(inputs[k], cell.input_dim);
    LstmState next = step_cached(cell, x, h, c, caches ? &(*caches)[k] : nullptr);
    h = std::move(next.h);
    c = std::move(next.c);
  }
  return h;
}

// Backpropagates d(final h) through a cached sequence; calls sink(k, dx_k).
template <typename Sink>
void sequence_backward(const LstmCell& cell, const std::vector<StepCache>& caches,
                       const VectorXd& d_final, LstmCell& grad_cell, Sink&& sink) {
  VectorXd dh = d_final;
  VectorXd dc = VectorXd::Zero(cell.hidden_dim);
  for (std::size_t k = caches.size(); k-- > 0;) {
    sink(k, step_backward(cell, caches[k], dh, dc, grad_cell));
  }
}

void require_distribution(const VectorXd& d) {
  if (d.size() != kNumTags) throw ValidationError("previous distribution must have 3 entries");
  if ((d.array() < 0.0).any() || std::abs(d.sum() - 1.0) > 1e-9) {
    throw ValidationError("previous output is not a probability distribution");
  }
}

VectorXd one_hot(BioTag t) {
  VectorXd v = VectorXd::Zero(kNumTags);
  v[tag_index(t)] = 1.0;
  return v;
}

}  // namespace

LstmState lstm_step(const LstmCell& cell, const VectorXd& x, const VectorXd& h,
                    const VectorXd& c) {
  if (x.size() != cell.input_dim || h.size() != cell.hidden_dim || c.size() != cell.hidden_dim) {
    throw ValidationError("lstm_step: dimension mismatch");
  }
  return step_cached(cell, x, h, c, nullptr);
}

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    const auto c = static_cast<unsigned char>(word[i]);
    std::size_t len = 1;
    if ((c & 0xE0) == 0xC0) {
      len = 2;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
    }
    len = std::min(len, word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

int NeuralTaggerModel::word_id(std::string_view surface) const {
  auto it = word_index.find(case_fold(surface));
  return it == word_index.end() ? kUnknownWord : it->second;
}

int NeuralTaggerModel::char_id(std::string_view utf8_char) const {
  auto it = char_index.find(std::string(utf8_char));
  return it == char_index.end() ? 0 : it->second;
}

NeuralTaggerModel create_neural_model(std::span<const TaggedSentence> data, const NeuralInit& init) {
  NeuralTaggerModel m;
  m.variant = init.variant;
  m.dims = init.dims;
  if (init.pretrained) m.dims.word_dim = init.pretrained->dim();
  const NeuralDims& d = m.dims;
  if (d.word_dim < 1 || d.window_hidden < 1 || d.window < 1 || d.window % 2 == 0) {
    throw ValidationError("neural dims: sizes must be positive and the window odd");
  }
  if (m.variant.chars && (d.char_dim < 1 || d.char_hidden < 2 || d.char_hidden % 2 != 0)) {
    throw ValidationError("neural dims: char_hidden must be even and positive");
  }

  std::set<std::string> train_words;
  std::set<std::string> train_chars;
  for (const TaggedSentence& s : data) {
    for (const Token& t : s.tokens()) {
      train_words.insert(t.lower);
      for (auto& ch : utf8_chars(t.surface)) train_chars.insert(std::move(ch));
    }
  }
  m.words = {"<unk>", "<pad>"};
  for (const std::string& w : train_words) m.words.push_back(w);
  if (init.pretrained) {
    std::set<std::string> have(m.words.begin(), m.words.end());
    std::size_t added = 0;
    for (const std::string& w : init.pretrained->words()) {
      if (added >= init.max_pretrained_words) break;
      const std::string lw = case_fold(w);
      if (have.insert(lw).second) {
        m.words.push_back(lw);
        ++added;
      }
    }
  }
  for (std::size_t k = 0; k < m.words.size(); ++k) m.word_index.emplace(m.words[k], static_cast<int>(k));

  Rng rng(init.seed);
  const auto fill_uniform = [&](auto& mat, double scale) {
    for (Eigen::Index k = 0; k < mat.size(); ++k) mat.data()[k] = rng.uniform(-scale, scale);
  };

  m.word_embeddings.resize(d.word_dim, static_cast<Eigen::Index>(m.words.size()));
  for (std::size_t k = 0; k < m.words.size(); ++k) {
    std::optional<std::span<const double>> v;
    if (init.pretrained && k >= 2) v = init.pretrained->lookup(m.words[k]);
    for (int r = 0; r < d.word_dim; ++r) {
      m.word_embeddings(r, static_cast<Eigen::Index>(k)) = v ? (*v)[r] : rng.uniform(-0.1, 0.1);
    }
  }

  if (m.variant.chars) {
    m.chars = {"<unk>"};
    for (const std::string& c : train_chars) m.chars.push_back(c);
    for (std::size_t k = 0; k < m.chars.size(); ++k) m.char_index.emplace(m.chars[k], static_cast<int>(k));
    m.char_embeddings.resize(d.char_dim, static_cast<Eigen::Index>(m.chars.size()));
    fill_uniform(m.char_embeddings, 0.1);
    const int half = d.char_hidden / 2;
    for (LstmCell* cell : {&m.char_forward, &m.char_backward}) {
      *cell = LstmCell(d.char_dim, half);
      fill_uniform(cell->weights, 1.0 / std::sqrt(static_cast<double>(half)));
      cell->bias.segment(half, half).setOnes();
    }
  }

  m.window_cell = LstmCell(d.word_dim, d.window_hidden);
  fill_uniform(m.window_cell.weights, 1.0 / std::sqrt(static_cast<double>(d.window_hidden)));
  m.window_cell.bias.segment(d.window_hidden, d.window_hidden).setOnes();

  m.output_weights.resize(kNumTags, m.output_inputs());
  fill_uniform(m.output_weights, 1.0 / std::sqrt(static_cast<double>(m.output_inputs())));
  m.output_bias = VectorXd::Zero(kNumTags);
  m.initial_logits = VectorXd::Zero(kNumTags);
  return m;
}

namespace {

struct CharPass {
  std::vector<int> ids;
  std::vector<StepCache> forward;
  std::vector<StepCache> backward;
  VectorXd encoding;
};

CharPass run_chars(std::string_view word, const NeuralTaggerModel& model, bool keep) {
  if (!model.variant.chars) throw ValidationError("model has no character encoder");
  CharPass p;
  for (const std::string& ch : utf8_chars(word)) p.ids.push_back(model.char_id(ch));
  if (p.ids.empty()) throw ValidationError("encode_chars of an empty word");
  std::vector<const double*> fwd;
  std::vector<const double*> bwd;
  for (int id : p.ids) fwd.push_back(model.char_embeddings.col(id).data());
  bwd.assign(fwd.rbegin(), fwd.rend());
  const VectorXd hf = run_sequence(model.char_forward, fwd, keep ? &p.forward : nullptr);
  const VectorXd hb = run_sequence(model.char_backward, bwd, keep ? &p.backward : nullptr);
  p.encoding.resize(hf.size() + hb.size());
  p.encoding << hf, hb;
  return p;
}

struct WindowPass {
  std::vector<int> ids;
  std::vector<StepCache> steps;
  VectorXd encoding;
};

WindowPass run_window(const NeuralTaggerModel& model, std::span<const Token> sentence,
                      std::size_t i, bool keep) {
  WindowPass p;
  p.ids = window_ids(model, sentence, i);
  std::vector<const double*> inputs;
  for (int id : p.ids) inputs.push_back(model.word_embeddings.col(id).data());
  p.encoding = run_sequence(model.window_cell, inputs, keep ? &p.steps : nullptr);
  return p;
}

VectorXd concat_inputs(const NeuralTaggerModel& model, const VectorXd& window,
                       const VectorXd& chars, const VectorXd& word, const VectorXd& previous) {
  VectorXd x(model.output_inputs());
  x.segment(0, model.dims.window_hidden) = window;
  if (model.variant.chars) x.segment(model.char_block_offset(), model.dims.char_hidden) = chars;
  x.segment(model.word_block_offset(), model.dims.word_dim) = word;
  if (model.variant.output_recurrence) x.segment(model.recurrence_block_offset(), kNumTags) = previous;
  return x;
}

}  // namespace

VectorXd encode_chars(std::string_view word, const NeuralTaggerModel& model) {
  return run_chars(word, model, false).encoding;
}

std::vector<int> window_ids(const NeuralTaggerModel& model, std::span<const Token> sentence,
                            std::size_t i) {
  const long half = (model.dims.window - 1) / 2;
  const long n = static_cast<long>(sentence.size());
  std::vector<int> ids;
  for (long k = static_cast<long>(i) - half; k <= static_cast<long>(i) + half; ++k) {
    ids.push_back(k < 0 || k >= n ? NeuralTaggerModel::kPadWord : model.word_id(sentence[k].surface));
  }
  return ids;
}

WindowEncoding encode_window(std::span<const Token> sentence, std::size_t i,
                             const NeuralTaggerModel& model) {
  if (i >= sentence.size()) throw ValidationError("encode_window: position out of range");
  WindowEncoding out;
  out.window = run_window(model, sentence, i, false).encoding;
  out.word = model.word_embeddings.col(model.word_id(sentence[i].surface));
  return out;
}

VectorXd softmax(const VectorXd& z) {
  const VectorXd e = (z.array() - z.maxCoeff()).exp().matrix();
  return e / e.sum();
}

VectorXd predict_step(const VectorXd& window, const VectorXd& chars, const VectorXd& word,
                      const VectorXd& previous, const NeuralTaggerModel& model) {
  if (window.size() != model.dims.window_hidden || word.size() != model.dims.word_dim ||
      chars.size() != (model.variant.chars ? model.dims.char_hidden : 0)) {
    throw ValidationError("predict_step: input block sizes do not match the model");
  }
  if (model.variant.output_recurrence) {
    require_distribution(previous);
  } else if (previous.size() != 0) {
    throw ValidationError("predict_step: model has no output recurrence");
  }
  return softmax(model.output_weights * concat_inputs(model, window, chars, word, previous) +
                 model.output_bias);
}

std::vector<VectorXd> tag_distributions(const NeuralTaggerModel& model,
                                        std::span<const Token> sentence) {
  std::vector<VectorXd> out;
  VectorXd previous;
  if (model.variant.output_recurrence) previous = softmax(model.initial_logits);
  const VectorXd no_chars;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    const WindowEncoding w = encode_window(sentence, i, model);
    const VectorXd chars = model.variant.chars ? encode_chars(sentence[i].surface, model) : no_chars;
    VectorXd d = predict_step(w.window, chars, w.word, previous, model);
    if (model.variant.output_recurrence) previous = d;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<BioTag> tag_sentence(const NeuralTaggerModel& model, std::span<const Token> sentence) {
  std::vector<BioTag> tags;
  for (const VectorXd& d : tag_distributions(model, sentence)) {
    int best = 0;
    for (int k = 1; k < kNumTags; ++k) {
      if (d[k] > d[best]) best = k;
    }
    tags.push_back(tag_from_index(best));
  }
  repair_bio(tags);
  return tags;
}

NeuralTaggerModel restrict_variant(const NeuralTaggerModel& model, NeuralVariant target) {
  if ((target.chars && !model.variant.chars) ||
      (target.output_recurrence && !model.variant.output_recurrence)) {
    throw ValidationError("cannot restrict variant '" + model.variant.name() + "' to '" +
                          target.name() + "'");
  }
  NeuralTaggerModel out = model;
  out.variant = target;
  if (!target.chars) {
    out.chars.clear();
    out.char_index.clear();
    out.char_embeddings.resize(0, 0);
    out.char_forward = LstmCell();
    out.char_backward = LstmCell();
  }
  out.output_weights.resize(kNumTags, out.output_inputs());
  const auto copy = [&](int from, int to, int width) {
    out.output_weights.middleCols(to, width) = model.output_weights.middleCols(from, width);
  };
  copy(0, 0, model.dims.window_hidden);
  if (target.chars) copy(model.char_block_offset(), out.char_block_offset(), model.dims.char_hidden);
  copy(model.word_block_offset(), out.word_block_offset(), model.dims.word_dim);
  if (target.output_recurrence) {
    copy(model.recurrence_block_offset(), out.recurrence_block_offset(), kNumTags);
  }
  return out;
}

void zero_char_block(NeuralTaggerModel& model) {
  if (!model.variant.chars) return;
  model.output_weights.middleCols(model.char_block_offset(), model.dims.char_hidden).setZero();
}

void zero_recurrence_block(NeuralTaggerModel& model) {
  if (!model.variant.output_recurrence) return;
  model.output_weights.middleCols(model.recurrence_block_offset(), kNumTags).setZero();
}

NeuralGradient::NeuralGradient(const NeuralTaggerModel& model)
    : char_embeddings(MatrixXd::Zero(model.char_embeddings.rows(), model.char_embeddings.cols())),
      char_forward(model.char_forward.input_dim, model.char_forward.hidden_dim),
      char_backward(model.char_backward.input_dim, model.char_backward.hidden_dim),
      window_cell(model.window_cell.input_dim, model.window_cell.hidden_dim),
      output_weights(MatrixXd::Zero(model.output_weights.rows(), model.output_weights.cols())),
      output_bias(VectorXd::Zero(model.output_bias.size())),
      initial_logits(VectorXd::Zero(model.initial_logits.size())) {}

void NeuralGradient::set_zero() {
  word_embeddings.clear();
  char_embeddings.setZero();
  for (LstmCell* c : {&char_forward, &char_backward, &window_cell}) {
    c->weights.setZero();
    c->bias.setZero();
  }
  output_weights.setZero();
  output_bias.setZero();
  initial_logits.setZero();
}

double NeuralGradient::squared_norm() const {
  double s = 0.0;
  for (const auto& [id, row] : word_embeddings) s += row.squaredNorm();
  s += char_embeddings.squaredNorm();
  for (const LstmCell* c : {&char_forward, &char_backward, &window_cell}) {
    s += c->weights.squaredNorm() + c->bias.squaredNorm();
  }
  return s + output_weights.squaredNorm() + output_bias.squaredNorm() + initial_logits.squaredNorm();
}

void NeuralGradient::scale(double factor) {
  for (auto& [id, row] : word_embeddings) row *= factor;
  char_embeddings *= factor;
  for (LstmCell* c : {&char_forward, &char_backward, &window_cell}) {
    c->weights *= factor;
    c->bias *= factor;
  }
  output_weights *= factor;
  output_bias *= factor;
  initial_logits *= factor;
}

double loss_and_gradient(const NeuralTaggerModel& model, const TaggedSentence& sentence,
                         bool teacher_forcing, NeuralGradient* grad) {
  const std::size_t n = sentence.size();
  const auto& tokens = sentence.tokens();
  const auto& gold = sentence.tags();
  const bool recur = model.variant.output_recurrence;
  const bool keep = grad != nullptr;

  struct Position {
    WindowPass window;
    CharPass chars;
    int word = 0;
    VectorXd input;
    VectorXd dist;
  };
  std::vector<Position> pos(n);
  const VectorXd start = recur ? softmax(model.initial_logits) : VectorXd();
  double loss = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    Position& p = pos[t];
    p.window = run_window(model, tokens, t, keep);
    if (model.variant.chars) p.chars = run_chars(tokens[t].surface, model, keep);
    p.word = model.word_id(tokens[t].surface);
    VectorXd previous;
    if (recur) {
      if (t == 0) {
        previous = start;
      } else if (teacher_forcing) {
        previous = one_hot(gold[t - 1]);
      } else {
        previous = pos[t - 1].dist;
      }
    }
    p.input = concat_inputs(model, p.window.encoding, p.chars.encoding,
                            model.word_embeddings.col(p.word), previous);
    p.dist = softmax(model.output_weights * p.input + model.output_bias);
    loss -= std::log(p.dist[tag_index(gold[t])]);
  }
  if (!grad) return loss;

  // Gradient w.r.t. d_t arriving from step t+1 (only without teacher forcing).
  VectorXd carry = VectorXd::Zero(kNumTags);
  const int hm = model.dims.window_hidden;
  const int hc_half = model.dims.char_hidden / 2;
  for (std::size_t t = n; t-- > 0;) {
    Position& p = pos[t];
    VectorXd dz = p.dist - one_hot(gold[t]);
    if (recur && !teacher_forcing) dz += p.dist.cwiseProduct((carry.array() - carry.dot(p.dist)).matrix());

    grad->output_weights.noalias() += dz * p.input.transpose();
    grad->output_bias += dz;
    const VectorXd d_input = model.output_weights.transpose() * dz;

    sequence_backward(model.window_cell, p.window.steps, d_input.segment(0, hm), grad->window_cell,
                      [&](std::size_t k, const VectorXd& dx) {
                        auto [it, fresh] = grad->word_embeddings.try_emplace(p.window.ids[k]);
                        if (fresh) it->second = dx;
                        else it->second += dx;
                      });
    if (model.variant.chars) {
      const VectorXd d_chars = d_input.segment(model.char_block_offset(), model.dims.char_hidden);
      const std::size_t len = p.chars.ids.size();
      sequence_backward(model.char_forward, p.chars.forward, d_chars.head(hc_half),
                        grad->char_forward, [&](std::size_t k, const VectorXd& dx) {
                          grad->char_embeddings.col(p.chars.ids[k]) += dx;
                        });
      sequence_backward(model.char_backward, p.chars.backward, d_chars.tail(hc_half),
                        grad->char_backward, [&](std::size_t k, const VectorXd& dx) {
                          grad->char_embeddings.col(p.chars.ids[len - 1 - k]) += dx;
                        });
    }
    {
      const VectorXd dw = d_input.segment(model.word_block_offset(), model.dims.word_dim);
      auto [it, fresh] = grad->word_embeddings.try_emplace(p.word);
      if (fresh) it->second = dw;
      else it->second += dw;
    }
    if (recur) {
      const VectorXd d_prev = d_input.segment(model.recurrence_block_offset(), kNumTags);
      if (t == 0) {
        grad->initial_logits += start.cwiseProduct((d_prev.array() - d_prev.dot(start)).matrix());
      } else if (!teacher_forcing) {
        carry = d_prev;
      }
    }
  }
  return loss;
}

std::vector<ParamBlock> parameter_blocks(NeuralTaggerModel& m) {
  const auto block = [](std::string name, auto& mat) {
    return ParamBlock{std::move(name), mat.data(), static_cast<std::size_t>(mat.size())};
  };
  std::vector<ParamBlock> out = {
      block("output_weights", m.output_weights),
      block("output_bias", m.output_bias),
      block("initial_logits", m.initial_logits),
      block("window_cell.weights", m.window_cell.weights),
      block("window_cell.bias", m.window_cell.bias),
      block("word_embeddings", m.word_embeddings),
  };
  if (m.variant.chars) {
    out.push_back(block("char_forward.weights", m.char_forward.weights));
    out.push_back(block("char_forward.bias", m.char_forward.bias));
    out.push_back(block("char_backward.weights", m.char_backward.weights));
    out.push_back(block("char_backward.bias", m.char_backward.bias));
    out.push_back(block("char_embeddings", m.char_embeddings));
  }
  return out;
}

namespace {

void apply_update(NeuralTaggerModel& m, const NeuralGradient& g, double step) {
  m.output_weights -= step * g.output_weights;
  m.output_bias -= step * g.output_bias;
  m.initial_logits -= step * g.initial_logits;
  m.window_cell.weights -= step * g.window_cell.weights;
  m.window_cell.bias -= step * g.window_cell.bias;
  for (const auto& [id, row] : g.word_embeddings) m.word_embeddings.col(id) -= step * row;
  if (m.variant.chars) {
    m.char_embeddings -= step * g.char_embeddings;
    m.char_forward.weights -= step * g.char_forward.weights;
    m.char_forward.bias -= step * g.char_forward.bias;
    m.char_backward.weights -= step * g.char_backward.weights;
    m.char_backward.bias -= step * g.char_backward.bias;
  }
}

}  // namespace

NeuralTaggerModel train_neural(NeuralTaggerModel model, std::span<const TaggedSentence> data,
                               const NeuralTrainConfig& config, NeuralTrainStats* stats) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!data[k].empty()) order.push_back(k);
  }
  if (order.empty()) throw ValidationError("train_neural needs at least one non-empty sentence");
  if (config.epochs < 1 || !(config.step > 0.0) || config.batch_size < 1 || !(config.clip > 0.0)) {
    throw ValidationError("invalid neural training configuration");
  }

  Rng rng(config.seed);
  NeuralGradient grad(model);
  NeuralTrainStats local;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      grad.set_zero();
      double loss = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        loss += loss_and_gradient(model, data[order[k]], config.teacher_forcing, &grad);
      }
      if (!std::isfinite(loss)) {
        throw DivergenceError("neural training diverged in epoch " + std::to_string(epoch + 1) +
                              ", batch " + std::to_string(b / config.batch_size + 1));
      }
      epoch_loss += loss;
      grad.scale(1.0 / static_cast<double>(e - b));
      const double norm = std::sqrt(grad.squared_norm());
      if (!std::isfinite(norm)) {
        throw DivergenceError("non-finite gradient in epoch " + std::to_string(epoch + 1));
      }
      if (norm > config.clip) grad.scale(config.clip / norm);
      apply_update(model, grad, config.step);
    }
    local.epoch_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  if (stats) *stats = std::move(local);
  return model;
}

namespace {

nlohmann::ordered_json matrix_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"data", data}};
}

MatrixXd matrix_from_json(const nlohmann::ordered_json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<long>>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || shape[0] < 0 || shape[1] < 0 ||
      static_cast<std::size_t>(shape[0] * shape[1]) != data.size()) {
    throw ValidationError("bad shape for " + what);
  }
  MatrixXd m(shape[0], shape[1]);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = data[k++];
  }
  return m;
}

}  // namespace

nlohmann::ordered_json NeuralTaggerModel::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = "lstm";
  j["version"] = 1;
  j["labels"] = {"B", "I", "O"};
  j["variant"] = {{"output_recurrence", variant.output_recurrence}, {"chars", variant.chars}};
  j["dims"] = {{"word_dim", dims.word_dim},
               {"window_hidden", dims.window_hidden},
               {"char_dim", dims.char_dim},
               {"char_hidden", dims.char_hidden},
               {"window", dims.window}};
  j["words"] = words;
  j["chars"] = chars;
  nlohmann::ordered_json blocks;
  blocks["word_embeddings"] = matrix_json(word_embeddings);
  blocks["char_embeddings"] = matrix_json(char_embeddings);
  blocks["char_forward.weights"] = matrix_json(char_forward.weights);
  blocks["char_forward.bias"] = matrix_json(char_forward.bias);
  blocks["char_backward.weights"] = matrix_json(char_backward.weights);
  blocks["char_backward.bias"] = matrix_json(char_backward.bias);
  blocks["window_cell.weights"] = matrix_json(window_cell.weights);
  blocks["window_cell.bias"] = matrix_json(window_cell.bias);
  blocks["output_weights"] = matrix_json(output_weights);
  blocks["output_bias"] = matrix_json(output_bias);
  blocks["initial_logits"] = matrix_json(initial_logits);
  j["blocks"] = std::move(blocks);
  seal(j);
  return j;
}

NeuralTaggerModel NeuralTaggerModel::from_json(const nlohmann::ordered_json& doc,
                                               const std::string& source) {
  if (model_kind(doc) != "lstm") throw ValidationError(source + ": not an LSTM tagger model");
  if (doc.value("version", 0) != 1) throw ValidationError(source + ": unsupported model version");
  verify_seal(doc, source);
  try {
    NeuralTaggerModel m;
    m.variant.output_recurrence = doc.at("variant").at("output_recurrence").get<bool>();
    m.variant.chars = doc.at("variant").at("chars").get<bool>();
    const auto& d = doc.at("dims");
    m.dims = {d.at("word_dim").get<int>(), d.at("window_hidden").get<int>(),
              d.at("char_dim").get<int>(), d.at("char_hidden").get<int>(), d.at("window").get<int>()};
    m.words = doc.at("words").get<std::vector<std::string>>();
    m.chars = doc.at("chars").get<std::vector<std::string>>();
    for (std::size_t k = 0; k < m.words.size(); ++k) m.word_index.emplace(m.words[k], static_cast<int>(k));
    for (std::size_t k = 0; k < m.chars.size(); ++k) m.char_index.emplace(m.chars[k], static_cast<int>(k));
    const auto& b = doc.at("blocks");
    const auto get = [&](const char* name) { return matrix_from_json(b.at(name), name); };
    const auto cell = [&](const std::string& prefix) {
      LstmCell c;
      c.weights = get((prefix + ".weights").c_str());
      c.bias = get((prefix + ".bias").c_str());
      c.hidden_dim = static_cast<int>(c.bias.size() / 4);
      c.input_dim = static_cast<int>(c.weights.cols()) - c.hidden_dim;
      if (c.weights.rows() != c.bias.size()) throw ValidationError("bad LSTM block " + prefix);
      return c;
    };
    m.word_embeddings = get("word_embeddings");
    m.char_embeddings = get("char_embeddings");
    m.char_forward = cell("char_forward");
    m.char_backward = cell("char_backward");
    m.window_cell = cell("window_cell");
    m.output_weights = get("output_weights");
    m.output_bias = get("output_bias");
    m.initial_logits = get("initial_logits");
    if (m.output_weights.rows() != kNumTags || m.output_weights.cols() != m.output_inputs() ||
        m.word_embeddings.rows() != m.dims.word_dim ||
        m.word_embeddings.cols() != static_cast<Eigen::Index>(m.words.size())) {
      throw ValidationError("model shapes are inconsistent");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(source + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

void NeuralTaggerModel::save(const std::filesystem::path& path) const {
  write_json_file(path, to_json());
}

NeuralTaggerModel NeuralTaggerModel::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path), path.string());
}

}  // namespace sensery
