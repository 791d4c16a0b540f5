#include "sensery/embeddings.hpp"

#include <algorithm>
#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "sensery/text.hpp"

namespace sensery {

EmbeddingTable::EmbeddingTable(int dim) : dim_(dim) {
  if (dim <= 0) throw ValidationError("embedding dimension must be positive");
}

bool EmbeddingTable::add(std::string word, std::span<const double> vec) {
  if (static_cast<int>(vec.size()) != dim_) {
    throw ValidationError("vector for '" + word + "' has " + std::to_string(vec.size()) +
                          " components, expected " + std::to_string(dim_));
  }
  if (index_.contains(word)) return false;
  index_.emplace(word, words_.size());
  words_.push_back(std::move(word));
  data_.insert(data_.end(), vec.begin(), vec.end());
  return true;
}

std::optional<std::span<const double>> EmbeddingTable::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return vector_at(it->second);
}

std::optional<std::span<const double>> EmbeddingTable::lookup(std::string_view word) const {
  if (auto v = find(case_fold(word))) return v;
  return find(word);
}

namespace {

std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_long(std::string_view s, long& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

EmbeddingTable parse_embeddings(std::istream& in, const std::string& source) {
  std::optional<EmbeddingTable> table;
  long header_dim = -1;
  long line_no = 0;
  std::string line;
  Vector buf;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto fields = split_spaces(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      long count = 0;
      long dim = 0;
      if (parse_long(fields[0], count) && parse_long(fields[1], dim)) {
        if (dim <= 0 || count < 0) throw ParseError(source, line_no, "invalid header");
        header_dim = dim;
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError(source, line_no, "row has no vector components");
    const int dim = static_cast<int>(fields.size() - 1);
    if (!table) {
      if (header_dim > 0 && header_dim != dim) {
        throw ParseError(source, line_no,
                         "row has " + std::to_string(dim) + " components but header says " +
                             std::to_string(header_dim));
      }
      table.emplace(dim);
    } else if (dim != table->dim()) {
      throw ParseError(source, line_no,
                       "row has " + std::to_string(dim) + " components, expected " +
                           std::to_string(table->dim()));
    }
    buf.resize(dim);
    for (int k = 0; k < dim; ++k) {
      if (!parse_double(fields[k + 1], buf[k]) || !std::isfinite(buf[k])) {
        throw ParseError(source, line_no, "bad number '" + std::string(fields[k + 1]) + "'");
      }
    }
    table->add(std::string(fields[0]), buf);
  }
  if (in.bad()) throw IoError("read failed: " + source);
  if (!table) throw ValidationError(source + ": embedding file has no vectors");
  return std::move(*table);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_embeddings(in, path.string());
}

std::optional<PhraseVector> try_phrase_vector(std::span<const std::string> phrase,
                                              const EmbeddingTable& table) {
  // Running mean: k copies of one vector average back to it bit-for-bit.
  PhraseVector pv;
  pv.vector.assign(table.dim(), 0.0);
  for (const std::string& w : phrase) {
    auto v = table.lookup(w);
    if (!v) continue;
    ++pv.covered;
    for (int k = 0; k < table.dim(); ++k) {
      pv.vector[k] += ((*v)[k] - pv.vector[k]) / pv.covered;
    }
  }
  if (pv.covered == 0) return std::nullopt;
  return pv;
}

PhraseVector phrase_vector(std::span<const std::string> phrase, const EmbeddingTable& table) {
  if (phrase.empty()) throw ValidationError("empty phrase");
  auto pv = try_phrase_vector(phrase, table);
  if (!pv) throw UndefinedVectorError("no token of '" + join(phrase) + "' is in the vocabulary");
  return std::move(*pv);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine of vectors with different lengths");
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) throw ValidationError("cosine of a zero-norm vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

namespace {

constexpr double kPowerTolerance = 1e-9;
constexpr int kMaxPowerIterations = 200000;

// Dominant eigenpair of a symmetric PSD matrix. Returns eigenvalue 0 and an
// arbitrary unit vector orthogonal to `avoid` when the matrix is zero.
std::pair<double, Eigen::VectorXd> power_iteration(const Eigen::MatrixXd& c,
                                                   const Eigen::VectorXd* avoid) {
  const Eigen::Index d = c.rows();
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = 1.0 / static_cast<double>(j + 1);
  if (avoid) v -= avoid->dot(v) * *avoid;
  v.normalize();

  Eigen::VectorXd next;
  for (int it = 0; it < kMaxPowerIterations; ++it) {
    next = c * v;
    const double norm = next.norm();
    if (norm == 0.0) return {0.0, v};
    next /= norm;
    const double delta = (next - v).norm();
    v = next;
    if (delta < kPowerTolerance) break;
  }
  return {v.dot(c * v), v};
}

void normalize_sign(Eigen::VectorXd& axis) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < axis.size(); ++j) {
    if (std::abs(axis[j]) > std::abs(axis[best])) best = j;
  }
  if (axis[best] < 0) axis = -axis;
}

}  // namespace

Pca2Result pca2_full(const std::vector<Vector>& vectors) {
  if (vectors.size() < 3) throw ValidationError("pca2 needs at least 3 vectors");
  const std::size_t d = vectors.front().size();
  if (d < 2) throw ValidationError("pca2 needs vectors of dimension >= 2");
  const auto n = static_cast<Eigen::Index>(vectors.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (vectors[i].size() != d) throw ValidationError("pca2 vectors differ in dimension");
    for (std::size_t j = 0; j < d; ++j) x(i, static_cast<Eigen::Index>(j)) = vectors[i][j];
  }
  x.rowwise() -= x.colwise().mean();
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  if (cov.cwiseAbs().maxCoeff() == 0.0) {
    throw ValidationError("pca2: all vectors are identical (zero covariance)");
  }

  auto [l1, a1] = power_iteration(cov, nullptr);
  const Eigen::MatrixXd deflated = cov - l1 * a1 * a1.transpose();
  auto [l2, a2] = power_iteration(deflated, &a1);
  // Re-orthogonalize against the first axis; deflation leaves O(tol) residue.
  a2 -= a1.dot(a2) * a1;
  a2.normalize();
  normalize_sign(a1);
  normalize_sign(a2);

  Pca2Result out;
  out.eigenvalues = {l1, l2};
  out.axes[0].assign(a1.data(), a1.data() + a1.size());
  out.axes[1].assign(a2.data(), a2.data() + a2.size());
  const Eigen::VectorXd p1 = x * a1;
  const Eigen::VectorXd p2 = x * a2;
  out.points.reserve(vectors.size());
  for (Eigen::Index i = 0; i < n; ++i) out.points.push_back({p1[i], p2[i]});
  return out;
}

std::vector<Point2> pca2(const std::vector<Vector>& vectors) {
  return pca2_full(vectors).points;
}

}  // namespace sensery
