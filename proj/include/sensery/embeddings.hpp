#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sensery/error.hpp"

namespace sensery {

using Vector = std::vector<double>;

// word -> dense vector, all of one dimension. Immutable once loaded.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim);

  int dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }

  // Returns false (and keeps the existing vector) if the word is present.
  bool add(std::string word, std::span<const double> vec);

  // Exact lookup.
  std::optional<std::span<const double>> find(std::string_view word) const;
  // Case-folded form first, then the surface form.
  std::optional<std::span<const double>> lookup(std::string_view word) const;

  const std::vector<std::string>& words() const { return words_; }
  std::span<const double> vector_at(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(dim_), static_cast<std::size_t>(dim_)};
  }

 private:
  int dim_;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Text vector format: optional "<count> <dim>" header, then "word v1 ... vdim".
EmbeddingTable load_embeddings(const std::filesystem::path& path);
EmbeddingTable parse_embeddings(std::istream& in, const std::string& source = "<stream>");

// Raised when no token of a phrase is in the vocabulary.
class UndefinedVectorError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct PhraseVector {
  Vector vector;
  int covered = 0;  // in-vocabulary tokens averaged
};

// Component-wise mean over in-vocabulary tokens; OOV tokens are skipped.
PhraseVector phrase_vector(std::span<const std::string> phrase, const EmbeddingTable& table);
std::optional<PhraseVector> try_phrase_vector(std::span<const std::string> phrase,
                                              const EmbeddingTable& table);

double cosine(std::span<const double> u, std::span<const double> v);

using Point2 = std::array<double, 2>;

// Projection of mean-centered data onto the two leading eigenvectors of the
// sample covariance, found by power iteration with deflation. The sign of
// each axis is fixed so its largest-magnitude loading is positive.
struct Pca2Result {
  std::vector<Point2> points;
  std::array<Vector, 2> axes;
  std::array<double, 2> eigenvalues{};
};

Pca2Result pca2_full(const std::vector<Vector>& vectors);
std::vector<Point2> pca2(const std::vector<Vector>& vectors);

}  // namespace sensery
