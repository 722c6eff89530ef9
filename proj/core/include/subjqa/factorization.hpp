#ifndef SUBJQA_FACTORIZATION_HPP_
#define SUBJQA_FACTORIZATION_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "subjqa/corpus.hpp"
#include "subjqa/opinion.hpp"

namespace subjqa {

// Sparse item x extraction count matrix in coordinate form. Entries are
// sorted by (row, col) and strictly positive.
struct ExtractionMatrix {
  struct Entry {
    std::size_t row = 0;
    std::size_t col = 0;
    double value = 0.0;
  };

  std::vector<std::string> row_labels;  // item ids
  std::vector<std::string> col_labels;  // canonical extraction keys
  std::vector<Entry> entries;

  std::size_t rows() const { return row_labels.size(); }
  std::size_t cols() const { return col_labels.size(); }
  Eigen::MatrixXd dense() const;
  // Throws Error(kIntegrity) on duplicate labels, out-of-range or
  // non-positive entries, or unsorted coordinates.
  void validate() const;

  void save(const std::filesystem::path& path) const;
  static ExtractionMatrix load(const std::filesystem::path& path);
};

inline constexpr std::size_t kDefaultMinItemReviews = 10000;
inline constexpr std::size_t kDefaultMinExtractionReviews = 5000;

// Keeps items with more than `min_item_reviews` reviews and extractions seen
// in more than `min_extraction_reviews` distinct reviews. Cell (i, j) counts
// the reviews of item i that contain extraction j. Throws
// Error(kEmptyMatrix) when nothing survives.
ExtractionMatrix build_matrix(
    const ExtractionVocabulary& vocab, const ReviewCollection& collection,
    std::size_t min_item_reviews = kDefaultMinItemReviews,
    std::size_t min_extraction_reviews = kDefaultMinExtractionReviews);

// Non-negative factors with M ~= items * extractions^T.
struct FactorModel {
  Eigen::MatrixXd item_embeddings;        // |items| x K
  Eigen::MatrixXd extraction_embeddings;  // |extractions| x K
  std::vector<std::string> item_labels;
  std::vector<std::string> extraction_labels;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;

  std::size_t k() const {
    return static_cast<std::size_t>(item_embeddings.cols());
  }
  void validate() const;

  // Versioned text format; doubles are written with round-trip precision.
  void save(const std::filesystem::path& path) const;
  static FactorModel load(const std::filesystem::path& path);
};

struct NmfOptions {
  std::size_t k = 20;
  std::size_t max_iters = 500;
  std::uint64_t seed = 0;
  // Stop when (err_prev - err) / err_prev < tol. Zero disables early stop.
  double tol = 1e-5;
};

// Frobenius norm of the residual after every iteration; index 0 is the
// error of the initialization.
struct NmfTrace {
  std::vector<double> errors;
};

// Lee-Seung multiplicative updates on the Frobenius loss. Items are updated
// first, then extractions, each iteration.
FactorModel nmf(const ExtractionMatrix& m, const NmfOptions& options,
                NmfTrace* trace = nullptr);

double frobenius_error(const ExtractionMatrix& m, const FactorModel& model);

// sum_k x_{i,k} e_{j,k}
double reconstruct(const FactorModel& model, std::size_t item,
                   std::size_t extraction);

}  // namespace subjqa

#endif  // SUBJQA_FACTORIZATION_HPP_
