#ifndef SUBJQA_NEIGHBORHOOD_HPP_
#define SUBJQA_NEIGHBORHOOD_HPP_

#include <Eigen/Dense>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "subjqa/corpus.hpp"
#include "subjqa/factorization.hpp"
#include "subjqa/opinion.hpp"

namespace subjqa {

struct Neighbor {
  std::string key;
  double weight = 0.0;  // cosine similarity of the two embeddings

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

// Orders by weight descending, then key ascending.
bool neighbor_before(const Neighbor& a, const Neighbor& b);

struct NeighborhoodModel {
  std::size_t k_max = 10;
  // Every extraction of the factor model has an entry, possibly empty.
  std::map<std::string, std::vector<Neighbor>> neighbors;

  void save(const std::filesystem::path& path) const;
  static NeighborhoodModel load(const std::filesystem::path& path);
};

double cosine_similarity(const Eigen::MatrixXd& rows, Eigen::Index a,
                         Eigen::Index b);

// Exact top-k_max cosine neighbors of every extraction embedding. Zero rows
// have no neighbors and are nobody's neighbor.
NeighborhoodModel build_neighborhood(const FactorModel& model,
                                     std::size_t k_max = 10);

// Word-level similarity of two extractions in [0, 1].
using SemanticSimilarity =
    std::function<double(std::string_view, std::string_view)>;

// Lowercased word tokens of an extraction key ("no free|wifi" -> no free
// wifi); punctuation and the separator are dropped.
std::vector<std::string> extraction_words(std::string_view key);

double jaccard_similarity(std::string_view key_a, std::string_view key_b);

// Word vectors in the common whitespace-separated text format
// ("word v1 v2 ... vd" per line).
class WordVectors {
 public:
  static WordVectors load(const std::filesystem::path& path);
  void add(std::string word, std::vector<double> vector);

  std::size_t dim() const { return dim_; }
  const std::vector<double>* find(std::string_view word) const;
  // Cosine of the mean-pooled vectors clamped to [0, 1]; falls back to
  // Jaccard when either side has no known word.
  double similarity(std::string_view key_a, std::string_view key_b) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

SemanticSimilarity make_semantic_similarity(const WordVectors* vectors);

inline constexpr double kDefaultCosMin = 0.8;
inline constexpr double kDefaultSemMax = 0.975;
inline constexpr std::size_t kDefaultMinNeighbors = 5;

// Keeps a neighbor iff weight >= cos_min and semantic_sim <= sem_max.
NeighborhoodModel prune_neighbors(const NeighborhoodModel& n,
                                  const SemanticSimilarity& semantic_sim,
                                  double cos_min = kDefaultCosMin,
                                  double sem_max = kDefaultSemMax);

struct Topic {
  std::string key;
  std::vector<Neighbor> surviving_neighbors;
  std::size_t frequency = 0;
};

// Element at index floor((n-1)/2) of the sorted review frequencies.
std::size_t lower_median_frequency(const ExtractionVocabulary& vocab);

// A topic has more than min_neighbors surviving neighbors, a frequency above
// the vocabulary median, and at least one neighbor more frequent than
// itself. Sorted by key.
std::vector<Topic> select_topics(const NeighborhoodModel& pruned,
                                 const ExtractionVocabulary& vocab,
                                 std::size_t min_neighbors =
                                     kDefaultMinNeighbors);

void save_topics(const std::filesystem::path& path,
                 const std::vector<Topic>& topics);
std::vector<Topic> load_topics(const std::filesystem::path& path);

struct TopicReviewPair {
  Topic topic;
  std::string review_id;
  std::string matched_neighbor;
  double neighbor_weight = 0.0;
};

// Reviews mentioning a surviving neighbor, each matched to its highest-weight
// neighbor; ordered by weight descending then review_id, capped at max_pairs.
std::vector<TopicReviewPair> pair_reviews(const Topic& topic,
                                          const ReviewCollection& collection,
                                          const ExtractionVocabulary& vocab,
                                          std::size_t max_pairs);

void save_pairs(const std::filesystem::path& path,
                const std::vector<TopicReviewPair>& pairs);
std::vector<TopicReviewPair> load_pairs(const std::filesystem::path& path,
                                        const std::vector<Topic>& topics);

}  // namespace subjqa

#endif  // SUBJQA_NEIGHBORHOOD_HPP_
