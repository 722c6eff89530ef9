#ifndef SUBJQA_DATASET_HPP_
#define SUBJQA_DATASET_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "subjqa/annotation.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/store.hpp"

namespace subjqa {

enum class Split { kTrain = 0, kDev = 1, kTest = 2 };
inline constexpr std::array<Split, 3> kSplits = {Split::kTrain, Split::kDev,
                                                 Split::kTest};
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct AnswerSpan {
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  std::string surface;  // review_text[byte_start, byte_end)
  friend bool operator==(const AnswerSpan&, const AnswerSpan&) = default;
};

struct AnnotatedExample {
  std::string domain;
  std::string question_text;
  std::string topic_key;
  std::string review_id;
  std::string review_text;
  std::optional<AnswerSpan> answer;  // empty = UNANSWERABLE
  int question_subj_score = 0;
  std::optional<int> answer_subj_score;
  Split split = Split::kTrain;

  friend bool operator==(const AnnotatedExample&,
                         const AnnotatedExample&) = default;
  friend auto operator<=>(const AnnotatedExample& a, const AnnotatedExample& b) {
    return std::tie(a.domain, a.topic_key, a.review_id, a.question_text,
                    a.question_subj_score) <=>
           std::tie(b.domain, b.topic_key, b.review_id, b.question_text,
                    b.question_subj_score);
  }
};

// One example per accepted regular annotation. Gold (quality-control)
// annotations and annotations of deactivated workers are excluded. Throws
// Error(kIntegrity) when a stored span does not fit its review.
std::vector<AnnotatedExample> assemble(
    const std::vector<StoredAnnotation>& annotations, const TaskStream& tasks,
    const ReviewCollection& reviews);
std::vector<AnnotatedExample> assemble(const AnnotationStore& store,
                                       const TaskStream& tasks,
                                       const ReviewCollection& reviews);

using SplitAssignment = std::map<std::string, Split>;

struct SplitFractions {
  double train = 0.8;
  double dev = 0.1;
  double test = 0.1;
};

struct SplitResult {
  SplitAssignment assignment;
  std::array<std::vector<AnnotatedExample>, 3> parts;  // indexed by Split
};

// Sorted topics are shuffled by `seed` and cut at floor(train*n) and
// floor((train+dev)*n); every example inherits its topic's split. Throws
// Error(kParameter) with fewer than 3 topics or fractions not summing to 1.
SplitResult split_by_topic(const std::vector<AnnotatedExample>& examples,
                           const SplitFractions& fractions, std::uint64_t seed);

// Split of a bare topic list, same cut rule.
SplitAssignment split_topics(std::vector<std::string> topics,
                             const SplitFractions& fractions,
                             std::uint64_t seed);

// Column order of exported tables.
const std::vector<std::string>& export_columns();

struct ExportOptions {
  std::uint64_t seed = 0;
  std::string config_hash;
  // Domains that get a file even without examples.
  std::set<std::string> domains;
};

// Writes {split}-{domain}.tsv per split and domain plus manifest.json.
// Returns the written file paths.
std::vector<std::filesystem::path> export_dataset(
    const SplitResult& split, const std::filesystem::path& out_dir,
    const ExportOptions& options);

// Reads every table listed in out_dir/manifest.json.
std::vector<AnnotatedExample> load_exported(const std::filesystem::path& dir);

// Reads one exported table.
std::vector<AnnotatedExample> load_exported_table(
    const std::filesystem::path& path);

}  // namespace subjqa

#endif  // SUBJQA_DATASET_HPP_
