#ifndef SUBJQA_ANNOTATION_HPP_
#define SUBJQA_ANNOTATION_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subjqa/corpus.hpp"
#include "subjqa/neighborhood.hpp"

namespace subjqa {

inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;
inline constexpr std::string_view kInstructionsVersion = "question-writing/1";

struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

// A highlighted span, or UNANSWERABLE when `span` is empty.
struct Answer {
  std::optional<ByteSpan> span;

  static Answer unanswerable() { return {}; }
  static Answer at(std::size_t start, std::size_t end) {
    return Answer{ByteSpan{start, end}};
  }
  bool answerable() const { return span.has_value(); }
  friend bool operator==(const Answer&, const Answer&) = default;
};

struct QuestionTask {
  std::string task_id;
  Topic topic;
  std::string review_id;
  std::string matched_neighbor;
  std::string instructions_version = std::string(kInstructionsVersion);
};

// One task per pair, id = stable hash of (topic key, review_id). Repeated
// pairs collapse to a single task.
std::vector<QuestionTask> make_question_tasks(
    const std::vector<TopicReviewPair>& pairs);

std::string question_task_id(std::string_view topic_key,
                             std::string_view review_id);

// Text shown to the question writer: the topic as "opinion | aspect" and
// the review.
std::string render_question_prompt(const QuestionTask& task,
                                   const Review& review);

struct SpanTask {
  std::string task_id;
  std::string question_text;
  std::string review_id;
  std::string topic_key;
  bool is_gold = false;
  std::optional<Answer> gold_answer;  // present iff is_gold
};

// Span task for a written question; id = stable hash of the question task
// and the question text.
SpanTask make_span_task(const QuestionTask& source, std::string question_text);

struct Annotation {
  std::string task_id;
  std::string worker_id;
  int question_subj_score = 0;
  Answer answer;
  std::optional<int> answer_subj_score;  // absent iff unanswerable

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

enum class AnnotationIssue {
  kOk,
  kSpanOutOfRange,   // outside the review or not on token boundaries
  kScoreRange,       // a score outside 1..5
  kIncomplete,       // answerable without an answer score
  kUnexpectedScore,  // unanswerable with an answer score
};

std::string_view to_string(AnnotationIssue issue);

AnnotationIssue check_annotation(const Annotation& annotation,
                                 std::string_view review_text,
                                 const TokenSequence& review_tokens);

// Slot of a worker's stream: gold slots index into the gold pool.
struct StreamSlot {
  bool is_gold = false;
  std::size_t gold_index = 0;
};

// Per-worker task stream with exactly one gold task in every window of
// `window` consecutive slots, at a seeded position. Regular tasks are shared
// by all workers and consumed in order by whoever reaches them first.
class TaskStream {
 public:
  // Throws Error(kConfig) if injection is enabled with an empty gold pool or
  // any gold task lacks a gold answer.
  TaskStream(std::vector<SpanTask> regular, std::vector<SpanTask> gold_pool,
             std::uint64_t seed, bool inject_gold = true,
             std::size_t window = 5);

  const std::vector<SpanTask>& regular() const { return regular_; }
  const std::vector<SpanTask>& gold_pool() const { return gold_pool_; }
  std::uint64_t seed() const { return seed_; }
  bool inject_gold() const { return inject_gold_; }
  std::size_t window() const { return window_; }

  std::size_t gold_position(std::size_t worker_index, std::size_t window) const;
  // The k-th slot (0-based) served to a worker.
  StreamSlot slot(std::size_t worker_index, std::size_t k) const;
  // Slots served to a worker when `regular_available` regular tasks remain;
  // the stream ends at the first regular slot that cannot be filled.
  std::vector<StreamSlot> plan(std::size_t worker_index,
                               std::size_t regular_available) const;

  const SpanTask* find(std::string_view task_id) const;

  void save(const std::filesystem::path& path) const;
  static TaskStream load(const std::filesystem::path& path);

 private:
  std::vector<SpanTask> regular_;
  std::vector<SpanTask> gold_pool_;
  std::uint64_t seed_;
  bool inject_gold_;
  std::size_t window_;
};

TaskStream make_span_tasks(std::vector<SpanTask> questions,
                           std::vector<SpanTask> gold_pool, std::uint64_t seed,
                           bool inject_gold = true, std::size_t window = 5);

// Token-level F1 between two byte spans of the same review.
double span_token_f1(const TokenSequence& tokens, const ByteSpan& a,
                     const ByteSpan& b);

inline constexpr double kGoldSpanF1 = 0.5;

// UNANSWERABLE matches UNANSWERABLE; spans match at token F1 >= 0.5. Throws
// Error(kIntegrity) if the annotation is for another task or `gold` is not a
// gold task.
bool grade_gold(const Annotation& annotation, const SpanTask& gold,
                const TokenSequence& review_tokens);

struct WorkerStatus {
  std::string worker_id;
  std::size_t gold_seen = 0;
  std::size_t gold_correct = 0;
  bool active = true;
};

inline constexpr std::size_t kDefaultMinGold = 5;
inline constexpr int kRequiredAccuracyPercent = 70;

// Replays graded gold results in order. A worker stays active through the
// first `min_gold` golds; afterwards the first time accuracy drops below 70%
// the worker is deactivated for good.
WorkerStatus evaluate_worker(const std::vector<bool>& history,
                             std::size_t min_gold = kDefaultMinGold,
                             std::string worker_id = {});

// Applies one more graded gold to an existing status.
void record_gold(WorkerStatus& status, bool correct,
                 std::size_t min_gold = kDefaultMinGold);

// Line-delimited task batches.
std::string annotation_to_json(const Annotation& a);
Annotation annotation_from_json(std::string_view text);
std::string span_task_to_json(const SpanTask& t);
SpanTask span_task_from_json(std::string_view text);
std::string question_task_to_json(const QuestionTask& t);
QuestionTask question_task_from_json(std::string_view text);

void save_question_tasks(const std::filesystem::path& path,
                         const std::vector<QuestionTask>& tasks);
std::vector<QuestionTask> load_question_tasks(const std::filesystem::path& path);
void save_span_tasks(const std::filesystem::path& path,
                     const std::vector<SpanTask>& tasks);
std::vector<SpanTask> load_span_tasks(const std::filesystem::path& path);
void save_annotations(const std::filesystem::path& path,
                      const std::vector<Annotation>& annotations);
std::vector<Annotation> load_annotations(const std::filesystem::path& path);

// Written questions: records {"task_id": question task id, "question": text}.
struct WrittenQuestion {
  std::string task_id;
  std::string question;
};
std::vector<WrittenQuestion> load_written_questions(
    const std::filesystem::path& path);

}  // namespace subjqa

#endif  // SUBJQA_ANNOTATION_HPP_
