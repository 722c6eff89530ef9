#ifndef SUBJQA_STORE_HPP_
#define SUBJQA_STORE_HPP_

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "subjqa/annotation.hpp"
#include "subjqa/corpus.hpp"

namespace subjqa {

enum class ServiceStatus {
  kOk,
  kNoTasks,
  kWorkerDeactivated,
  kTaskMismatch,
  kSpanOutOfRange,
  kScoreRange,
  kIncomplete,
  kUnexpectedScore,
  kBadRequest,
};

std::string_view to_string(ServiceStatus status);

// What the store hands out: a question-writing task or a span task.
struct ServedTask {
  enum class Kind { kQuestion, kSpan };
  Kind kind = Kind::kSpan;
  std::string task_id;
  std::string review_id;
  std::string topic_key;
  std::string question_text;  // span tasks only
  bool is_gold = false;       // never revealed over the wire
  std::size_t slot = 0;       // position in the worker's stream
};

struct NextTaskResult {
  ServiceStatus status = ServiceStatus::kOk;
  std::optional<ServedTask> task;
};

struct SubmitResult {
  ServiceStatus status = ServiceStatus::kOk;
  std::uint64_t revision = 0;
  std::string message;
  bool worker_active = true;
};

struct Progress {
  std::uint64_t revision = 0;
  std::size_t total = 0;      // regular tasks in the stream
  std::size_t assigned = 0;   // regular tasks handed out so far
  std::size_t completed = 0;  // accepted submissions, gold included
  std::size_t gold_completed = 0;
  std::map<std::string, std::size_t> completed_per_domain;
  std::size_t workers = 0;
  std::size_t active_workers = 0;
};

struct WorkerProgress {
  WorkerStatus status;
  std::size_t completed = 0;
  std::optional<std::string> current_task;
};

struct StoredAnnotation {
  Annotation annotation;
  std::uint64_t revision = 0;
  bool is_gold = false;
  bool gold_correct = false;
  // Soft-delete flag: the worker was deactivated by quality control.
  bool ignored = false;
};

struct StoredQuestion {
  std::string task_id;
  std::string worker_id;
  std::string question;
  std::uint64_t revision = 0;
  bool ignored = false;
};

// Append-only, checksummed log of every write plus the state derived from
// it. Each line is "<crc32 hex>\t<json record>". All operations are
// serialized by one mutex, so a gold submission and its effect on the
// worker's status are observed together.
class AnnotationStore {
 public:
  // Span phase: serves `stream` with gold injection.
  AnnotationStore(TaskStream stream, const ReviewCollection& reviews,
                  std::filesystem::path log_path,
                  std::size_t min_gold = kDefaultMinGold);
  // Question phase: serves question-writing tasks, no gold.
  AnnotationStore(std::vector<QuestionTask> questions,
                  const ReviewCollection& reviews,
                  std::filesystem::path log_path);
  ~AnnotationStore();

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  bool question_phase() const { return question_phase_; }

  NextTaskResult next_task(const std::string& worker_id);
  SubmitResult submit_annotation(const std::string& worker_id,
                                 Annotation annotation);
  SubmitResult submit_question(const std::string& worker_id,
                               const std::string& task_id,
                               const std::string& question);
  Progress progress() const;
  std::optional<WorkerProgress> worker(const std::string& worker_id) const;

  std::vector<StoredAnnotation> annotations() const;
  std::vector<StoredQuestion> questions() const;
  std::uint64_t revision() const;

  // Canonical dump of all derived state, for crash-recovery comparison.
  std::string snapshot() const;

  const std::filesystem::path& log_path() const { return log_path_; }
  std::size_t dropped_tail_records() const { return dropped_tail_; }

 private:
  struct WorkerState {
    std::size_t index = 0;
    std::size_t served = 0;  // slots consumed
    std::optional<ServedTask> current;
    WorkerStatus status;
    std::size_t completed = 0;
  };

  void open_log(const std::string& content_hash);
  void append(const std::string& record_json);
  void apply(const std::string& record_json, bool replaying);
  WorkerState& worker_state(const std::string& worker_id);
  const Review& review_for(const std::string& task_id) const;

  bool question_phase_ = false;
  std::optional<TaskStream> stream_;
  std::vector<QuestionTask> question_tasks_;
  const ReviewCollection& reviews_;
  std::filesystem::path log_path_;
  std::size_t min_gold_ = kDefaultMinGold;
  std::FILE* log_ = nullptr;
  std::size_t dropped_tail_ = 0;

  mutable std::mutex mu_;
  std::uint64_t revision_ = 0;
  std::size_t regular_cursor_ = 0;
  std::map<std::string, WorkerState> workers_;
  std::vector<StoredAnnotation> annotations_;
  std::vector<StoredQuestion> questions_;
  std::map<std::string, std::string> task_domain_;
};

// Drives a store with scripted responses: repeatedly asks each worker (in
// order) for a task and submits that worker's response for it; a worker
// without a response for the served task stops. Returns submissions made.
struct ScriptedResponse {
  std::string worker_id;
  std::string task_id;
  std::optional<Annotation> annotation;  // span phase
  std::string question;                  // question phase
};

struct ReplayReport {
  std::size_t submitted = 0;
  std::size_t rejected = 0;
  std::vector<std::string> messages;
};

ReplayReport run_scripted(AnnotationStore& store,
                          const std::vector<ScriptedResponse>& responses);
std::vector<ScriptedResponse> load_scripted_responses(
    const std::filesystem::path& path);

}  // namespace subjqa

#endif  // SUBJQA_STORE_HPP_
