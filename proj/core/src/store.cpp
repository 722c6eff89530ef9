#include "subjqa/store.hpp"

#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

std::string crc_hex(std::string_view payload) {
  const uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(payload.data()),
                          static_cast<uInt>(payload.size()));
  char buf[9];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

std::string stream_hash(const TaskStream& stream) {
  std::string material = "span\n";
  material += std::to_string(stream.seed()) + "\n" +
              (stream.inject_gold() ? "1" : "0") + "\n" +
              std::to_string(stream.window()) + "\n";
  for (const auto& t : stream.regular()) material += span_task_to_json(t) + "\n";
  material += "--gold--\n";
  for (const auto& t : stream.gold_pool()) material += span_task_to_json(t) + "\n";
  return sha256_hex(material);
}

std::string questions_hash(const std::vector<QuestionTask>& tasks) {
  std::string material = "question\n";
  for (const auto& t : tasks) material += question_task_to_json(t) + "\n";
  return sha256_hex(material);
}

}  // namespace

std::string_view to_string(ServiceStatus status) {
  switch (status) {
    case ServiceStatus::kOk: return "OK";
    case ServiceStatus::kNoTasks: return "NO_TASKS";
    case ServiceStatus::kWorkerDeactivated: return "WORKER_DEACTIVATED";
    case ServiceStatus::kTaskMismatch: return "TASK_MISMATCH";
    case ServiceStatus::kSpanOutOfRange: return "SPAN_OUT_OF_RANGE";
    case ServiceStatus::kScoreRange: return "SCORE_RANGE";
    case ServiceStatus::kIncomplete: return "INCOMPLETE";
    case ServiceStatus::kUnexpectedScore: return "UNEXPECTED_ANSWER_SCORE";
    case ServiceStatus::kBadRequest: return "BAD_REQUEST";
  }
  return "UNKNOWN";
}

AnnotationStore::AnnotationStore(TaskStream stream,
                                 const ReviewCollection& reviews,
                                 std::filesystem::path log_path,
                                 std::size_t min_gold)
    : question_phase_(false),
      stream_(std::move(stream)),
      reviews_(reviews),
      log_path_(std::move(log_path)),
      min_gold_(min_gold) {
  for (const auto* pool : {&stream_->regular(), &stream_->gold_pool()}) {
    for (const SpanTask& t : *pool) {
      task_domain_[t.task_id] = reviews_.at(t.review_id).domain.label();
    }
  }
  open_log(stream_hash(*stream_));
}

AnnotationStore::AnnotationStore(std::vector<QuestionTask> questions,
                                 const ReviewCollection& reviews,
                                 std::filesystem::path log_path)
    : question_phase_(true),
      question_tasks_(std::move(questions)),
      reviews_(reviews),
      log_path_(std::move(log_path)) {
  std::set<std::string_view> ids;
  for (const QuestionTask& t : question_tasks_) {
    if (!ids.insert(t.task_id).second) {
      throw Error(ErrorKind::kConfig, "duplicate task id " + t.task_id);
    }
    task_domain_[t.task_id] = reviews_.at(t.review_id).domain.label();
  }
  open_log(questions_hash(question_tasks_));
}

AnnotationStore::~AnnotationStore() {
  if (log_) std::fclose(log_);
}

void AnnotationStore::open_log(const std::string& content_hash) {
  std::string contents;
  if (std::filesystem::exists(log_path_)) contents = read_file(log_path_);

  std::size_t valid_bytes = 0;
  std::vector<std::string> records;
  std::size_t pos = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    if (nl == std::string::npos) {
      ++dropped_tail_;  // torn final write, never acknowledged
      break;
    }
    std::string_view line(contents.data() + pos, nl - pos);
    const auto tab = line.find('\t');
    const bool ok = tab == 8 && line.substr(0, 8) == crc_hex(line.substr(9));
    if (!ok) {
      if (nl + 1 < contents.size()) {
        throw Error(ErrorKind::kIntegrity,
                    "checksum mismatch in the middle of " + log_path_.string());
      }
      ++dropped_tail_;
      break;
    }
    records.emplace_back(line.substr(9));
    pos = nl + 1;
    valid_bytes = pos;
  }
  if (valid_bytes < contents.size()) {
    std::filesystem::resize_file(log_path_, valid_bytes);
  }

  if (!records.empty()) {
    const json head = json::parse(records.front());
    if (head.value("type", "") != "open" ||
        head.value("content_hash", "") != content_hash) {
      throw Error(ErrorKind::kIntegrity,
                  log_path_.string() + " was written for different tasks");
    }
  }
  for (const std::string& r : records) apply(r, /*replaying=*/true);

  if (log_path_.has_parent_path()) {
    std::filesystem::create_directories(log_path_.parent_path());
  }
  log_ = std::fopen(log_path_.c_str(), "ab");
  if (!log_) throw Error(ErrorKind::kIo, "cannot open log " + log_path_.string());
  if (records.empty()) {
    json open = {{"rev", 1},
                 {"type", "open"},
                 {"schema", "subjqa.log.v1"},
                 {"phase", question_phase_ ? "question" : "span"},
                 {"content_hash", content_hash}};
    append(open.dump());
    apply(open.dump(), false);
  }
}

void AnnotationStore::append(const std::string& record_json) {
  const std::string line = crc_hex(record_json) + "\t" + record_json + "\n";
  if (std::fwrite(line.data(), 1, line.size(), log_) != line.size() ||
      std::fflush(log_) != 0 || ::fsync(fileno(log_)) != 0) {
    throw Error(ErrorKind::kIo, "append to " + log_path_.string() + " failed: " +
                                    std::strerror(errno));
  }
}

AnnotationStore::WorkerState& AnnotationStore::worker_state(
    const std::string& worker_id) {
  auto [it, inserted] = workers_.try_emplace(worker_id);
  if (inserted) {
    it->second.index = workers_.size() - 1;
    it->second.status.worker_id = worker_id;
  }
  return it->second;
}

const Review& AnnotationStore::review_for(const std::string& task_id) const {
  if (question_phase_) {
    for (const auto& t : question_tasks_) {
      if (t.task_id == task_id) return reviews_.at(t.review_id);
    }
  } else if (const SpanTask* t = stream_->find(task_id)) {
    return reviews_.at(t->review_id);
  }
  throw Error(ErrorKind::kIntegrity, "unknown task " + task_id);
}

// Shared by live writes and log replay so both produce identical state.
void AnnotationStore::apply(const std::string& record_json, bool replaying) {
  const json r = json::parse(record_json);
  const std::uint64_t rev = r.at("rev").get<std::uint64_t>();
  if (rev != revision_ + 1) {
    throw Error(ErrorKind::kIntegrity, "log revision " + std::to_string(rev) +
                                           " follows " +
                                           std::to_string(revision_));
  }
  const std::string type = r.at("type").get<std::string>();
  if (type == "open") {
    const bool q = r.at("phase").get<std::string>() == "question";
    if (q != question_phase_) {
      throw Error(ErrorKind::kIntegrity, "log phase does not match the store");
    }
  } else if (type == "assign") {
    WorkerState& w = worker_state(r.at("worker").get<std::string>());
    const std::string task_id = r.at("task_id").get<std::string>();
    ServedTask served;
    served.task_id = task_id;
    served.slot = w.served;
    if (question_phase_) {
      if (regular_cursor_ >= question_tasks_.size() ||
          question_tasks_[regular_cursor_].task_id != task_id) {
        throw Error(ErrorKind::kIntegrity, "assignment out of order: " + task_id);
      }
      const QuestionTask& t = question_tasks_[regular_cursor_++];
      served.kind = ServedTask::Kind::kQuestion;
      served.review_id = t.review_id;
      served.topic_key = t.topic.key;
    } else {
      const StreamSlot slot = stream_->slot(w.index, w.served);
      const SpanTask* t = nullptr;
      if (slot.is_gold) {
        t = &stream_->gold_pool()[slot.gold_index];
      } else if (regular_cursor_ < stream_->regular().size()) {
        t = &stream_->regular()[regular_cursor_++];
      }
      if (t == nullptr || t->task_id != task_id) {
        throw Error(ErrorKind::kIntegrity, "assignment out of order: " + task_id);
      }
      served.kind = ServedTask::Kind::kSpan;
      served.review_id = t->review_id;
      served.topic_key = t->topic_key;
      served.question_text = t->question_text;
      served.is_gold = t->is_gold;
    }
    w.current = std::move(served);
  } else if (type == "annotation") {
    WorkerState& w = worker_state(r.at("worker").get<std::string>());
    StoredAnnotation sa;
    sa.annotation = annotation_from_json(r.at("annotation").dump());
    sa.revision = rev;
    if (!w.current || w.current->task_id != sa.annotation.task_id) {
      throw Error(ErrorKind::kIntegrity, "annotation without assignment");
    }
    sa.is_gold = w.current->is_gold;
    if (sa.is_gold) {
      const SpanTask* gold = stream_->find(sa.annotation.task_id);
      const Review& review = reviews_.at(gold->review_id);
      sa.gold_correct = grade_gold(sa.annotation, *gold, tokenize(review.text));
      if (replaying && r.value("correct", sa.gold_correct) != sa.gold_correct) {
        throw Error(ErrorKind::kIntegrity, "logged grade disagrees at rev " +
                                               std::to_string(rev));
      }
      record_gold(w.status, sa.gold_correct, min_gold_);
    }
    annotations_.push_back(std::move(sa));
    w.current.reset();
    ++w.served;
    ++w.completed;
  } else if (type == "question") {
    WorkerState& w = worker_state(r.at("worker").get<std::string>());
    StoredQuestion q;
    q.task_id = r.at("task_id").get<std::string>();
    q.worker_id = w.status.worker_id;
    q.question = r.at("question").get<std::string>();
    q.revision = rev;
    if (!w.current || w.current->task_id != q.task_id) {
      throw Error(ErrorKind::kIntegrity, "question without assignment");
    }
    questions_.push_back(std::move(q));
    w.current.reset();
    ++w.served;
    ++w.completed;
  } else {
    throw Error(ErrorKind::kIntegrity, "unknown log record type " + type);
  }
  revision_ = rev;
}

NextTaskResult AnnotationStore::next_task(const std::string& worker_id) {
  std::lock_guard<std::mutex> lock(mu_);
  if (worker_id.empty()) return {ServiceStatus::kBadRequest, std::nullopt};
  auto it = workers_.find(worker_id);
  const std::size_t index = it == workers_.end() ? workers_.size()
                                                 : it->second.index;
  if (it != workers_.end()) {
    if (!it->second.status.active) {
      return {ServiceStatus::kWorkerDeactivated, std::nullopt};
    }
    if (it->second.current) return {ServiceStatus::kOk, it->second.current};
  }
  const std::size_t served = it == workers_.end() ? 0 : it->second.served;

  std::string task_id;
  if (question_phase_) {
    if (regular_cursor_ >= question_tasks_.size()) {
      return {ServiceStatus::kNoTasks, std::nullopt};
    }
    task_id = question_tasks_[regular_cursor_].task_id;
  } else {
    const StreamSlot slot = stream_->slot(index, served);
    if (slot.is_gold) {
      task_id = stream_->gold_pool()[slot.gold_index].task_id;
    } else if (regular_cursor_ < stream_->regular().size()) {
      task_id = stream_->regular()[regular_cursor_].task_id;
    } else {
      return {ServiceStatus::kNoTasks, std::nullopt};
    }
  }
  json rec = {{"rev", revision_ + 1},
              {"type", "assign"},
              {"worker", worker_id},
              {"task_id", task_id},
              {"slot", served}};
  const std::string s = rec.dump();
  append(s);
  apply(s, false);
  return {ServiceStatus::kOk, workers_.at(worker_id).current};
}

SubmitResult AnnotationStore::submit_annotation(const std::string& worker_id,
                                                Annotation annotation) {
  std::lock_guard<std::mutex> lock(mu_);
  SubmitResult res;
  res.revision = revision_;
  auto it = workers_.find(worker_id);
  if (question_phase_ || it == workers_.end() || !it->second.current ||
      it->second.current->task_id != annotation.task_id ||
      (!annotation.worker_id.empty() && annotation.worker_id != worker_id)) {
    if (it != workers_.end() && !it->second.status.active) {
      res.status = ServiceStatus::kWorkerDeactivated;
      res.worker_active = false;
      return res;
    }
    res.status = ServiceStatus::kTaskMismatch;
    res.message = "task " + annotation.task_id +
                  " is not the task currently assigned to " + worker_id;
    return res;
  }
  WorkerState& w = it->second;
  if (!w.status.active) {
    res.status = ServiceStatus::kWorkerDeactivated;
    res.worker_active = false;
    return res;
  }
  annotation.worker_id = worker_id;
  const Review& review = reviews_.at(w.current->review_id);
  const AnnotationIssue issue =
      check_annotation(annotation, review.text, tokenize(review.text));
  switch (issue) {
    case AnnotationIssue::kOk: break;
    case AnnotationIssue::kSpanOutOfRange:
      res.status = ServiceStatus::kSpanOutOfRange;
      res.message = "answer span must lie within the review's " +
                    std::to_string(review.text.size()) +
                    " bytes and on token boundaries";
      return res;
    case AnnotationIssue::kScoreRange:
      res.status = ServiceStatus::kScoreRange;
      res.message = "subjectivity scores must be integers 1-5";
      return res;
    case AnnotationIssue::kIncomplete:
      res.status = ServiceStatus::kIncomplete;
      res.message = "answerable annotations need an answer subjectivity score";
      return res;
    case AnnotationIssue::kUnexpectedScore:
      res.status = ServiceStatus::kUnexpectedScore;
      res.message = "UNANSWERABLE annotations carry no answer score";
      return res;
  }
  json rec = {{"rev", revision_ + 1},
              {"type", "annotation"},
              {"worker", worker_id},
              {"annotation", json::parse(annotation_to_json(annotation))}};
  if (w.current->is_gold) {
    const SpanTask* gold = stream_->find(annotation.task_id);
    rec["gold"] = true;
    rec["correct"] = grade_gold(annotation, *gold, tokenize(review.text));
  }
  const std::string s = rec.dump();
  append(s);
  apply(s, false);
  res.revision = revision_;
  res.worker_active = w.status.active;
  return res;
}

SubmitResult AnnotationStore::submit_question(const std::string& worker_id,
                                              const std::string& task_id,
                                              const std::string& question) {
  std::lock_guard<std::mutex> lock(mu_);
  SubmitResult res;
  res.revision = revision_;
  auto it = workers_.find(worker_id);
  if (!question_phase_ || it == workers_.end() || !it->second.current ||
      it->second.current->task_id != task_id) {
    res.status = ServiceStatus::kTaskMismatch;
    res.message = "task " + task_id + " is not assigned to " + worker_id;
    return res;
  }
  if (trim(question).empty()) {
    res.status = ServiceStatus::kBadRequest;
    res.message = "question text is empty";
    return res;
  }
  json rec = {{"rev", revision_ + 1},
              {"type", "question"},
              {"worker", worker_id},
              {"task_id", task_id},
              {"question", trim(question)}};
  const std::string s = rec.dump();
  append(s);
  apply(s, false);
  res.revision = revision_;
  return res;
}

Progress AnnotationStore::progress() const {
  std::lock_guard<std::mutex> lock(mu_);
  Progress p;
  p.revision = revision_;
  p.total = question_phase_ ? question_tasks_.size() : stream_->regular().size();
  p.assigned = regular_cursor_;
  for (const auto& a : annotations_) {
    ++p.completed;
    if (a.is_gold) ++p.gold_completed;
    ++p.completed_per_domain[task_domain_.at(a.annotation.task_id)];
  }
  for (const auto& q : questions_) {
    ++p.completed;
    ++p.completed_per_domain[task_domain_.at(q.task_id)];
  }
  p.workers = workers_.size();
  for (const auto& [id, w] : workers_) p.active_workers += w.status.active;
  return p;
}

std::optional<WorkerProgress> AnnotationStore::worker(
    const std::string& worker_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = workers_.find(worker_id);
  if (it == workers_.end()) return std::nullopt;
  WorkerProgress wp;
  wp.status = it->second.status;
  wp.completed = it->second.completed;
  if (it->second.current) wp.current_task = it->second.current->task_id;
  return wp;
}

std::vector<StoredAnnotation> AnnotationStore::annotations() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<StoredAnnotation> out = annotations_;
  for (auto& a : out) {
    a.ignored = !workers_.at(a.annotation.worker_id).status.active;
  }
  return out;
}

std::vector<StoredQuestion> AnnotationStore::questions() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<StoredQuestion> out = questions_;
  for (auto& q : out) q.ignored = !workers_.at(q.worker_id).status.active;
  return out;
}

std::uint64_t AnnotationStore::revision() const {
  std::lock_guard<std::mutex> lock(mu_);
  return revision_;
}

std::string AnnotationStore::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  json j;
  j["revision"] = revision_;
  j["regular_cursor"] = regular_cursor_;
  json workers = json::object();
  for (const auto& [id, w] : workers_) {
    workers[id] = {{"index", w.index},
                   {"served", w.served},
                   {"current", w.current ? w.current->task_id : ""},
                   {"gold_seen", w.status.gold_seen},
                   {"gold_correct", w.status.gold_correct},
                   {"active", w.status.active},
                   {"completed", w.completed}};
  }
  j["workers"] = std::move(workers);
  json anns = json::array();
  for (const auto& a : annotations_) {
    anns.push_back({{"rev", a.revision},
                    {"annotation", json::parse(annotation_to_json(a.annotation))},
                    {"gold", a.is_gold},
                    {"correct", a.gold_correct}});
  }
  j["annotations"] = std::move(anns);
  json qs = json::array();
  for (const auto& q : questions_) {
    qs.push_back({{"rev", q.revision}, {"task_id", q.task_id},
                  {"worker", q.worker_id}, {"question", q.question}});
  }
  j["questions"] = std::move(qs);
  return j.dump();
}

ReplayReport run_scripted(AnnotationStore& store,
                          const std::vector<ScriptedResponse>& responses) {
  std::vector<std::string> workers;
  std::map<std::pair<std::string, std::string>, const ScriptedResponse*> by_key;
  for (const ScriptedResponse& r : responses) {
    if (r.worker_id != "*" &&
        std::find(workers.begin(), workers.end(), r.worker_id) == workers.end()) {
      workers.push_back(r.worker_id);
    }
    by_key[{r.worker_id, r.task_id}] = &r;
  }
  ReplayReport report;
  std::set<std::string> done;
  bool progressed = true;
  while (progressed) {
    progressed = false;
    for (const std::string& w : workers) {
      if (done.contains(w)) continue;
      const NextTaskResult next = store.next_task(w);
      if (next.status != ServiceStatus::kOk) {
        done.insert(w);
        continue;
      }
      const std::string& tid = next.task->task_id;
      auto it = by_key.find({w, tid});
      if (it == by_key.end()) it = by_key.find({"*", tid});
      if (it == by_key.end()) {
        report.messages.push_back(w + ": no scripted response for " + tid);
        done.insert(w);
        continue;
      }
      SubmitResult res;
      if (store.question_phase()) {
        res = store.submit_question(w, tid, it->second->question);
      } else if (it->second->annotation) {
        Annotation a = *it->second->annotation;
        a.worker_id = w;
        res = store.submit_annotation(w, std::move(a));
      } else {
        res.status = ServiceStatus::kBadRequest;
      }
      if (res.status == ServiceStatus::kOk) {
        ++report.submitted;
        progressed = true;
      } else {
        ++report.rejected;
        report.messages.push_back(w + ": " + std::string(to_string(res.status)) +
                                  " for " + tid + " " + res.message);
        done.insert(w);
      }
    }
  }
  return report;
}

std::vector<ScriptedResponse> load_scripted_responses(
    const std::filesystem::path& path) {
  std::vector<ScriptedResponse> out;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    if (trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorKind::kInput, "malformed response in " + path.string());
    }
    ScriptedResponse r;
    r.worker_id = j.value("worker_id", std::string("*"));
    r.task_id = j.at("task_id").get<std::string>();
    if (j.contains("question")) {
      r.question = j.at("question").get<std::string>();
    } else {
      r.annotation = annotation_from_json(line);
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace subjqa
