#include "subjqa/annotation.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kUnanswerable = "UNANSWERABLE";
constexpr std::uint64_t kGoldPermSalt = 0x676f6c64;  // "gold"

json answer_to_json(const Answer& a) {
  if (!a.span) return std::string(kUnanswerable);
  return json{{"start", a.span->start}, {"end", a.span->end}};
}

Answer answer_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != kUnanswerable) {
      throw Error(ErrorKind::kInput, "answer must be a span or UNANSWERABLE");
    }
    return Answer::unanswerable();
  }
  const auto start = j.at("start").get<long long>();
  const auto end = j.at("end").get<long long>();
  if (start < 0 || end < 0) {
    throw Error(ErrorKind::kInput, "negative byte offset in answer");
  }
  return Answer::at(static_cast<std::size_t>(start),
                    static_cast<std::size_t>(end));
}

json parse_record(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorKind::kInput, "malformed record: " + std::string(text));
  }
  return j;
}

template <class T, class F>
std::vector<T> load_lines(const std::filesystem::path& path, F parse) {
  std::vector<T> out;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    if (trim(line).empty()) continue;
    out.push_back(parse(line));
  }
  return out;
}

template <class T, class F>
void save_lines(const std::filesystem::path& path, const std::vector<T>& items,
                F to_json) {
  std::string out;
  for (const auto& item : items) out += to_json(item) + "\n";
  write_file(path, out);
}

// Worker-specific order in which gold tasks are served.
std::vector<std::size_t> gold_permutation(std::uint64_t seed,
                                          std::size_t worker_index,
                                          std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(mix_seed(mix_seed(seed, kGoldPermSalt), worker_index));
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(i)]);
  }
  return perm;
}

}  // namespace

std::string question_task_id(std::string_view topic_key,
                             std::string_view review_id) {
  std::string material(topic_key);
  material.push_back('\x1f');
  material.append(review_id);
  return "q-" + hex64(fnv1a64(material));
}

std::vector<QuestionTask> make_question_tasks(
    const std::vector<TopicReviewPair>& pairs) {
  std::vector<QuestionTask> tasks;
  std::set<std::string> seen;
  for (const TopicReviewPair& p : pairs) {
    std::string id = question_task_id(p.topic.key, p.review_id);
    if (!seen.insert(id).second) continue;
    QuestionTask t;
    t.task_id = std::move(id);
    t.topic = p.topic;
    t.review_id = p.review_id;
    t.matched_neighbor = p.matched_neighbor;
    tasks.push_back(std::move(t));
  }
  return tasks;
}

std::string render_question_prompt(const QuestionTask& task,
                                   const Review& review) {
  std::string topic = task.topic.key;
  if (auto bar = topic.find('|'); bar != std::string::npos) {
    topic = topic.substr(0, bar) + " | " + topic.substr(bar + 1);
  }
  return "Topic: " + topic +
         "\nWrite a question about this topic that the review below can "
         "answer.\n\nReview:\n" +
         review.text + "\n";
}

SpanTask make_span_task(const QuestionTask& source, std::string question_text) {
  SpanTask t;
  std::string material = source.task_id;
  material.push_back('\x1f');
  material += question_text;
  t.task_id = "s-" + hex64(fnv1a64(material));
  t.question_text = std::move(question_text);
  t.review_id = source.review_id;
  t.topic_key = source.topic.key;
  return t;
}

std::string_view to_string(AnnotationIssue issue) {
  switch (issue) {
    case AnnotationIssue::kOk: return "OK";
    case AnnotationIssue::kSpanOutOfRange: return "SPAN_OUT_OF_RANGE";
    case AnnotationIssue::kScoreRange: return "SCORE_RANGE";
    case AnnotationIssue::kIncomplete: return "INCOMPLETE";
    case AnnotationIssue::kUnexpectedScore: return "UNEXPECTED_ANSWER_SCORE";
  }
  return "UNKNOWN";
}

AnnotationIssue check_annotation(const Annotation& a,
                                 std::string_view review_text,
                                 const TokenSequence& review_tokens) {
  auto in_range = [](int s) { return s >= kMinScore && s <= kMaxScore; };
  if (!in_range(a.question_subj_score)) return AnnotationIssue::kScoreRange;
  if (a.answer_subj_score && !in_range(*a.answer_subj_score)) {
    return AnnotationIssue::kScoreRange;
  }
  if (a.answer.span) {
    const ByteSpan& s = *a.answer.span;
    if (s.start >= s.end || s.end > review_text.size() ||
        !is_token_aligned(review_tokens, s.start, s.end)) {
      return AnnotationIssue::kSpanOutOfRange;
    }
    if (!a.answer_subj_score) return AnnotationIssue::kIncomplete;
  } else if (a.answer_subj_score) {
    return AnnotationIssue::kUnexpectedScore;
  }
  return AnnotationIssue::kOk;
}

TaskStream::TaskStream(std::vector<SpanTask> regular,
                       std::vector<SpanTask> gold_pool, std::uint64_t seed,
                       bool inject_gold, std::size_t window)
    : regular_(std::move(regular)),
      gold_pool_(std::move(gold_pool)),
      seed_(seed),
      inject_gold_(inject_gold),
      window_(window) {
  if (window_ < 2) throw Error(ErrorKind::kConfig, "gold window must be >= 2");
  if (inject_gold_ && gold_pool_.empty()) {
    throw Error(ErrorKind::kConfig,
                "gold injection enabled but the gold pool is empty");
  }
  std::set<std::string_view> ids;
  for (const SpanTask& g : gold_pool_) {
    if (!g.is_gold || !g.gold_answer) {
      throw Error(ErrorKind::kConfig,
                  "gold task " + g.task_id + " has no gold answer");
    }
    if (!ids.insert(g.task_id).second) {
      throw Error(ErrorKind::kConfig, "duplicate task id " + g.task_id);
    }
  }
  for (const SpanTask& r : regular_) {
    if (r.is_gold || r.gold_answer) {
      throw Error(ErrorKind::kConfig,
                  "regular task " + r.task_id + " carries a gold answer");
    }
    if (!ids.insert(r.task_id).second) {
      throw Error(ErrorKind::kConfig, "duplicate task id " + r.task_id);
    }
  }
}

std::size_t TaskStream::gold_position(std::size_t worker_index,
                                      std::size_t window) const {
  Rng rng(mix_seed(mix_seed(seed_, worker_index), window));
  return static_cast<std::size_t>(rng.below(window_));
}

StreamSlot TaskStream::slot(std::size_t worker_index, std::size_t k) const {
  if (!inject_gold_) return {};
  const std::size_t w = k / window_;
  if (k % window_ != gold_position(worker_index, w)) return {};
  // Cached per call; pools are small.
  const auto perm = gold_permutation(seed_, worker_index, gold_pool_.size());
  return StreamSlot{true, perm[w % perm.size()]};
}

std::vector<StreamSlot> TaskStream::plan(std::size_t worker_index,
                                         std::size_t regular_available) const {
  std::vector<StreamSlot> out;
  for (std::size_t k = 0;; ++k) {
    StreamSlot s = slot(worker_index, k);
    if (!s.is_gold) {
      if (regular_available == 0) break;
      --regular_available;
    }
    out.push_back(s);
  }
  return out;
}

const SpanTask* TaskStream::find(std::string_view task_id) const {
  for (const auto* pool : {&regular_, &gold_pool_}) {
    for (const SpanTask& t : *pool) {
      if (t.task_id == task_id) return &t;
    }
  }
  return nullptr;
}

void TaskStream::save(const std::filesystem::path& path) const {
  json j = {{"schema", "subjqa.task_stream.v1"},
            {"seed", seed_},
            {"inject_gold", inject_gold_},
            {"window", window_}};
  json reg = json::array(), gold = json::array();
  for (const auto& t : regular_) reg.push_back(json::parse(span_task_to_json(t)));
  for (const auto& t : gold_pool_) gold.push_back(json::parse(span_task_to_json(t)));
  j["regular"] = std::move(reg);
  j["gold"] = std::move(gold);
  write_file(path, j.dump(1) + "\n");
}

TaskStream TaskStream::load(const std::filesystem::path& path) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || j.value("schema", "") != "subjqa.task_stream.v1") {
    throw Error(ErrorKind::kInput, "not a task stream file: " + path.string());
  }
  std::vector<SpanTask> reg, gold;
  for (const auto& t : j.at("regular")) reg.push_back(span_task_from_json(t.dump()));
  for (const auto& t : j.at("gold")) gold.push_back(span_task_from_json(t.dump()));
  return TaskStream(std::move(reg), std::move(gold),
                    j.at("seed").get<std::uint64_t>(),
                    j.at("inject_gold").get<bool>(),
                    j.at("window").get<std::size_t>());
}

TaskStream make_span_tasks(std::vector<SpanTask> questions,
                           std::vector<SpanTask> gold_pool, std::uint64_t seed,
                           bool inject_gold, std::size_t window) {
  return TaskStream(std::move(questions), std::move(gold_pool), seed,
                    inject_gold, window);
}

double span_token_f1(const TokenSequence& tokens, const ByteSpan& a,
                     const ByteSpan& b) {
  const auto ta = tokens_in_span(tokens, a.start, a.end);
  const auto tb = tokens_in_span(tokens, b.start, b.end);
  if (ta.empty() || tb.empty()) return ta.empty() && tb.empty() ? 1.0 : 0.0;
  std::vector<std::size_t> common;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                        std::back_inserter(common));
  return 2.0 * static_cast<double>(common.size()) /
         static_cast<double>(ta.size() + tb.size());
}

bool grade_gold(const Annotation& annotation, const SpanTask& gold,
                const TokenSequence& review_tokens) {
  if (!gold.is_gold || !gold.gold_answer) {
    throw Error(ErrorKind::kIntegrity, "task " + gold.task_id + " is not gold");
  }
  if (annotation.task_id != gold.task_id) {
    throw Error(ErrorKind::kIntegrity, "annotation for " + annotation.task_id +
                                           " graded against " + gold.task_id);
  }
  const Answer& expected = *gold.gold_answer;
  if (!annotation.answer.span || !expected.span) {
    return !annotation.answer.span && !expected.span;
  }
  return span_token_f1(review_tokens, *annotation.answer.span, *expected.span) >=
         kGoldSpanF1;
}

void record_gold(WorkerStatus& status, bool correct, std::size_t min_gold) {
  ++status.gold_seen;
  if (correct) ++status.gold_correct;
  if (status.active && status.gold_seen >= min_gold &&
      100 * status.gold_correct <
          static_cast<std::size_t>(kRequiredAccuracyPercent) * status.gold_seen) {
    status.active = false;
  }
}

WorkerStatus evaluate_worker(const std::vector<bool>& history,
                             std::size_t min_gold, std::string worker_id) {
  WorkerStatus status;
  status.worker_id = std::move(worker_id);
  for (bool correct : history) {
    if (!status.active) break;
    record_gold(status, correct, min_gold);
  }
  return status;
}

std::string annotation_to_json(const Annotation& a) {
  json j = {{"schema", "subjqa.annotation.v1"},
            {"task_id", a.task_id},
            {"worker_id", a.worker_id},
            {"question_subj_score", a.question_subj_score},
            {"answer", answer_to_json(a.answer)}};
  if (a.answer_subj_score) j["answer_subj_score"] = *a.answer_subj_score;
  return j.dump();
}

Annotation annotation_from_json(std::string_view text) {
  const json j = parse_record(text);
  try {
    Annotation a;
    a.task_id = j.at("task_id").get<std::string>();
    a.worker_id = j.value("worker_id", std::string());
    a.question_subj_score = j.at("question_subj_score").get<int>();
    a.answer = answer_from_json(j.at("answer"));
    if (auto it = j.find("answer_subj_score"); it != j.end() && !it->is_null()) {
      a.answer_subj_score = it->get<int>();
    }
    return a;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput, std::string("bad annotation: ") + e.what());
  }
}

std::string span_task_to_json(const SpanTask& t) {
  json j = {{"kind", "span"},
            {"task_id", t.task_id},
            {"question", t.question_text},
            {"review_id", t.review_id},
            {"topic", t.topic_key},
            {"is_gold", t.is_gold}};
  if (t.gold_answer) j["gold_answer"] = answer_to_json(*t.gold_answer);
  return j.dump();
}

SpanTask span_task_from_json(std::string_view text) {
  const json j = parse_record(text);
  try {
    SpanTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.question_text = j.at("question").get<std::string>();
    t.review_id = j.at("review_id").get<std::string>();
    t.topic_key = j.value("topic", std::string());
    t.is_gold = j.value("is_gold", false);
    if (auto it = j.find("gold_answer"); it != j.end() && !it->is_null()) {
      t.gold_answer = answer_from_json(*it);
    }
    if (t.is_gold != t.gold_answer.has_value()) {
      throw Error(ErrorKind::kInput,
                  "span task " + t.task_id +
                      ": gold tasks need a gold answer, others must not");
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput, std::string("bad span task: ") + e.what());
  }
}

std::string question_task_to_json(const QuestionTask& t) {
  json neighbors = json::array();
  for (const auto& n : t.topic.surviving_neighbors) {
    neighbors.push_back({{"key", n.key}, {"weight", n.weight}});
  }
  json j = {{"kind", "question"},
            {"task_id", t.task_id},
            {"topic", t.topic.key},
            {"topic_frequency", t.topic.frequency},
            {"neighbors", std::move(neighbors)},
            {"review_id", t.review_id},
            {"matched_neighbor", t.matched_neighbor},
            {"instructions_version", t.instructions_version}};
  return j.dump();
}

QuestionTask question_task_from_json(std::string_view text) {
  const json j = parse_record(text);
  try {
    QuestionTask t;
    t.task_id = j.at("task_id").get<std::string>();
    t.topic.key = j.at("topic").get<std::string>();
    t.topic.frequency = j.value("topic_frequency", std::size_t{0});
    for (const auto& n : j.value("neighbors", json::array())) {
      t.topic.surviving_neighbors.push_back(
          {n.at("key").get<std::string>(), n.at("weight").get<double>()});
    }
    t.review_id = j.at("review_id").get<std::string>();
    t.matched_neighbor = j.value("matched_neighbor", std::string());
    t.instructions_version = j.value("instructions_version",
                                     std::string(kInstructionsVersion));
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInput, std::string("bad question task: ") + e.what());
  }
}

void save_question_tasks(const std::filesystem::path& path,
                         const std::vector<QuestionTask>& tasks) {
  save_lines(path, tasks, question_task_to_json);
}

std::vector<QuestionTask> load_question_tasks(const std::filesystem::path& path) {
  return load_lines<QuestionTask>(path, question_task_from_json);
}

void save_span_tasks(const std::filesystem::path& path,
                     const std::vector<SpanTask>& tasks) {
  save_lines(path, tasks, span_task_to_json);
}

std::vector<SpanTask> load_span_tasks(const std::filesystem::path& path) {
  return load_lines<SpanTask>(path, span_task_from_json);
}

void save_annotations(const std::filesystem::path& path,
                      const std::vector<Annotation>& annotations) {
  save_lines(path, annotations, annotation_to_json);
}

std::vector<Annotation> load_annotations(const std::filesystem::path& path) {
  return load_lines<Annotation>(path, annotation_from_json);
}

std::vector<WrittenQuestion> load_written_questions(
    const std::filesystem::path& path) {
  return load_lines<WrittenQuestion>(path, [](std::string_view line) {
    const json j = parse_record(line);
    WrittenQuestion q{j.at("task_id").get<std::string>(),
                      trim(j.at("question").get<std::string>())};
    if (q.question.empty()) {
      throw Error(ErrorKind::kInput, "empty question for " + q.task_id);
    }
    return q;
  });
}

}  // namespace subjqa
