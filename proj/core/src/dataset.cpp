#include "subjqa/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

constexpr double kCutSlack = 1e-9;

std::string opt_int(const std::optional<int>& v) {
  return v ? std::to_string(*v) : std::string();
}

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw Error(ErrorKind::kInput, "unknown split '" + std::string(s) + "'");
}

std::vector<AnnotatedExample> assemble(
    const std::vector<StoredAnnotation>& annotations, const TaskStream& tasks,
    const ReviewCollection& reviews) {
  std::vector<AnnotatedExample> out;
  for (const StoredAnnotation& sa : annotations) {
    if (sa.ignored || sa.is_gold) continue;
    const Annotation& a = sa.annotation;
    const SpanTask* task = tasks.find(a.task_id);
    if (!task) {
      throw Error(ErrorKind::kIntegrity, "annotation for unknown task " + a.task_id);
    }
    if (task->is_gold) continue;
    const Review& review = reviews.at(task->review_id);
    AnnotatedExample ex;
    ex.domain = review.domain.label();
    ex.question_text = task->question_text;
    ex.topic_key = task->topic_key;
    ex.review_id = review.review_id;
    ex.review_text = review.text;
    ex.question_subj_score = a.question_subj_score;
    ex.answer_subj_score = a.answer_subj_score;
    if (a.answer.span) {
      const ByteSpan& s = *a.answer.span;
      if (s.start >= s.end || s.end > review.text.size() ||
          !is_token_aligned(tokenize(review.text), s.start, s.end)) {
        throw Error(ErrorKind::kIntegrity,
                    "stored span [" + std::to_string(s.start) + "," +
                        std::to_string(s.end) + ") does not fit review " +
                        review.review_id);
      }
      ex.answer = AnswerSpan{s.start, s.end,
                             review.text.substr(s.start, s.end - s.start)};
    }
    if (ex.answer.has_value() != ex.answer_subj_score.has_value()) {
      throw Error(ErrorKind::kIntegrity,
                  "answer score presence disagrees with answerability for " +
                      a.task_id);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<AnnotatedExample> assemble(const AnnotationStore& store,
                                       const TaskStream& tasks,
                                       const ReviewCollection& reviews) {
  return assemble(store.annotations(), tasks, reviews);
}

SplitAssignment split_topics(std::vector<std::string> topics,
                             const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.dev < 0 || f.test < 0 ||
      std::abs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::kParameter, "split fractions must sum to 1");
  }
  std::sort(topics.begin(), topics.end());
  topics.erase(std::unique(topics.begin(), topics.end()), topics.end());
  const std::size_t n = topics.size();
  if (n < 3) {
    throw Error(ErrorKind::kParameter,
                "need at least 3 topics to split, got " + std::to_string(n));
  }
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(topics[i - 1], topics[rng.below(i)]);
  }
  const auto cut1 = static_cast<std::size_t>(
      std::floor(f.train * static_cast<double>(n) + kCutSlack));
  const auto cut2 = std::max(
      cut1, static_cast<std::size_t>(std::floor(
                (f.train + f.dev) * static_cast<double>(n) + kCutSlack)));
  SplitAssignment out;
  for (std::size_t i = 0; i < n; ++i) {
    out[topics[i]] = i < cut1 ? Split::kTrain
                              : (i < std::min(cut2, n) ? Split::kDev
                                                       : Split::kTest);
  }
  return out;
}

SplitResult split_by_topic(const std::vector<AnnotatedExample>& examples,
                           const SplitFractions& fractions,
                           std::uint64_t seed) {
  std::vector<std::string> topics;
  for (const auto& ex : examples) topics.push_back(ex.topic_key);
  SplitResult r;
  r.assignment = split_topics(std::move(topics), fractions, seed);
  for (AnnotatedExample ex : examples) {
    ex.split = r.assignment.at(ex.topic_key);
    r.parts[static_cast<int>(ex.split)].push_back(std::move(ex));
  }
  return r;
}

const std::vector<std::string>& export_columns() {
  static const std::vector<std::string> kColumns = {
      "domain",          "question",        "question_subj_level",
      "review_id",       "review",          "answer_start_byte",
      "answer_end_byte", "answer_text",     "is_answerable",
      "answer_subj_level", "topic",         "split"};
  return kColumns;
}

std::vector<std::filesystem::path> export_dataset(
    const SplitResult& split, const std::filesystem::path& out_dir,
    const ExportOptions& options) {
  std::set<std::string> domains = options.domains;
  for (const auto& part : split.parts) {
    for (const auto& ex : part) domains.insert(ex.domain);
  }
  std::vector<std::filesystem::path> written;
  json counts = json::object();
  json files = json::array();
  for (const std::string& domain : domains) {
    counts[domain] = {{"train", 0}, {"dev", 0}, {"test", 0}, {"total", 0}};
  }
  for (Split s : kSplits) {
    for (const std::string& domain : domains) {
      std::string contents = tsv_line(export_columns());
      std::size_t rows = 0;
      for (const auto& ex : split.parts[static_cast<int>(s)]) {
        if (ex.domain != domain) continue;
        contents += tsv_line({
            ex.domain,
            ex.question_text,
            std::to_string(ex.question_subj_score),
            ex.review_id,
            ex.review_text,
            ex.answer ? std::to_string(ex.answer->byte_start) : "",
            ex.answer ? std::to_string(ex.answer->byte_end) : "",
            ex.answer ? ex.answer->surface : "",
            ex.answer ? "true" : "false",
            opt_int(ex.answer_subj_score),
            ex.topic_key,
            std::string(to_string(s)),
        });
        ++rows;
      }
      const std::string name =
          std::string(to_string(s)) + "-" + domain + ".tsv";
      write_file(out_dir / name, contents);
      written.push_back(out_dir / name);
      counts[domain][std::string(to_string(s))] = rows;
      counts[domain]["total"] = counts[domain]["total"].get<std::size_t>() + rows;
      files.push_back(
          {{"name", name}, {"rows", rows}, {"sha256", sha256_hex(contents)}});
    }
  }
  json topics = json::object();
  for (Split s : kSplits) topics[std::string(to_string(s))] = json::array();
  for (const auto& [topic, s] : split.assignment) {
    topics[std::string(to_string(s))].push_back(topic);
  }
  json manifest = {{"schema", "subjqa.dataset.v1"},
                   {"seed", options.seed},
                   {"config_hash", options.config_hash},
                   {"columns", export_columns()},
                   {"counts", std::move(counts)},
                   {"topics", std::move(topics)},
                   {"files", std::move(files)}};
  write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  written.push_back(out_dir / "manifest.json");
  return written;
}

std::vector<AnnotatedExample> load_exported_table(
    const std::filesystem::path& path) {
  const auto rows = parse_tsv(read_file(path));
  if (rows.empty() || rows.front() != export_columns()) {
    throw Error(ErrorKind::kInput, "unexpected header in " + path.string());
  }
  std::vector<AnnotatedExample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (r.size() != export_columns().size()) {
      throw Error(ErrorKind::kInput, path.string() + ": row " +
                                         std::to_string(i) + " has " +
                                         std::to_string(r.size()) + " cells");
    }
    AnnotatedExample ex;
    ex.domain = r[0];
    ex.question_text = r[1];
    ex.question_subj_score = std::stoi(r[2]);
    ex.review_id = r[3];
    ex.review_text = r[4];
    if (r[8] == "true") {
      ex.answer = AnswerSpan{std::stoull(r[5]), std::stoull(r[6]), r[7]};
      if (ex.answer->byte_end > ex.review_text.size() ||
          ex.review_text.compare(ex.answer->byte_start,
                                 ex.answer->byte_end - ex.answer->byte_start,
                                 ex.answer->surface) != 0) {
        throw Error(ErrorKind::kIntegrity,
                    path.string() + ": answer text does not match the review");
      }
    }
    if (!r[9].empty()) ex.answer_subj_score = std::stoi(r[9]);
    ex.topic_key = r[10];
    ex.split = parse_split(r[11]);
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<AnnotatedExample> load_exported(const std::filesystem::path& dir) {
  const json manifest = json::parse(read_file(dir / "manifest.json"));
  std::vector<AnnotatedExample> out;
  for (const auto& f : manifest.at("files")) {
    auto part = load_exported_table(dir / f.at("name").get<std::string>());
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

}  // namespace subjqa
