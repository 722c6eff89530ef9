#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/dataset.hpp"
#include "subjqa/text_table.hpp"

using namespace subjqa;

namespace {

StoredAnnotation stored(const std::string& task, const std::string& worker,
                        std::optional<ByteSpan> span, bool ignored = false) {
  StoredAnnotation sa;
  sa.annotation.task_id = task;
  sa.annotation.worker_id = worker;
  sa.annotation.question_subj_score = 4;
  if (span) {
    sa.annotation.answer = Answer{span};
    sa.annotation.answer_subj_score = 5;
  }
  sa.ignored = ignored;
  return sa;
}

AnnotatedExample example(const std::string& topic, const std::string& domain = "books") {
  AnnotatedExample ex;
  ex.domain = domain;
  ex.topic_key = topic;
  ex.question_text = "How is " + topic + "?";
  ex.review_id = "r-" + topic;
  ex.review_text = "It is fine.";
  ex.question_subj_score = 3;
  return ex;
}

std::vector<std::string> topics(std::size_t n) {
  std::vector<std::string> t;
  for (std::size_t i = 0; i < n; ++i) t.push_back("topic" + std::to_string(i));
  return t;
}

std::array<std::size_t, 3> counts(const SplitAssignment& a) {
  std::array<std::size_t, 3> c{};
  for (const auto& [k, s] : a) ++c[static_cast<int>(s)];
  return c;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("assemble: only a deactivated worker's work gives no examples") {
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(4, 1, false);
  const std::vector<StoredAnnotation> anns = {stored("task-0", "bad", ByteSpan{13, 18}, true),
                                              stored("task-1", "bad", std::nullopt, true)};
  CHECK(assemble(anns, stream, reviews).empty());
}

TEST_CASE("assemble: one valid annotation") {
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(4, 1, false);
  const auto ex = assemble({stored("task-0", "w", ByteSpan{13, 18})}, stream, reviews);
  REQUIRE(ex.size() == 1);
  REQUIRE(ex[0].answer);
  CHECK(ex[0].answer->surface == "clean");
  CHECK(ex[0].review_text.substr(13, 5) == "clean");
  CHECK(ex[0].domain == "tripadvisor");
  CHECK(ex[0].topic_key == "good|t0");
  CHECK(ex[0].question_text == "How is the room?");
  CHECK(ex[0].answer_subj_score == 5);
}

TEST_CASE("assemble: 12 annotations, 2 from a kicked worker, gives 10") {
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(12, 1, false);
  std::vector<StoredAnnotation> anns;
  for (int i = 0; i < 12; ++i) {
    const bool kicked = i == 3 || i == 7;
    anns.push_back(stored("task-" + std::to_string(i), kicked ? "bad" : "good",
                          i % 2 ? std::nullopt : std::optional<ByteSpan>(ByteSpan{0, 3}),
                          kicked));
  }
  CHECK(assemble(anns, stream, reviews).size() == 10);
}

TEST_CASE("assemble: gold annotations are not examples") {
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(2, 1);
  auto g = stored("gold-0", "w", ByteSpan{13, 18});
  g.is_gold = true;
  CHECK(assemble({g, stored("task-0", "w", std::nullopt)}, stream, reviews).size() == 1);
}

TEST_CASE("assemble: corrupted span is an integrity error") {
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(2, 1, false);
  for (ByteSpan bad : {ByteSpan{13, 40}, ByteSpan{14, 18}, ByteSpan{5, 5}}) {
    try {
      assemble({stored("task-0", "w", bad)}, stream, reviews);
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kIntegrity);
    }
  }
  auto noscore = stored("task-0", "w", ByteSpan{13, 18});
  noscore.annotation.answer_subj_score.reset();
  CHECK_THROWS_AS(assemble({noscore}, stream, reviews), Error);
}

TEST_CASE("assemble from a live store") {
  fixture::TempDir tmp("ds");
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(3, 1, false);
  AnnotationStore store(stream, reviews, tmp / "log");
  for (int i = 0; i < 2; ++i) {
    const auto t = store.next_task("w");
    Annotation a;
    a.task_id = t.task->task_id;
    a.question_subj_score = 2;
    store.submit_annotation("w", a);
  }
  CHECK(assemble(store, stream, reviews).size() == 2);
}

TEST_CASE("split: 10 topics give 8/1/1") {
  CHECK(counts(split_topics(topics(10), {}, 1)) == std::array<std::size_t, 3>{8, 1, 1});
}

TEST_CASE("split: 7 topics give 5/1/1") {
  // floor(5.6) = 5, floor(6.3) - 5 = 1, rest 1
  CHECK(counts(split_topics(topics(7), {}, 1)) == std::array<std::size_t, 3>{5, 1, 1});
}

TEST_CASE("split: 30 topics with exact fractions") {
  // 0.8 * 30 is 24.000000000000004 in binary, 0.9 * 30 is 27
  CHECK(counts(split_topics(topics(30), {}, 5)) == std::array<std::size_t, 3>{24, 3, 3});
}

TEST_CASE("split: same seed, same assignment; other seeds differ") {
  CHECK(split_topics(topics(20), {}, 9) == split_topics(topics(20), {}, 9));
  CHECK(split_topics(topics(20), {}, 9) != split_topics(topics(20), {}, 10));
  // input order does not matter
  auto rev = topics(20);
  std::reverse(rev.begin(), rev.end());
  CHECK(split_topics(rev, {}, 9) == split_topics(topics(20), {}, 9));
}

TEST_CASE("split: refusals") {
  CHECK_THROWS_AS(split_topics(topics(2), {}, 1), Error);
  CHECK_THROWS_AS(split_topics({"a", "a", "b"}, {}, 1), Error);
  CHECK_THROWS_AS(split_topics(topics(10), {0.5, 0.2, 0.2}, 1), Error);
}

TEST_CASE("split_by_topic keeps topics whole") {
  std::vector<AnnotatedExample> ex;
  for (int i = 0; i < 40; ++i) ex.push_back(example("t" + std::to_string(i % 10)));
  const auto r = split_by_topic(ex, {}, 3);
  std::size_t total = 0;
  std::map<std::string, std::set<int>> seen;
  for (int s = 0; s < 3; ++s) {
    for (const auto& e : r.parts[s]) {
      CHECK(static_cast<int>(e.split) == s);
      CHECK(r.assignment.at(e.topic_key) == e.split);
      seen[e.topic_key].insert(s);
    }
    total += r.parts[s].size();
  }
  CHECK(total == 40);
  for (const auto& [t, s] : seen) CHECK(s.size() == 1);
  CHECK(r.parts[0].size() == 32);
}

TEST_CASE("export: no examples gives header-only files and zero counts") {
  fixture::TempDir tmp("ds");
  SplitResult empty;
  ExportOptions o;
  o.domains = {"books", "movies"};
  const auto files = export_dataset(empty, tmp.path(), o);
  CHECK(files.size() == 7);
  CHECK(read_file(tmp / "dev-books.tsv") == tsv_line(export_columns()));
  const auto m = nlohmann::json::parse(read_file(tmp / "manifest.json"));
  CHECK(m.at("counts").at("movies").at("total") == 0);
  CHECK(load_exported(tmp.path()).empty());
}

TEST_CASE("export: row counts, reload, byte-identical re-export") {
  fixture::TempDir a("ds"), b("ds");
  std::vector<AnnotatedExample> ex;
  for (int i = 0; i < 30; ++i) {
    auto e = example("t" + std::to_string(i % 6), i % 3 ? "books" : "movies");
    e.review_id = "r" + std::to_string(i);
    e.review_text = "The plot\twas thin.\nReally.";
    if (i % 2) {
      e.answer = AnswerSpan{4, 8, "plot"};
      e.answer_subj_score = 1 + i % 5;
    }
    ex.push_back(e);
  }
  const auto split = split_by_topic(ex, {}, 4);
  ExportOptions o;
  o.seed = 4;
  o.config_hash = "abc";
  export_dataset(split, a.path(), o);
  export_dataset(split, b.path(), o);
  for (const auto& f : std::filesystem::directory_iterator(a.path())) {
    CHECK(read_file(f.path()) == read_file(b / f.path().filename().string()));
  }
  const auto m = nlohmann::json::parse(read_file(a / "manifest.json"));
  std::size_t rows = 0;
  for (const auto& f : m.at("files")) {
    rows += f.at("rows").get<std::size_t>();
    CHECK(f.at("sha256") == sha256_hex(read_file(a / f.at("name").get<std::string>())));
  }
  CHECK(rows == 30);
  CHECK(m.at("config_hash") == "abc");
  auto back = load_exported(a.path());
  REQUIRE(back.size() == 30);
  std::vector<AnnotatedExample> want;
  for (const auto& part : split.parts) want.insert(want.end(), part.begin(), part.end());
  std::sort(back.begin(), back.end());
  std::sort(want.begin(), want.end());
  CHECK(back == want);
}

TEST_CASE("export: a tampered answer is caught on load") {
  fixture::TempDir tmp("ds");
  auto e = example("t0");
  e.review_text = "Good plot.";
  e.answer = AnswerSpan{5, 9, "plot"};
  e.answer_subj_score = 4;
  SplitResult r;
  r.parts[0].push_back(e);
  export_dataset(r, tmp.path(), {});
  std::string t = read_file(tmp / "train-books.tsv");
  t.replace(t.rfind("plot\ttrue"), 4, "plod");
  write_file(tmp / "train-books.tsv", t);
  CHECK_THROWS_AS(load_exported_table(tmp / "train-books.tsv"), Error);
}

}
