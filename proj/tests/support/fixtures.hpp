// Shared fixtures for the unit and acceptance tests.
#ifndef SUBJQA_TESTS_FIXTURES_HPP_
#define SUBJQA_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/factorization.hpp"
#include "subjqa/neighborhood.hpp"
#include "subjqa/annotation.hpp"
#include "subjqa/opinion.hpp"

namespace fixture {

namespace fs = std::filesystem;

inline fs::path dir() { return SUBJQA_TEST_FIXTURES; }
inline fs::path lexicon_dir() { return SUBJQA_TEST_LEXICONS; }

// Scratch directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("subjqa-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline subjqa::Review review(std::string id, std::string item,
                             std::string text,
                             std::string domain = "tripadvisor") {
  return {std::move(id), std::move(item), subjqa::Domain(std::move(domain)),
          std::move(text)};
}

inline const subjqa::Lexicons& lexicons() {
  static const subjqa::Lexicons lex = subjqa::Lexicons::load_dir(lexicon_dir());
  return lex;
}

// Ten reviews over items A, B, C with planted extractions. Hand counts of
// distinct reviews per extraction (total; A, B, C):
//   great|location   4; 2 1 1
//   friendly|staff   4; 2 1 1
//   clean|room       4; 1 1 2
//   no free|wifi     2; 1 1 0
//   no free|parking  1; 0 1 0
inline subjqa::ReviewCollection ten_reviews() {
  return subjqa::ReviewCollection({
      review("r01", "A", "Great location and friendly staff."),
      review("r02", "A", "The room was clean. Great location!"),
      review("r03", "A", "Friendly staff. Truly friendly staff."),
      review("r04", "A", "No free wifi."),
      review("r05", "B", "The room was clean and the staff were friendly."),
      review("r06", "B", "Great location."),
      review("r07", "B", "No free wifi, no free parking."),
      review("r08", "C", "The room was clean."),
      review("r09", "C", "Nothing to report here."),
      review("r10", "C", "Great location, friendly staff, clean room."),
  });
}


// Coordinate matrix from dense rows; zero cells are left out.
inline subjqa::ExtractionMatrix from_dense(
    const std::vector<std::vector<double>>& d) {
  subjqa::ExtractionMatrix m;
  for (std::size_t i = 0; i < d.size(); ++i) m.row_labels.push_back("i" + std::to_string(i));
  for (std::size_t j = 0; j < d[0].size(); ++j) m.col_labels.push_back("e" + std::to_string(j));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d[i].size(); ++j)
      if (d[i][j] > 0) m.entries.push_back({i, j, d[i][j]});
  return m;
}

// Random non-negative counts, roughly a fifth of them zero.
inline std::vector<std::vector<double>> random_counts(std::size_t rows,
                                                      std::size_t cols,
                                                      std::uint64_t seed) {
  subjqa::Rng rng(seed);
  std::vector<std::vector<double>> d(rows, std::vector<double>(cols));
  for (auto& r : d)
    for (auto& v : r) v = rng.uniform() < 0.2 ? 0.0 : 1.0 + double(rng.below(9));
  return d;
}

// Eight-extraction topic fixture. Keys good|a .. good|h with review
// frequencies a 50, b 40, c 30, d 20, e 60, f 10, g 35, h 45 (lower median
// 35). Every extraction neighbors all seven others at weight 0.9, except
// a-h at 0.95 with semantic similarity 0.99, b-f at 0.79 and b-g at 0.5.
// By hand, with 0.8 / 0.975 / 5 / median:
//   a: 6 survivors, 50 > 35, e is more frequent  -> topic
//   b: 5 survivors (f and g cut)                  -> no
//   c, d, f: frequency at or below the median     -> no
//   e: most frequent, no more frequent neighbor   -> no
//   g: frequency equals the median                -> no
//   h: 6 survivors, 45 > 35, e is more frequent  -> topic
struct TopicFixture {
  subjqa::ExtractionVocabulary vocab;
  subjqa::NeighborhoodModel neighbors;
  subjqa::SemanticSimilarity semantic;
  std::vector<std::string> expected;
};

inline TopicFixture topic_fixture() {
  const std::vector<std::pair<char, int>> freq = {
      {'a', 50}, {'b', 40}, {'c', 30}, {'d', 20},
      {'e', 60}, {'f', 10}, {'g', 35}, {'h', 45}};
  auto key = [](char c) { return std::string("good|") + c; };
  TopicFixture f;
  int next_review = 0;
  for (const auto& [c, n] : freq) {
    for (int r = 0; r < n; ++r) {
      f.vocab.add(subjqa::Extraction{"good", std::string(1, c)},
                  review("t" + std::to_string(next_review++), "item", "x"));
    }
  }
  auto pair_is = [](char x, char y, char p, char q) {
    return (x == p && y == q) || (x == q && y == p);
  };
  f.neighbors.k_max = 10;
  for (const auto& [c, n1] : freq) {
    auto& list = f.neighbors.neighbors[key(c)];
    for (const auto& [d, n2] : freq) {
      if (c == d) continue;
      double w = 0.9;
      if (pair_is(c, d, 'a', 'h')) w = 0.95;
      if (pair_is(c, d, 'b', 'f')) w = 0.79;
      if (pair_is(c, d, 'b', 'g')) w = 0.5;
      list.push_back({key(d), w});
    }
    std::sort(list.begin(), list.end(), subjqa::neighbor_before);
  }
  f.semantic = [](std::string_view x, std::string_view y) {
    const bool ah = (x == "good|a" && y == "good|h") || (x == "good|h" && y == "good|a");
    return ah ? 0.99 : 0.5;
  };
  f.expected = {"good|a", "good|h"};
  return f;
}

inline subjqa::SpanTask span_task(std::string id, std::string review_id,
                                  std::string topic = "good|room",
                                  std::string question = "How is the room?") {
  subjqa::SpanTask t;
  t.task_id = std::move(id);
  t.question_text = std::move(question);
  t.review_id = std::move(review_id);
  t.topic_key = std::move(topic);
  return t;
}

inline subjqa::SpanTask gold_task(std::string id, std::string review_id,
                                  subjqa::Answer answer) {
  subjqa::SpanTask t = span_task(std::move(id), std::move(review_id), "gold|task",
                                 "Is the room clean?");
  t.is_gold = true;
  t.gold_answer = answer;
  return t;
}

// Reviews for annotation-service tests. "The room was clean." has tokens
// The(0,3) room(4,8) was(9,12) clean(13,18) .(18,19).
inline subjqa::ReviewCollection service_reviews() {
  return subjqa::ReviewCollection({
      review("s1", "h1", "The room was clean.", "tripadvisor"),
      review("s2", "h1", "The staff were very friendly and helpful.", "tripadvisor"),
      review("s3", "m1", "The plot was thin but the acting was superb.", "movies"),
      review("s4", "m1", "I found the ending predictable.", "movies"),
  });
}

// `n` regular tasks cycling over the service reviews with topics t0, t1, ...
// (one topic per task), plus a gold pool over review s1 whose answer is
// "clean".
inline subjqa::TaskStream service_stream(std::size_t n, std::uint64_t seed,
                                         bool inject = true,
                                         std::size_t gold_count = 3) {
  static const char* kReviews[] = {"s1", "s2", "s3", "s4"};
  std::vector<subjqa::SpanTask> regular, gold;
  for (std::size_t i = 0; i < n; ++i) {
    regular.push_back(span_task("task-" + std::to_string(i), kReviews[i % 4],
                                "good|t" + std::to_string(i)));
  }
  for (std::size_t g = 0; g < gold_count; ++g) {
    gold.push_back(gold_task("gold-" + std::to_string(g), "s1",
                             subjqa::Answer::at(13, 18)));
  }
  return subjqa::TaskStream(std::move(regular), std::move(gold), seed, inject, 5);
}

}  // namespace fixture

#endif  // SUBJQA_TESTS_FIXTURES_HPP_
