#include <algorithm>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "subjqa/common.hpp"
#include "subjqa/neighborhood.hpp"

using namespace subjqa;

namespace {

FactorModel model_from(const oracle::Mat& rows) {
  FactorModel f;
  f.extraction_embeddings.resize(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    f.extraction_labels.push_back("op|x" + std::to_string(i));
    for (std::size_t k = 0; k < rows[i].size(); ++k) f.extraction_embeddings(i, k) = rows[i][k];
  }
  f.item_embeddings = Eigen::MatrixXd::Ones(1, rows[0].size());
  f.item_labels = {"item"};
  return f;
}

NeighborhoodModel one(const std::string& key, std::vector<Neighbor> list) {
  NeighborhoodModel n;
  n.neighbors[key] = std::move(list);
  return n;
}

SemanticSimilarity constant(double v) {
  return [v](std::string_view, std::string_view) { return v; };
}

}  // namespace

TEST_SUITE("neighborhood") {

TEST_CASE("identical rows are mutual neighbors with weight 1") {
  const auto n = build_neighborhood(model_from({{1, 2, 3}, {1, 2, 3}}), 10);
  REQUIRE(n.neighbors.at("op|x0").size() == 1);
  CHECK(n.neighbors.at("op|x0")[0].key == "op|x1");
  CHECK(n.neighbors.at("op|x0")[0].weight == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(n.neighbors.at("op|x1")[0].key == "op|x0");
}

TEST_CASE("orthogonal rows have weight 0") {
  const auto n = build_neighborhood(model_from({{1, 0}, {0, 2}}), 10);
  CHECK(n.neighbors.at("op|x0")[0].weight == 0.0);
}

TEST_CASE("zero rows have no neighbors and are nobody's neighbor") {
  const auto n = build_neighborhood(model_from({{1, 0}, {0, 0}, {1, 1}}), 10);
  CHECK(n.neighbors.at("op|x1").empty());
  REQUIRE(n.neighbors.at("op|x0").size() == 1);
  CHECK(n.neighbors.at("op|x0")[0].key == "op|x2");
}

TEST_CASE("12-extraction model equals the brute-force oracle") {
  Rng rng(5);
  oracle::Mat rows(12, std::vector<double>(4));
  for (auto& r : rows)
    for (auto& v : r) v = rng.uniform();
  const auto f = model_from(rows);
  const auto n = build_neighborhood(f, 10);
  const auto want = oracle::brute_force_neighbors(f.extraction_labels, rows, 10);
  REQUIRE(n.neighbors.size() == want.size());
  for (const auto& [key, list] : want) {
    const auto& got = n.neighbors.at(key);
    REQUIRE(got.size() == list.size());
    for (std::size_t r = 0; r < list.size(); ++r) {
      CHECK(got[r].key == list[r].first);
      CHECK(got[r].weight == list[r].second);
    }
  }
}

TEST_CASE("ties order by key") {
  const auto n = build_neighborhood(model_from({{1, 0}, {1, 0}, {1, 0}}), 10);
  const auto& l = n.neighbors.at("op|x1");
  REQUIRE(l.size() == 2);
  CHECK(l[0].key == "op|x0");
  CHECK(l[1].key == "op|x2");
}

TEST_CASE("neighborhood save and load") {
  fixture::TempDir tmp("nb");
  const auto n = build_neighborhood(model_from({{1, 2}, {2, 1}, {0, 0}, {3, 3}}), 2);
  n.save(tmp / "n.tsv");
  const auto back = NeighborhoodModel::load(tmp / "n.tsv");
  CHECK(back.k_max == 2);
  CHECK(back.neighbors == n.neighbors);
}

TEST_CASE("pruning gates") {
  SUBCASE("weight 0.79 is removed") {
    const auto p = prune_neighbors(one("a|b", {{"c|d", 0.79}}), constant(0.5));
    CHECK(p.neighbors.at("a|b").empty());
  }
  SUBCASE("semantic similarity 0.99 is removed") {
    const auto p = prune_neighbors(one("a|b", {{"c|d", 0.9}}), constant(0.99));
    CHECK(p.neighbors.at("a|b").empty());
  }
  SUBCASE("0.9 and 0.5 is kept") {
    const auto p = prune_neighbors(one("a|b", {{"c|d", 0.9}}), constant(0.5));
    CHECK(p.neighbors.at("a|b").size() == 1);
  }
  SUBCASE("boundaries are inclusive") {
    const auto p = prune_neighbors(one("a|b", {{"c|d", 0.8}}), constant(0.975));
    CHECK(p.neighbors.at("a|b").size() == 1);
  }
}

TEST_CASE("extraction words and jaccard") {
  CHECK(extraction_words("No free|WiFi") == std::vector<std::string>{"no", "free", "wifi"});
  CHECK(jaccard_similarity("no free|wifi", "free|wifi") == doctest::Approx(2.0 / 3.0));
  CHECK(jaccard_similarity("good|food", "good|food") == 1.0);
  CHECK(jaccard_similarity("good|food", "bad|room") == 0.0);
}

TEST_CASE("word vectors") {
  fixture::TempDir tmp("nb");
  write_file(tmp / "v.txt", "3 2\ngood 1 0\ngreat 0.9 0.1\nroom 0 1\n");
  const auto wv = WordVectors::load(tmp / "v.txt");
  CHECK(wv.dim() == 2);
  CHECK(wv.similarity("good|room", "good|room") == doctest::Approx(1.0));
  CHECK(wv.similarity("good|room", "great|room") > 0.9);
  CHECK(wv.similarity("good|room", "great|room") < 1.0);
  // no known word on one side: falls back to jaccard
  CHECK(wv.similarity("zzz|yyy", "good|room") == 0.0);
  const auto sim = make_semantic_similarity(&wv);
  CHECK(sim("good|room", "great|room") == wv.similarity("good|room", "great|room"));
  CHECK(make_semantic_similarity(nullptr)("a|b", "a|b") == 1.0);
  WordVectors bad;
  bad.add("x", {1, 2});
  CHECK_THROWS_AS(bad.add("y", {1}), Error);
}

TEST_CASE("topic selection: exactly five neighbors is rejected") {
  auto f = fixture::topic_fixture();
  const auto pruned = prune_neighbors(f.neighbors, f.semantic);
  CHECK(pruned.neighbors.at("good|b").size() == 5);
  const auto topics = select_topics(pruned, f.vocab, 5);
  for (const auto& t : topics) CHECK(t.key != "good|b");
}

TEST_CASE("topic selection: frequency at the median is rejected") {
  auto f = fixture::topic_fixture();
  CHECK(lower_median_frequency(f.vocab) == 35);
  const auto pruned = prune_neighbors(f.neighbors, f.semantic);
  CHECK(pruned.neighbors.at("good|g").size() == 6);
  for (const auto& t : select_topics(pruned, f.vocab, 5)) CHECK(t.key != "good|g");
}

TEST_CASE("topic selection: eight-extraction fixture") {
  auto f = fixture::topic_fixture();
  const auto topics = select_topics(prune_neighbors(f.neighbors, f.semantic), f.vocab, 5);
  std::vector<std::string> keys;
  for (const auto& t : topics) keys.push_back(t.key);
  CHECK(keys == f.expected);
  CHECK(topics[0].frequency == 50);
  CHECK(topics[0].surviving_neighbors.size() == 6);
}

TEST_CASE("topics save and load") {
  fixture::TempDir tmp("nb");
  auto f = fixture::topic_fixture();
  const auto topics = select_topics(prune_neighbors(f.neighbors, f.semantic), f.vocab, 5);
  save_topics(tmp / "t.tsv", topics);
  const auto back = load_topics(tmp / "t.tsv");
  REQUIRE(back.size() == topics.size());
  CHECK(back[1].key == topics[1].key);
  CHECK(back[1].frequency == topics[1].frequency);
  CHECK(back[1].surviving_neighbors == topics[1].surviving_neighbors);
}

TEST_CASE("pair_reviews") {
  const ReviewCollection c({
      fixture::review("x1", "i", "The room was clean."),
      fixture::review("x2", "i", "The room was clean."),
      fixture::review("x3", "j", "The room was clean."),
      fixture::review("x4", "j", "Friendly staff."),
      fixture::review("x5", "j", "Nothing here."),
  });
  const auto vocab = aggregate_extractions(c, fixture::lexicons());

  SUBCASE("neighbor in exactly 3 reviews gives 3 pairs") {
    const Topic t{"great|location", {{"clean|room", 0.9}}, 4};
    const auto p = pair_reviews(t, c, vocab, 10);
    REQUIRE(p.size() == 3);
    CHECK(p[0].review_id == "x1");
    CHECK(p[2].review_id == "x3");
    CHECK(p[0].matched_neighbor == "clean|room");
  }
  SUBCASE("neighbors in no review give nothing") {
    const Topic t{"great|location", {{"quiet|street", 0.9}}, 4};
    CHECK(pair_reviews(t, c, vocab, 10).empty());
  }
  SUBCASE("max_pairs = 1 keeps the higher-weight neighbor") {
    const Topic t{"great|location", {{"clean|room", 0.85}, {"friendly|staff", 0.95}}, 4};
    const auto p = pair_reviews(t, c, vocab, 1);
    REQUIRE(p.size() == 1);
    CHECK(p[0].review_id == "x4");
    CHECK(p[0].matched_neighbor == "friendly|staff");
    CHECK(p[0].neighbor_weight == 0.95);
  }
  SUBCASE("pairs save and load") {
    fixture::TempDir tmp("nb");
    const Topic t{"great|location", {{"clean|room", 0.9}}, 4};
    const auto p = pair_reviews(t, c, vocab, 10);
    save_pairs(tmp / "p.jsonl", p);
    const auto back = load_pairs(tmp / "p.jsonl", {t});
    REQUIRE(back.size() == 3);
    CHECK(back[1].review_id == p[1].review_id);
    CHECK(back[1].topic.key == "great|location");
    CHECK(back[1].neighbor_weight == 0.9);
  }
}

}
