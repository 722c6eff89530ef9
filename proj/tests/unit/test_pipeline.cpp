#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "subjqa/annotation.hpp"
#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/neighborhood.hpp"
#include "subjqa/pipeline.hpp"
#include "subjqa/store.hpp"

using namespace subjqa;
using nlohmann::json;

namespace {

// Items x reviews of short copular sentences; word weights are skewed so
// extraction frequencies spread out.
void write_corpus(const std::filesystem::path& path) {
  const std::vector<std::string> nouns = {"room", "staff", "bed", "pool", "view",
                                          "breakfast", "bar", "lobby"};
  const std::vector<std::string> adjs = {"clean", "friendly", "quiet", "nice",
                                         "comfortable", "noisy"};
  Rng rng(21);
  std::string out;
  for (int item = 0; item < 8; ++item) {
    for (int r = 0; r < 10; ++r) {
      std::string text;
      for (int s = 0; s < 3; ++s) {
        // squaring skews towards the front of each list
        const double u = rng.uniform(), v = rng.uniform();
        const auto& n = nouns[static_cast<std::size_t>(u * u * nouns.size())];
        const auto& a = adjs[static_cast<std::size_t>(v * v * adjs.size())];
        text += (s ? " " : "") + std::string("The ") + n + " was " + a + ".";
      }
      out += json({{"review_id", "r" + std::to_string(item) + "-" + std::to_string(r)},
                   {"item_id", "h" + std::to_string(item)},
                   {"domain", "tripadvisor"},
                   {"text", text}})
                 .dump() +
             "\n";
    }
  }
  write_file(path, out);
}

std::size_t first_word_end(const std::string& text) { return text.find(' '); }

PipelineConfig e2e_config(const fixture::TempDir& in) {
  PipelineConfig c;
  c.set("seed", "3");
  c.set("reviews", (in / "reviews.jsonl").string());
  c.set("min_item_reviews", "0");
  c.set("min_extraction_reviews", "0");
  c.set("k", "3");
  c.set("nmf_max_iters", "200");
  c.set("k_max", "4");
  c.set("cos_min", "-1");
  c.set("sem_max", "1");
  c.set("min_neighbors", "1");
  c.set("max_pairs_per_topic", "4");
  c.set("gold_tasks", (in / "gold.jsonl").string());
  c.set("responses", (in / "responses.jsonl").string());
  c.set("subj_threshold", "4");
  c.set("mtl_emb_dim", "4");
  c.set("mtl_hidden", "3");
  c.set("mtl_proj", "4");
  c.set("mtl_subj_hidden", "2");
  c.set("mtl_epochs", "1");
  return c;
}

std::map<std::string, std::string> manifests(const std::filesystem::path& out) {
  std::map<std::string, std::string> m;
  for (const auto& e : std::filesystem::directory_iterator(out / "manifests")) {
    m[e.path().filename().string()] = read_file(e.path());
  }
  return m;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config parsing and validation") {
  auto c = PipelineConfig::parse("# c\nk = 7\n\nseed=2\n");
  CHECK(c.count("k") == 7);
  CHECK(c.integer("seed") == 2);
  CHECK(c.is_set("k"));
  CHECK_FALSE(c.is_set("k_max"));
  CHECK(c.count("max_pairs_per_topic") == 10);
  CHECK(c.str("subj_threshold").empty());
  c.validate();

  auto expect_config_error = [](auto&& f) {
    try {
      f();
      FAIL("accepted");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kConfig);
    }
  };
  expect_config_error([] { PipelineConfig::parse("nope = 1\n"); });
  expect_config_error([] { PipelineConfig::parse("k 3\n"); });
  expect_config_error([&] { c.set("typo_key", "1"); });
  for (const auto& [k, v] : std::vector<std::pair<std::string, std::string>>{
           {"k", "0"}, {"k", "x"}, {"cos_min", "2"}, {"split_train", "0.9"},
           {"subj_threshold", "6"}, {"serve_phase", "both"}, {"mtl_lr", "0"},
           {"inject_gold", "maybe"}, {"min_gold", "-1"}}) {
    CAPTURE(k);
    auto bad = PipelineConfig();
    bad.set(k, v);
    expect_config_error([&] { bad.validate(); });
  }
  auto d = PipelineConfig();
  const auto h = d.hash();
  d.set("k", "20");
  CHECK(d.hash() == h);  // same values, same hash
  d.set("k", "21");
  CHECK(d.hash() != h);
}

TEST_CASE("a stage without its upstream artifacts names the missing stage") {
  fixture::TempDir out("pl");
  PipelineConfig c;
  c.set("subj_threshold", "4");
  const std::vector<std::pair<std::string, std::string>> cases = {
      {"analyze", "assemble"}, {"extract", "ingest"}, {"factorize", "extract"},
      {"neighborhood", "factorize"}, {"train", "assemble"}, {"evaluate", "train"}};
  for (const auto& [stage, upstream] : cases) {
    CAPTURE(stage);
    try {
      run_stage(stage, c, out.path());
      FAIL("ran");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMissingStage);
      CHECK(std::string(e.what()).find("'" + upstream + "'") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(run_stage("bogus", c, out.path()), Error);
}

TEST_CASE("end to end on a synthetic corpus, rerun is identical") {
  fixture::TempDir in("pl-in"), out("pl-out");
  write_corpus(in / "reviews.jsonl");
  PipelineConfig c = e2e_config(in);

  // gold tasks on known reviews, answered with their first word
  const auto corpus = load_reviews(in / "reviews.jsonl", Domain("other"));
  std::vector<SpanTask> gold;
  for (int g = 0; g < 3; ++g) {
    const auto& r = corpus.reviews()[static_cast<std::size_t>(g * 7)];
    SpanTask t;
    t.task_id = "gold-" + std::to_string(g);
    t.question_text = "Is it clean?";
    t.review_id = r.review_id;
    t.topic_key = "gold|task";
    t.is_gold = true;
    t.gold_answer = Answer::at(0, first_word_end(r.text));
    gold.push_back(t);
  }
  save_span_tasks(in / "gold.jsonl", gold);

  for (const char* s : {"ingest", "extract", "factorize", "neighborhood", "topics",
                        "pair", "tasks"}) {
    run_stage(s, c, out.path());
  }
  CHECK_FALSE(std::filesystem::exists(out / "task_stream.json"));

  // one written question per question task
  const auto qtasks = load_question_tasks(out / "question_tasks.jsonl");
  std::set<std::string> topics;
  for (const auto& q : qtasks) {
    topics.insert(q.topic.key);
    CHECK(q.task_id == question_task_id(q.topic.key, q.review_id));
  }
  REQUIRE(topics.size() >= 3);
  std::string qs;
  for (const auto& q : qtasks) {
    qs += json({{"task_id", q.task_id},
                {"question", "How is the " + extraction_words(q.topic.key).back() + "?"}})
              .dump() +
          "\n";
  }
  write_file(in / "questions.jsonl", qs);
  c.set("questions", (in / "questions.jsonl").string());
  run_stage("tasks", c, out.path());
  const auto stream = TaskStream::load(out / "task_stream.json");
  CHECK(stream.regular().size() == qtasks.size());

  // a single careful worker answers everything
  std::string resp;
  auto answer = [&](const SpanTask& t, bool answerable) {
    Annotation a;
    a.task_id = t.task_id;
    a.worker_id = "w1";
    a.question_subj_score = 4;
    if (t.gold_answer) {
      a.answer = *t.gold_answer;
    } else if (answerable) {
      a.answer = Answer::at(0, first_word_end(corpus.at(t.review_id).text));
    }
    if (a.answer.span) a.answer_subj_score = 2;
    resp += annotation_to_json(a) + "\n";
  };
  for (std::size_t i = 0; i < stream.regular().size(); ++i) answer(stream.regular()[i], i % 3 != 0);
  for (const auto& t : stream.gold_pool()) answer(t, true);
  write_file(in / "responses.jsonl", resp);

  for (const char* s : {"serve", "assemble", "analyze", "train", "evaluate"}) {
    run_stage(s, c, out.path());
  }
  const auto first = manifests(out.path());
  CHECK(first.size() == 12);
  const auto m = json::parse(read_file(out / "dataset/manifest.json"));
  CHECK(m.at("counts").at("tripadvisor").at("total") == stream.regular().size());
  CHECK(std::filesystem::exists(out / "analysis/stats.tsv"));
  CHECK(std::filesystem::exists(out / "metrics_test.tsv"));
  const auto stage_m = json::parse(first.at("assemble.json"));
  CHECK(stage_m.at("config_hash") == c.hash());
  CHECK(stage_m.at("outputs").contains("dataset/manifest.json"));

  // early stages ran before 'questions' was set; rerun all with the final
  // config, then once more
  for (const auto& s : pipeline_stages()) run_stage(s, c, out.path());
  const auto once = manifests(out.path());
  CHECK(once.at("evaluate.json") == first.at("evaluate.json"));
  for (const auto& s : pipeline_stages()) run_stage(s, c, out.path());
  const auto second = manifests(out.path());
  REQUIRE(second.size() == once.size());
  for (const auto& [name, text] : once) {
    CAPTURE(name);
    CHECK(second.at(name) == text);
  }
}

}
