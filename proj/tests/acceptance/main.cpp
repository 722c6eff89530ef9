// Acceptance run: one PASS / FAIL / SKIPPED line per primary criterion.
// Exit status is 1 when anything failed. Tolerances are fixed below.

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "subjqa/analysis.hpp"
#include "subjqa/common.hpp"
#include "subjqa/dataset.hpp"
#include "subjqa/factorization.hpp"
#include "subjqa/mtl.hpp"
#include "subjqa/neighborhood.hpp"
#include "subjqa/released.hpp"
#include "subjqa/store.hpp"
#include "subjqa/subjectivity.hpp"

using namespace subjqa;

namespace {

constexpr double kMonotoneSlack = 1e-12;
constexpr double kRankOneTol = 1e-6;
constexpr double kGradFull = 1e-3;
constexpr double kGradLinear = 1e-6;
constexpr double kToyEm = 90.0;        // percent
constexpr double kMtlEmGap = 5.0;      // EM points
constexpr double kToySubjAcc = 0.9;
constexpr double kPctTol = 0.5;        // released percentages
constexpr double kHowTol = 1.0;
constexpr double kLenTol = 1.0;        // tokens

enum class Verdict { kPass, kFail, kSkipped };

struct Outcome {
  Verdict verdict = Verdict::kPass;
  std::string detail;
};

Outcome pass(std::string d) { return {Verdict::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Verdict::kFail, std::move(d)}; }

std::string num(double v, int digits = 3) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*g", digits, v);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs one criterion, checks its time budget, prints the line.
bool report(const std::string& name, double budget_s, const std::function<Outcome()>& f) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = f();
  } catch (const std::exception& e) {
    o = fail(std::string("exception: ") + e.what());
  }
  const double s = seconds_since(t0);
  if (o.verdict == Verdict::kPass && budget_s > 0 && s > budget_s) {
    o = fail(o.detail + "; took " + num(s) + " s, budget " + num(budget_s) + " s");
  }
  const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIPPED";
  std::cout << tag << "  " << name << "  (" << o.detail << "; " << num(s) << " s)" << std::endl;
  return o.verdict != Verdict::kFail;
}

ExtractionMatrix from_eigen(const Eigen::MatrixXd& d) {
  ExtractionMatrix m;
  for (Eigen::Index i = 0; i < d.rows(); ++i) m.row_labels.push_back("i" + std::to_string(i));
  for (Eigen::Index j = 0; j < d.cols(); ++j) m.col_labels.push_back("op|e" + std::to_string(j));
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = 0; j < d.cols(); ++j)
      if (d(i, j) > 0) m.entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), d(i, j)});
  return m;
}

// --- NMF ------------------------------------------------------------------

Outcome nmf_correctness() {
  Rng rng(101);
  double worst_rise = 0;
  std::size_t traces = 0;
  for (int t = 0; t < 50; ++t) {
    Eigen::MatrixXd d(6, 8);
    for (Eigen::Index i = 0; i < 6; ++i)
      for (Eigen::Index j = 0; j < 8; ++j) d(i, j) = rng.below(5) ? 1.0 + static_cast<double>(rng.below(9)) : 0.0;
    if (d.isZero()) d(0, 0) = 1;
    NmfOptions o;
    o.k = 3;
    o.max_iters = 300;
    o.tol = 0;
    o.seed = static_cast<std::uint64_t>(t);
    NmfTrace tr;
    nmf(from_eigen(d), o, &tr);
    for (std::size_t i = 1; i < tr.errors.size(); ++i) {
      worst_rise = std::max(worst_rise, tr.errors[i] - tr.errors[i - 1]);
    }
    ++traces;
  }
  if (worst_rise > kMonotoneSlack) {
    return fail("Frobenius error rose by " + num(worst_rise) + " in some iteration");
  }
  // rank one: outer products of positive vectors, factorized at K = 1
  double worst_rel = 0;
  std::size_t worst_iters = 0;
  for (int t = 0; t < 50; ++t) {
    Eigen::VectorXd u(6), v(8);
    for (auto& x : u) x = rng.uniform(0.1, 2.0);
    for (auto& x : v) x = rng.uniform(0.1, 2.0);
    const Eigen::MatrixXd d = u * v.transpose();
    NmfOptions o;
    o.k = 1;
    o.max_iters = 200;
    o.tol = 0;
    o.seed = static_cast<std::uint64_t>(t);
    NmfTrace tr;
    nmf(from_eigen(d), o, &tr);
    const double rel = tr.errors.back() / d.norm();
    std::size_t hit = tr.errors.size();
    for (std::size_t i = 0; i < tr.errors.size(); ++i) {
      if (tr.errors[i] / d.norm() < kRankOneTol) {
        hit = i;
        break;
      }
    }
    worst_rel = std::max(worst_rel, rel);
    worst_iters = std::max(worst_iters, hit);
  }
  if (worst_rel >= kRankOneTol) return fail("rank-1 relative error " + num(worst_rel));
  return pass(std::to_string(traces) + " traces monotone, max rise " + num(worst_rise) +
              "; rank-1 worst relative error " + num(worst_rel) + ", reached " +
              num(kRankOneTol) + " by iteration " + std::to_string(worst_iters));
}

// --- neighbors ----------------------------------------------------------------

Outcome neighbor_exactness() {
  Rng rng(202);
  std::size_t lists = 0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 2 + rng.below(49), k = 1 + rng.below(6);
    oracle::Mat rows(n, std::vector<double>(k));
    FactorModel f;
    f.extraction_embeddings.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < n; ++i) {
      f.extraction_labels.push_back("op|x" + std::to_string(i));
      // some rows repeat to force ties, a few are zero
      const bool zero = rng.below(25) == 0;
      const bool copy = i > 0 && rng.below(8) == 0;
      for (std::size_t c = 0; c < k; ++c) {
        rows[i][c] = zero ? 0.0 : copy ? rows[i - 1][c] : std::floor(rng.uniform(0, 4));
        f.extraction_embeddings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
      }
    }
    f.item_embeddings = Eigen::MatrixXd::Ones(1, static_cast<Eigen::Index>(k));
    f.item_labels = {"item"};
    const auto got = build_neighborhood(f, 10);
    const auto want = oracle::brute_force_neighbors(f.extraction_labels, rows, 10);
    for (const auto& [key, list] : want) {
      const auto& g = got.neighbors.at(key);
      if (g.size() != list.size()) return fail("model " + std::to_string(t) + " " + key + ": size differs");
      for (std::size_t r = 0; r < list.size(); ++r) {
        if (g[r].key != list[r].first || g[r].weight != list[r].second) {
          return fail("model " + std::to_string(t) + " " + key + " rank " + std::to_string(r) +
                      ": " + g[r].key + " vs " + list[r].first);
        }
      }
      ++lists;
    }
  }
  return pass(std::to_string(lists) + " neighbor lists identical over 20 models");
}

// --- topics ------------------------------------------------------------------------

Outcome topic_selection() {
  const auto f = fixture::topic_fixture();
  const auto pruned = prune_neighbors(f.neighbors, f.semantic, 0.8, 0.975);
  std::vector<std::string> got;
  for (const auto& t : select_topics(pruned, f.vocab, 5)) got.push_back(t.key);
  std::sort(got.begin(), got.end());
  auto want = f.expected;
  std::sort(want.begin(), want.end());
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return "{" + s + "}";
  };
  if (got != want) return fail("selected " + join(got) + ", expected " + join(want));
  return pass("selected " + join(got));
}

// --- split ------------------------------------------------------------------------

Outcome split_integrity() {
  std::vector<AnnotatedExample> ex;
  for (int t = 0; t < 30; ++t) {
    for (int r = 0; r < 1 + t % 4; ++r) {
      AnnotatedExample e;
      e.domain = "books";
      e.topic_key = "topic" + std::to_string(t);
      e.review_id = "r" + std::to_string(r);
      ex.push_back(e);
    }
  }
  const std::size_t n = 30;
  const std::size_t want[3] = {24, 3, 3};  // 0.8n, 0.9n - 0.8n, rest
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = split_by_topic(ex, {}, seed);
    std::map<std::string, std::set<int>> where;
    std::size_t topic_count[3] = {0, 0, 0};
    for (int s = 0; s < 3; ++s)
      for (const auto& e : r.parts[s]) where[e.topic_key].insert(s);
    for (const auto& [topic, s] : where) {
      if (s.size() != 1) return fail("seed " + std::to_string(seed) + ": " + topic + " in two splits");
      ++topic_count[*s.begin()];
    }
    if (where.size() != n) return fail("seed " + std::to_string(seed) + ": topics lost");
    for (int s = 0; s < 3; ++s) {
      if (topic_count[s] != want[s]) {
        return fail("seed " + std::to_string(seed) + ": split " + std::to_string(s) + " has " +
                    std::to_string(topic_count[s]) + " topics");
      }
    }
  }
  return pass("100 seeds, 24/3/3 topics, no leakage");
}

// --- QC ------------------------------------------------------------------------------

Outcome qc_simulation() {
  fixture::TempDir tmp("acc-qc");
  const auto reviews = fixture::service_reviews();
  const auto stream = fixture::service_stream(400, 17, true, 10);
  AnnotationStore store(stream, reviews, tmp / "log");
  // gold accuracy patterns over every five golds: 3 of 5 and 4 of 5
  const std::map<std::string, std::vector<bool>> pattern = {
      {"w60", {true, false, true, false, true}},
      {"w80", {true, true, false, true, true}}};
  std::map<std::string, std::size_t> golds, regular;
  for (int round = 0; round < 60; ++round) {
    for (const auto& [w, pat] : pattern) {
      const auto next = store.next_task(w);
      if (next.status != ServiceStatus::kOk) continue;
      const ServedTask& t = *next.task;
      Annotation a;
      a.task_id = t.task_id;
      a.question_subj_score = 4;
      if (t.is_gold) {
        if (pat[golds[w]++ % pat.size()]) {
          a.answer = Answer::at(13, 18);
          a.answer_subj_score = 5;
        }
      } else {
        ++regular[w];
      }
      const auto r = store.submit_annotation(w, a);
      if (r.status != ServiceStatus::kOk) return fail(w + " submission rejected: " + r.message);
    }
  }
  const auto w60 = store.worker("w60"), w80 = store.worker("w80");
  if (!w60 || !w80) return fail("workers missing");
  if (w60->status.active) return fail("60% worker still active after " + std::to_string(golds["w60"]) + " golds");
  if (!w80->status.active) return fail("80% worker deactivated");
  std::size_t from60 = 0, from80 = 0;
  const auto examples = assemble(store, stream, reviews);
  std::map<std::string, std::string> task_worker;
  for (const auto& a : store.annotations()) task_worker[a.annotation.task_id] = a.annotation.worker_id;
  for (const auto& e : examples) {
    for (const auto& t : stream.regular()) {
      if (t.review_id == e.review_id && t.topic_key == e.topic_key) {
        (task_worker[t.task_id] == "w60" ? from60 : from80) += 1;
      }
    }
  }
  if (from60 != 0) return fail("60% worker contributed " + std::to_string(from60) + " examples");
  if (from80 != regular["w80"]) return fail("80% worker examples " + std::to_string(from80) + " != " +
                                            std::to_string(regular["w80"]));
  return pass("60% worker deactivated after " + std::to_string(golds["w60"]) +
              " golds with 0 examples; 80% worker active with " + std::to_string(from80) +
              " examples over " + std::to_string(golds["w80"]) + " golds");
}

// --- released data -----------------------------------------------------------------

Outcome released_statistics() {
  const char* dir = std::getenv("SUBJQA_RELEASED_DIR");
  if (!dir || !*dir) return {Verdict::kSkipped, "SUBJQA_RELEASED_DIR not set"};
  const auto rows = load_released_dir(dir);
  if (rows.empty()) return {Verdict::kSkipped, std::string("no released files under ") + dir};
  const auto threshold = calibrate_threshold(rows);
  if (!threshold) return fail("no subjectivity labels to calibrate against");
  const auto examples = examples_of(rows);
  const auto report = analyze(examples, *threshold);

  struct Row {
    std::size_t train, dev, test, total;
    double review_len, q_len, a_len;
    double subj_q, answerable, subj_a;
  };
  const std::map<std::string, Row> want = {
      {"tripadvisor", {1165, 230, 512, 1686, 187.25, 5.66, 6.71, 74.49, 83.20, 75.20}},
      {"restaurants", {1400, 267, 266, 1683, 185.40, 5.44, 6.67, 76.11, 65.72, 76.29}},
      {"movies", {1369, 261, 291, 1677, 331.56, 5.59, 7.32, 74.41, 62.09, 74.59}},
      {"books", {1314, 256, 345, 1668, 285.47, 5.78, 7.78, 75.77, 58.86, 75.35}},
      {"electronics", {1295, 255, 358, 1659, 249.44, 5.56, 6.98, 69.80, 65.37, 69.98}},
      {"grocery", {1124, 218, 591, 1725, 164.75, 5.44, 7.25, 73.21, 70.22, 73.15}}};
  std::vector<std::string> problems;
  auto near = [&](const std::string& what, std::optional<double> got, double exp, double tol) {
    if (!got || std::abs(*got - exp) > tol) {
      problems.push_back(what + " " + (got ? num(*got, 4) : "NA") + " vs " + num(exp, 4));
    }
  };
  for (const auto& [domain, w] : want) {
    const auto it = report.per_domain.find(domain);
    if (it == report.per_domain.end()) {
      problems.push_back(domain + " missing");
      continue;
    }
    const auto& s = it->second;
    if (s.n_train != w.train || s.n_dev != w.dev || s.n_test != w.test || s.n_total != w.total) {
      problems.push_back(domain + " counts " + std::to_string(s.n_train) + "/" + std::to_string(s.n_dev) +
                         "/" + std::to_string(s.n_test));
    }
    near(domain + " review len", s.mean_review_len, w.review_len, kLenTol);
    near(domain + " question len", s.mean_q_len, w.q_len, kLenTol);
    near(domain + " answer len", s.mean_a_len, w.a_len, kLenTol);
    near(domain + " subj Q", s.pct_subj_q, w.subj_q, kPctTol);
    near(domain + " answerable", s.pct_answerable, w.answerable, kPctTol);
    near(domain + " subj A", s.pct_subj_a, w.subj_a, kPctTol);
  }
  if (!report.joint) {
    problems.push_back("no joint distribution");
  } else {
    near("joint subjQ&subjA", report.joint->subjq_subja, 79.8, kPctTol);
    near("joint factQ&subjA", report.joint->factq_subja, 1.31, kPctTol);
    near("joint subjQ&factA", report.joint->subjq_facta, 1.29, kPctTol);
    near("joint factQ&factA", report.joint->factq_facta, 17.58, kPctTol);
  }
  std::vector<std::string> questions;
  for (const auto& e : examples) questions.push_back(e.question_text);
  const auto prefixes = prefix_distribution(questions, 1);
  const auto how = prefixes.count(1) && prefixes.at(1).count("how")
                       ? std::optional<double>(100.0 * prefixes.at(1).at("how"))
                       : std::nullopt;
  near("'how' share", how, 57.9, kHowTol);
  if (!problems.empty()) {
    std::string s;
    for (std::size_t i = 0; i < problems.size() && i < 6; ++i) s += (i ? "; " : "") + problems[i];
    if (problems.size() > 6) s += "; +" + std::to_string(problems.size() - 6) + " more";
    return fail(s);
  }
  return pass(std::to_string(rows.size()) + " rows, threshold " + std::to_string(*threshold));
}

// --- MTL -------------------------------------------------------------------------------

MtlConfig toy_config(std::size_t vocab, bool linear) {
  MtlConfig c;
  c.vocab_size = vocab;
  c.emb_dim = 4;
  c.hidden = 3;
  c.proj = 4;
  c.subj_hidden = 3;
  c.max_span_len = 6;
  c.linear = linear;
  return c;
}

Outcome gradient_check_criterion() {
  WordVocabulary vocab;
  const auto data = sentinel_toy_dataset(10, 303, vocab);
  double worst_full = 0, worst_linear = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto full = MtlParams::init(toy_config(vocab.size(), false), i);
    const auto lin = MtlParams::init(toy_config(vocab.size(), true), i);
    worst_full = std::max(worst_full, gradient_check(full, data[i]));
    worst_linear = std::max(worst_linear, gradient_check(lin, data[i]));
  }
  const std::string d = "full " + num(worst_full) + ", linear " + num(worst_linear);
  if (worst_full >= kGradFull || worst_linear >= kGradLinear) return fail(d);
  return pass(d);
}

Outcome mtl_toy() {
  WordVocabulary vocab;
  const auto train = sentinel_toy_dataset(400, 1, vocab);
  const auto test = sentinel_toy_dataset(200, 2, vocab);
  MtlConfig c;
  c.vocab_size = vocab.size();
  c.max_span_len = 6;
  MtlTrainConfig tc;
  tc.epochs = 10;
  tc.lr = 0.05;
  tc.seed = 7;
  tc.task_sample_prob = 1.0;
  const auto single = evaluate(train_mtl(train, c, tc), test, 4);
  tc.task_sample_prob = 0.5;
  const auto multi = evaluate(train_mtl(train, c, tc), test, 4);
  const double em1 = single.strata.at("overall").em, em2 = multi.strata.at("overall").em;
  const std::string d = "single-task EM " + num(em1) + ", MTL EM " + num(em2) +
                        ", MTL subjectivity accuracy " + num(multi.subj_accuracy);
  if (em2 < kToyEm || em1 - em2 > kMtlEmGap || multi.subj_accuracy < kToySubjAcc) return fail(d);
  return pass(d);
}

// --- subjectivity ----------------------------------------------------------------------

Outcome sentiment_direction() {
  const std::size_t per_doc = 6;
  const auto docs = synthetic_sentiment_corpus(400, per_doc, 31);
  const auto lex = SubjectivityLexicon::load_default();
  const SentenceScorer scorer = [&](std::string_view s) { return lexicon_subjectivity(s, lex); };
  std::vector<std::size_t> ns;
  for (std::size_t n = 1; n <= per_doc; ++n) ns.push_back(n);
  SentimentConfig cfg;
  cfg.model.epochs = 60;
  const auto rows = sentiment_experiment(docs, ns, scorer, 5, cfg);
  std::map<std::pair<std::size_t, std::string>, double> acc;
  for (const auto& r : rows) acc[{r.n, r.mode}] = r.accuracy;
  const double base = acc.at({0, "all"});
  std::string d;
  for (std::size_t n : ns) {
    const double s = acc.at({n, "subjective"}), o = acc.at({n, "objective"});
    d += (d.empty() ? "" : " ") + std::to_string(n) + ":" + num(s) + "/" + num(o);
    if (n < per_doc && !(s > o)) return fail("N=" + std::to_string(n) + " subjective " + num(s) + " <= objective " + num(o));
  }
  d += ", baseline " + num(base);
  if (acc.at({per_doc, "subjective"}) != base || acc.at({per_doc, "objective"}) != base) {
    return fail("N=max differs from baseline; " + d);
  }
  return pass("subj/obj accuracy by N " + d);
}

Outcome classifier_ordering() {
  std::vector<LabeledText> corpus;
  std::string source;
  if (const char* p = std::getenv("SUBJQA_SUBJ_CORPUS"); p && *p) {
    corpus = load_subjectivity_corpus(p);
    source = p;
  } else {
    corpus = synthetic_subjectivity_corpus(3000, 41);
    source = "synthetic corpus";
  }
  if (corpus.size() < 2000) return fail(source + " has only " + std::to_string(corpus.size()) + " sentences");
  // seeded 70/30 hold-out
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(43);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<LabeledText> train, test;
  for (std::size_t k = 0; k < order.size(); ++k) (k < order.size() * 7 / 10 ? train : test).push_back(corpus[order[k]]);
  LinearTrainConfig cfg;
  cfg.seed = 1;
  const auto model = train_linear_model(train, cfg);
  const double ngram = accuracy(model, test);
  const auto lex = SubjectivityLexicon::load_default();
  std::size_t ok = 0;
  for (const auto& t : test) ok += (lexicon_subjectivity(t.text, lex) > 0.5) == t.label;
  const double lexicon = static_cast<double>(ok) / static_cast<double>(test.size());
  const std::string d = source + ", " + std::to_string(test.size()) + " held out: n-gram " +
                        num(ngram) + ", lexicon " + num(lexicon);
  if (!(ngram > lexicon)) return fail(d);
  return pass(d);
}

// --- crash safety ---------------------------------------------------------------------

bool write_all(int fd, const std::string& s) {
  std::size_t off = 0;
  while (off < s.size()) {
    const ssize_t w = ::write(fd, s.data() + off, s.size() - off);
    if (w <= 0) return false;
    off += static_cast<std::size_t>(w);
  }
  return true;
}

bool read_exact(int fd, std::string& out, std::size_t n) {
  out.resize(n);
  std::size_t off = 0;
  while (off < n) {
    const ssize_t r = ::read(fd, out.data() + off, n - off);
    if (r <= 0) return false;
    off += static_cast<std::size_t>(r);
  }
  return true;
}

// Child: performs seeded operations; after each acknowledged write it sends
// its snapshot and waits for the parent's go-ahead.
[[noreturn]] void crash_child(const std::filesystem::path& log, std::uint64_t seed, int to_parent, int from_parent) {
  const auto reviews = fixture::service_reviews();
  AnnotationStore store(fixture::service_stream(40, seed), reviews, log);
  Rng rng(seed);
  const char* workers[] = {"a", "b", "c"};
  for (;;) {
    const std::string w = workers[rng.below(3)];
    const auto next = store.next_task(w);
    if (next.status != ServiceStatus::kOk) {
      if (store.progress().active_workers == 0 || next.status == ServiceStatus::kNoTasks) {
        // nothing left: keep reporting the final state
      } else {
        continue;
      }
    } else {
      const ServedTask& t = *next.task;
      Annotation a;
      a.task_id = t.task_id;
      a.question_subj_score = 1 + static_cast<int>(rng.below(5));
      if (t.is_gold ? rng.below(4) != 0 : rng.below(2) == 0) {
        a.answer = t.review_id == "s1" ? Answer::at(13, 18) : Answer::at(0, 3);
        if (t.review_id == "s4") a.answer = Answer::at(0, 1);
        a.answer_subj_score = 1 + static_cast<int>(rng.below(5));
      }
      store.submit_annotation(w, a);
    }
    const std::string snap = store.snapshot();
    char len[32];
    std::snprintf(len, sizeof len, "%020zu", snap.size());
    if (!write_all(to_parent, std::string(len, 20) + snap)) _exit(2);
    char go;
    if (::read(from_parent, &go, 1) != 1) _exit(0);
  }
}

Outcome crash_safety() {
  const auto reviews = fixture::service_reviews();
  std::size_t total_acks = 0, torn = 0;
  for (std::uint64_t schedule = 0; schedule < 20; ++schedule) {
    fixture::TempDir tmp("acc-crash");
    const auto log = tmp / "log";
    Rng plan(mix_seed(900, schedule));
    const std::size_t acks = 1 + plan.below(60);
    int up[2], down[2];
    if (::pipe(up) != 0 || ::pipe(down) != 0) return fail("pipe failed");
    std::cout.flush();
    const pid_t pid = ::fork();
    if (pid < 0) return fail("fork failed");
    if (pid == 0) {
      ::close(up[0]);
      ::close(down[1]);
      crash_child(log, schedule, up[1], down[0]);
    }
    ::close(up[1]);
    ::close(down[0]);
    std::string last;
    bool ok = true;
    for (std::size_t i = 0; i < acks && ok; ++i) {
      std::string len;
      ok = read_exact(up[0], len, 20) && read_exact(up[0], last, std::stoull(len));
      if (ok && i + 1 < acks) ok = ::write(down[1], "g", 1) == 1;
    }
    ::kill(pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(up[0]);
    ::close(down[1]);
    if (!ok) return fail("schedule " + std::to_string(schedule) + ": child stopped early");
    total_acks += acks;
    // every other schedule also leaves a half-written record behind
    if (schedule % 2) {
      std::string tail = read_file(log);
      tail += "1a2b3c4d\t{\"type\":\"annotation\",\"wor";
      write_file(log, tail);
      ++torn;
    }
    AnnotationStore recovered(fixture::service_stream(40, schedule), reviews, log);
    if (recovered.snapshot() != last) {
      return fail("schedule " + std::to_string(schedule) + ": recovered state differs after " +
                  std::to_string(acks) + " acks");
    }
    if (recovered.dropped_tail_records() != (schedule % 2 ? 1u : 0u)) {
      return fail("schedule " + std::to_string(schedule) + ": unexpected dropped tail count");
    }
  }
  return pass("20 schedules, " + std::to_string(total_acks) + " acknowledged writes, " +
              std::to_string(torn) + " with a torn tail; state identical");
}

}  // namespace

int main() {
  bool ok = true;
  ok &= report("NMF correctness", 10, nmf_correctness);
  ok &= report("Neighbor exactness", 0, neighbor_exactness);
  ok &= report("Topic selection", 0, topic_selection);
  ok &= report("Split integrity", 0, split_integrity);
  ok &= report("QC simulation", 0, qc_simulation);
  ok &= report("Released-data statistics", 120, released_statistics);
  ok &= report("Gradient check", 30, gradient_check_criterion);
  ok &= report("MTL toy task", 300, mtl_toy);
  ok &= report("Sentiment direction", 120, sentiment_direction);
  ok &= report("Classifier ordering", 0, classifier_ordering);
  ok &= report("Service crash safety", 0, crash_safety);
  return ok ? 0 : 1;
}
