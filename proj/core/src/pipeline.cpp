#include "subjqa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"
#include "subjqa/analysis.hpp"
#include "subjqa/annotation.hpp"
#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/dataset.hpp"
#include "subjqa/factorization.hpp"
#include "subjqa/mtl.hpp"
#include "subjqa/neighborhood.hpp"
#include "subjqa/opinion.hpp"
#include "subjqa/server.hpp"
#include "subjqa/store.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace fs = std::filesystem;
namespace {

using json = nlohmann::json;

// Artifact file names, relative to the output directory, and the stage
// producing each.
const std::map<std::string, std::string>& producers() {
  static const std::map<std::string, std::string> kProducers = {
      {"reviews.jsonl", "ingest"},
      {"extractions.jsonl", "extract"},
      {"matrix.tsv", "factorize"},
      {"factors.txt", "factorize"},
      {"neighbors.tsv", "neighborhood"},
      {"pruned_neighbors.tsv", "topics"},
      {"topics.tsv", "topics"},
      {"pairs.jsonl", "pair"},
      {"question_tasks.jsonl", "tasks"},
      {"task_stream.json", "tasks"},
      {"annotations.log", "serve"},
      {"dataset/manifest.json", "assemble"},
      {"model.json", "train"},
  };
  return kProducers;
}

fs::path require(const fs::path& out, const std::string& artifact,
                 const std::string& hint = {}) {
  const fs::path p = out / artifact;
  if (!fs::exists(p)) {
    const auto it = producers().find(artifact);
    const std::string stage = it == producers().end() ? "?" : it->second;
    throw Error(ErrorKind::kMissingStage,
                "missing " + p.string() + "; run stage '" + stage + "' first" +
                    hint);
  }
  return p;
}

fs::path require_input(const PipelineConfig& c, const std::string& key) {
  const std::string& v = c.str(key);
  if (v.empty()) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "' must be set");
  }
  if (!fs::exists(v)) {
    throw Error(ErrorKind::kInput, key + ": no such file " + v);
  }
  return v;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  while (begin <= s.size()) {
    const auto comma = s.find(',', begin);
    const std::string item =
        trim(s.substr(begin, comma == std::string::npos ? std::string::npos
                                                        : comma - begin));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    begin = comma + 1;
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  const std::string t = to_lower_ascii(v);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw Error(ErrorKind::kConfig, "config key '" + key + "': not a boolean: " + v);
}

ReviewCollection load_ingested(const fs::path& out) {
  return load_reviews(require(out, "reviews.jsonl"), Domain("other"));
}

std::vector<SpanTask> gold_pool(const PipelineConfig& c) {
  if (!c.flag("inject_gold")) return {};
  std::vector<SpanTask> gold = load_span_tasks(require_input(c, "gold_tasks"));
  for (auto& t : gold) t.is_gold = true;
  return gold;
}

TaskStream load_stream(const fs::path& out) {
  return TaskStream::load(
      require(out, "task_stream.json",
              " (it needs written questions: set 'questions' or run 'serve' "
              "with serve_phase=questions)"));
}

struct Split3 {
  std::vector<AnnotatedExample> train, dev, test;
};

Split3 load_dataset(const fs::path& out) {
  require(out, "dataset/manifest.json");
  Split3 s;
  for (auto& ex : load_exported(out / "dataset")) {
    (ex.split == Split::kTrain ? s.train
                               : ex.split == Split::kDev ? s.dev : s.test)
        .push_back(std::move(ex));
  }
  return s;
}

int subj_threshold(const PipelineConfig& c) {
  if (c.str("subj_threshold").empty()) {
    throw Error(ErrorKind::kConfig,
                "subj_threshold must be set explicitly (score >= threshold is "
                "subjective)");
  }
  return static_cast<int>(c.integer("subj_threshold"));
}

MtlConfig model_config(const PipelineConfig& c, std::size_t vocab_size) {
  MtlConfig m;
  m.vocab_size = vocab_size;
  m.emb_dim = static_cast<int>(c.integer("mtl_emb_dim"));
  m.hidden = static_cast<int>(c.integer("mtl_hidden"));
  m.proj = static_cast<int>(c.integer("mtl_proj"));
  m.subj_hidden = static_cast<int>(c.integer("mtl_subj_hidden"));
  m.max_span_len = static_cast<int>(c.integer("mtl_max_span_len"));
  m.allow_no_answer = c.flag("mtl_allow_no_answer");
  m.init_scale = c.real("mtl_init_scale");
  return m;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string s;
  for (const auto& l : lines) s += l + "\n";
  return s;
}

class StageRun {
 public:
  StageRun(std::string stage, const PipelineConfig& c, fs::path out,
           const StageOptions& opt)
      : stage_(std::move(stage)), c_(c), out_(std::move(out)), opt_(opt) {}

  void input(const fs::path& p) { inputs_.push_back(p); }
  void output(const fs::path& p) { outputs_.push_back(p); }
  void log(const std::string& s) const {
    if (opt_.log) opt_.log(stage_ + ": " + s);
  }

  StageResult finish() {
    auto rel = [&](const fs::path& p) {
      const auto r = fs::relative(p, out_);
      return r.empty() || r.native().rfind("..", 0) == 0 ? p.generic_string()
                                                         : r.generic_string();
    };
    json in = json::object(), outj = json::object();
    for (const auto& p : inputs_) in[rel(p)] = sha256_hex(read_file(p));
    for (const auto& p : outputs_) outj[rel(p)] = sha256_hex(read_file(p));
    json m = {{"schema", "subjqa.stage_manifest.v1"},
              {"stage", stage_},
              {"config_hash", c_.hash()},
              {"seed", c_.integer("seed")},
              {"inputs", in},
              {"outputs", outj}};
    StageResult r;
    r.stage = stage_;
    r.manifest_json = m.dump(2) + "\n";
    r.manifest_path = out_ / "manifests" / (stage_ + ".json");
    write_file(r.manifest_path, r.manifest_json);
    r.outputs = outputs_;
    return r;
  }

 private:
  std::string stage_;
  const PipelineConfig& c_;
  fs::path out_;
  const StageOptions& opt_;
  std::vector<fs::path> inputs_, outputs_;
};

void stage_ingest(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto paths = split_list(c.str("reviews"));
  if (paths.empty()) {
    throw Error(ErrorKind::kConfig, "config key 'reviews' must list input files");
  }
  std::vector<ReviewCollection> parts;
  for (const auto& p : paths) {
    LoadReport report;
    parts.push_back(load_reviews(p, Domain(c.str("default_domain")), &report));
    run.input(p);
    run.log(p + ": " + std::to_string(report.loaded) + " loaded, " +
            std::to_string(report.skipped) + " skipped");
    for (const auto& w : report.warnings) run.log("  " + w);
  }
  const auto merged = merge_collections(parts);
  save_reviews(out / "reviews.jsonl", merged);
  run.output(out / "reviews.jsonl");
}

Lexicons lexicons(const PipelineConfig& c) {
  return Lexicons::load_dir(c.str("lexicon_dir").empty()
                                ? Lexicons::default_dir()
                                : fs::path(c.str("lexicon_dir")));
}

void stage_extract(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto reviews = load_ingested(out);
  run.input(out / "reviews.jsonl");
  const auto vocab = aggregate_extractions(reviews, lexicons(c));
  vocab.save(out / "extractions.jsonl");
  run.output(out / "extractions.jsonl");
  run.log(std::to_string(vocab.size()) + " distinct extractions");
}

void stage_factorize(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto vocab = ExtractionVocabulary::load(require(out, "extractions.jsonl"));
  const auto reviews = load_ingested(out);
  run.input(out / "extractions.jsonl");
  run.input(out / "reviews.jsonl");
  const auto m = build_matrix(vocab, reviews, c.count("min_item_reviews"),
                              c.count("min_extraction_reviews"));
  m.save(out / "matrix.tsv");
  NmfOptions o;
  o.k = c.count("k");
  o.max_iters = c.count("nmf_max_iters");
  o.tol = c.real("nmf_tol");
  o.seed = static_cast<std::uint64_t>(c.integer("seed"));
  NmfTrace trace;
  const auto model = nmf(m, o, &trace);
  model.save(out / "factors.txt");
  run.output(out / "matrix.tsv");
  run.output(out / "factors.txt");
  run.log(std::to_string(m.row_labels.size()) + "x" +
          std::to_string(m.col_labels.size()) + " matrix, " +
          std::to_string(model.iterations) + " iterations");
}

void stage_neighborhood(StageRun& run, const PipelineConfig& c,
                        const fs::path& out) {
  const auto model = FactorModel::load(require(out, "factors.txt"));
  run.input(out / "factors.txt");
  build_neighborhood(model, c.count("k_max")).save(out / "neighbors.tsv");
  run.output(out / "neighbors.tsv");
}

void stage_topics(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto n = NeighborhoodModel::load(require(out, "neighbors.tsv"));
  const auto vocab = ExtractionVocabulary::load(require(out, "extractions.jsonl"));
  run.input(out / "neighbors.tsv");
  run.input(out / "extractions.jsonl");
  std::optional<WordVectors> vectors;
  if (!c.str("word_vectors").empty()) {
    vectors = WordVectors::load(require_input(c, "word_vectors"));
    run.input(c.str("word_vectors"));
  }
  const auto pruned = prune_neighbors(
      n, make_semantic_similarity(vectors ? &*vectors : nullptr),
      c.real("cos_min"), c.real("sem_max"));
  pruned.save(out / "pruned_neighbors.tsv");
  const auto topics = select_topics(pruned, vocab, c.count("min_neighbors"));
  save_topics(out / "topics.tsv", topics);
  run.output(out / "pruned_neighbors.tsv");
  run.output(out / "topics.tsv");
  run.log(std::to_string(topics.size()) + " topics");
}

void stage_pair(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto topics = load_topics(require(out, "topics.tsv"));
  const auto reviews = load_ingested(out);
  const auto vocab = ExtractionVocabulary::load(require(out, "extractions.jsonl"));
  run.input(out / "topics.tsv");
  run.input(out / "reviews.jsonl");
  run.input(out / "extractions.jsonl");
  std::vector<TopicReviewPair> all;
  for (const auto& t : topics) {
    auto p = pair_reviews(t, reviews, vocab, c.count("max_pairs_per_topic"));
    all.insert(all.end(), p.begin(), p.end());
  }
  save_pairs(out / "pairs.jsonl", all);
  run.output(out / "pairs.jsonl");
  run.log(std::to_string(all.size()) + " topic-review pairs");
}

void stage_tasks(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto topics = load_topics(require(out, "topics.tsv"));
  const auto pairs = load_pairs(require(out, "pairs.jsonl"), topics);
  run.input(out / "pairs.jsonl");
  const auto qtasks = make_question_tasks(pairs);
  save_question_tasks(out / "question_tasks.jsonl", qtasks);
  run.output(out / "question_tasks.jsonl");

  fs::path questions_path;
  if (!c.str("questions").empty()) {
    questions_path = require_input(c, "questions");
  } else if (fs::exists(out / "written_questions.jsonl")) {
    questions_path = out / "written_questions.jsonl";
  }
  if (questions_path.empty()) {
    fs::remove(out / "task_stream.json");
    run.log(std::to_string(qtasks.size()) +
            " question tasks; no written questions yet, span tasks not built");
    return;
  }
  run.input(questions_path);
  std::map<std::string, const QuestionTask*> by_id;
  for (const auto& q : qtasks) by_id[q.task_id] = &q;
  std::vector<SpanTask> regular;
  std::set<std::string> seen;
  for (const auto& w : load_written_questions(questions_path)) {
    auto it = by_id.find(w.task_id);
    if (it == by_id.end()) {
      throw Error(ErrorKind::kInput, questions_path.string() +
                                         ": unknown question task " + w.task_id);
    }
    SpanTask t = make_span_task(*it->second, w.question);
    if (seen.insert(t.task_id).second) regular.push_back(std::move(t));
  }
  std::vector<SpanTask> gold = gold_pool(c);
  if (c.flag("inject_gold")) run.input(c.str("gold_tasks"));
  const auto stream = make_span_tasks(std::move(regular), std::move(gold),
                                      static_cast<std::uint64_t>(c.integer("seed")),
                                      c.flag("inject_gold"), c.count("gold_window"));
  stream.save(out / "task_stream.json");
  run.output(out / "task_stream.json");
  run.log(std::to_string(stream.regular().size()) + " span tasks, " +
          std::to_string(stream.gold_pool().size()) + " gold");
}

void write_progress(const AnnotationStore& store, const fs::path& path) {
  const Progress p = store.progress();
  json j = {{"revision", p.revision},
            {"total", p.total},
            {"assigned", p.assigned},
            {"completed", p.completed},
            {"gold_completed", p.gold_completed},
            {"completed_per_domain", p.completed_per_domain},
            {"workers", p.workers},
            {"active_workers", p.active_workers}};
  write_file(path, j.dump(2) + "\n");
}

void stage_serve(StageRun& run, const PipelineConfig& c, const fs::path& out,
                 const StageOptions& opt) {
  const auto reviews = load_ingested(out);
  run.input(out / "reviews.jsonl");
  const bool questions_phase = c.str("serve_phase") == "questions";
  const bool live = c.integer("serve_port") > 0;
  const fs::path log_path =
      out / (questions_phase ? "questions.log" : "annotations.log");
  if (!live) {
    // Offline import replays scripted responses into a fresh log, so a
    // rerun gives the same log.
    fs::remove(log_path);
  }
  std::unique_ptr<AnnotationStore> store;
  if (questions_phase) {
    auto qtasks = load_question_tasks(require(out, "question_tasks.jsonl"));
    run.input(out / "question_tasks.jsonl");
    store = std::make_unique<AnnotationStore>(std::move(qtasks), reviews, log_path);
  } else {
    auto stream = load_stream(out);
    run.input(out / "task_stream.json");
    store = std::make_unique<AnnotationStore>(std::move(stream), reviews, log_path,
                                              c.count("min_gold"));
  }
  if (live) {
    AnnotationServer server(*store, reviews);
    const int port = static_cast<int>(c.integer("serve_port"));
    if (!server.bind(c.str("serve_host"), port)) {
      throw Error(ErrorKind::kIo, "cannot bind " + c.str("serve_host") + ":" +
                                      std::to_string(port));
    }
    if (opt.on_listen) opt.on_listen(server, port);
    run.log("listening on " + c.str("serve_host") + ":" + std::to_string(port));
    server.listen_after_bind();
  } else {
    const auto responses = load_scripted_responses(require_input(c, "responses"));
    run.input(c.str("responses"));
    const auto report = run_scripted(*store, responses);
    run.log(std::to_string(report.submitted) + " submissions, " +
            std::to_string(report.rejected) + " rejected");
  }
  run.output(log_path);
  if (questions_phase) {
    std::vector<std::string> lines;
    for (const auto& q : store->questions()) {
      if (q.ignored) continue;
      lines.push_back(json({{"task_id", q.task_id}, {"question", q.question}}).dump());
    }
    write_file(out / "written_questions.jsonl", join_lines(lines));
    run.output(out / "written_questions.jsonl");
  } else {
    std::vector<Annotation> accepted;
    for (const auto& a : store->annotations()) accepted.push_back(a.annotation);
    save_annotations(out / "annotations.jsonl", accepted);
    write_progress(*store, out / "progress.json");
    run.output(out / "annotations.jsonl");
    run.output(out / "progress.json");
  }
}

void stage_assemble(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const auto reviews = load_ingested(out);
  auto stream = load_stream(out);
  const fs::path log_path = require(out, "annotations.log");
  run.input(out / "reviews.jsonl");
  run.input(out / "task_stream.json");
  run.input(log_path);
  // Replaying the log rebuilds the worker statuses and ignore flags.
  const TaskStream copy = stream;
  AnnotationStore store(std::move(stream), reviews, log_path, c.count("min_gold"));
  const auto examples = assemble(store, copy, reviews);
  SplitFractions f{c.real("split_train"), c.real("split_dev"), c.real("split_test")};
  const auto split = split_by_topic(examples, f,
                                    static_cast<std::uint64_t>(c.integer("seed")));
  ExportOptions eo;
  eo.seed = static_cast<std::uint64_t>(c.integer("seed"));
  eo.config_hash = c.hash();
  for (const auto& r : reviews.reviews()) eo.domains.insert(r.domain.label());
  fs::remove_all(out / "dataset");
  for (const auto& p : export_dataset(split, out / "dataset", eo)) run.output(p);
  run.log(std::to_string(examples.size()) + " examples");
}

void stage_analyze(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const Split3 s = load_dataset(out);
  run.input(out / "dataset/manifest.json");
  std::vector<AnnotatedExample> all = s.train;
  all.insert(all.end(), s.dev.begin(), s.dev.end());
  all.insert(all.end(), s.test.begin(), s.test.end());
  PrefixLexicon lex = PrefixLexicon::defaults();
  if (!c.str("boolean_lexicon").empty()) {
    lex = PrefixLexicon::load(require_input(c, "boolean_lexicon"));
    run.input(c.str("boolean_lexicon"));
  }
  const auto report = analyze(all, subj_threshold(c), lex);
  for (const auto& p : write_report(report, all, out / "analysis")) run.output(p);
}

std::vector<MtlExample> to_mtl(const std::vector<AnnotatedExample>& v,
                               const WordVocabulary& vocab, int threshold) {
  std::vector<MtlExample> out;
  for (const auto& ex : v) {
    if (ex.review_text.empty()) continue;
    out.push_back(make_mtl_example(ex, vocab, threshold));
  }
  return out;
}

void stage_train(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  const Split3 s = load_dataset(out);
  run.input(out / "dataset/manifest.json");
  if (s.train.empty()) {
    throw Error(ErrorKind::kInput, "train split is empty");
  }
  const int threshold = subj_threshold(c);
  const WordVocabulary vocab = build_vocabulary(s.train, c.count("mtl_min_count"));
  const auto data = to_mtl(s.train, vocab, threshold);
  MtlTrainConfig tc;
  tc.epochs = static_cast<int>(c.integer("mtl_epochs"));
  tc.lr = c.real("mtl_lr");
  tc.seed = static_cast<std::uint64_t>(c.integer("seed"));
  tc.task_sample_prob = c.real("mtl_task_sample_prob");
  MtlTrainLog tlog;
  const auto params = train_mtl(data, model_config(c, vocab.size()), tc, &tlog);
  params.save(out / "model.json", &vocab);
  run.output(out / "model.json");
  run.log(std::to_string(params.parameter_count()) + " parameters, " +
          std::to_string(tlog.span_steps) + " span steps, " +
          std::to_string(tlog.subj_steps) + " subjectivity steps");
}

void stage_evaluate(StageRun& run, const PipelineConfig& c, const fs::path& out) {
  WordVocabulary vocab;
  const auto params = MtlParams::load(require(out, "model.json"), &vocab);
  const Split3 s = load_dataset(out);
  run.input(out / "model.json");
  run.input(out / "dataset/manifest.json");
  const int threshold = subj_threshold(c);
  for (const auto& [name, part] :
       {std::pair<std::string, const std::vector<AnnotatedExample>*>{"dev", &s.dev},
        {"test", &s.test}}) {
    const auto m = evaluate(params, to_mtl(*part, vocab, threshold), threshold);
    const fs::path p = out / ("metrics_" + name + ".tsv");
    write_file(p, metrics_table(m));
    run.output(p);
  }
}

}  // namespace

PipelineConfig::PipelineConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

const std::vector<std::pair<std::string, std::string>>& PipelineConfig::defaults() {
  static const std::vector<std::pair<std::string, std::string>> kDefaults = {
      {"seed", "0"},
      {"reviews", ""},
      {"default_domain", "other"},
      {"lexicon_dir", ""},
      {"min_item_reviews", "10000"},
      {"min_extraction_reviews", "5000"},
      {"k", "20"},
      {"nmf_max_iters", "500"},
      {"nmf_tol", "1e-5"},
      {"k_max", "10"},
      {"cos_min", "0.8"},
      {"sem_max", "0.975"},
      {"min_neighbors", "5"},
      {"word_vectors", ""},
      {"max_pairs_per_topic", "10"},
      {"questions", ""},
      {"gold_tasks", ""},
      {"inject_gold", "true"},
      {"gold_window", "5"},
      {"min_gold", "5"},
      {"serve_phase", "spans"},
      {"serve_host", "127.0.0.1"},
      {"serve_port", "0"},
      {"responses", ""},
      {"split_train", "0.8"},
      {"split_dev", "0.1"},
      {"split_test", "0.1"},
      {"subj_threshold", ""},
      {"boolean_lexicon", ""},
      {"mtl_emb_dim", "16"},
      {"mtl_hidden", "16"},
      {"mtl_proj", "16"},
      {"mtl_subj_hidden", "8"},
      {"mtl_max_span_len", "30"},
      {"mtl_allow_no_answer", "true"},
      {"mtl_init_scale", "0.5"},
      {"mtl_min_count", "1"},
      {"mtl_epochs", "10"},
      {"mtl_lr", "0.05"},
      {"mtl_task_sample_prob", "0.5"},
  };
  return kDefaults;
}

PipelineConfig PipelineConfig::parse(std::string_view contents) {
  PipelineConfig c;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(contents)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kConfig,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    c.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  return parse(read_file(path));
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) {
    throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
  values_[key] = value;
  explicit_.insert(key);
}

bool PipelineConfig::is_set(const std::string& key) const {
  return explicit_.count(key) > 0;
}

const std::string& PipelineConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) {
    throw Error(ErrorKind::kConfig, "unknown config key '" + key + "'");
  }
  return it->second;
}

double PipelineConfig::real(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "': not a number: " + v);
  }
}

std::int64_t PipelineConfig::integer(const std::string& key) const {
  const std::string& v = str(key);
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "': not an integer: " + v);
  }
}

std::size_t PipelineConfig::count(const std::string& key) const {
  const auto i = integer(key);
  if (i < 0) {
    throw Error(ErrorKind::kConfig, "config key '" + key + "' must be >= 0");
  }
  return static_cast<std::size_t>(i);
}

bool PipelineConfig::flag(const std::string& key) const {
  return parse_bool(key, str(key));
}

void PipelineConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kConfig, msg); };
  integer("seed");
  count("min_item_reviews");
  count("min_extraction_reviews");
  if (count("k") < 1) fail("k must be >= 1");
  count("nmf_max_iters");
  if (real("nmf_tol") < 0) fail("nmf_tol must be >= 0");
  if (count("k_max") < 1) fail("k_max must be >= 1");
  if (real("cos_min") < -1 || real("cos_min") > 1) fail("cos_min must be in [-1, 1]");
  if (real("sem_max") < 0 || real("sem_max") > 1) fail("sem_max must be in [0, 1]");
  count("min_neighbors");
  if (count("max_pairs_per_topic") < 1) fail("max_pairs_per_topic must be >= 1");
  flag("inject_gold");
  if (count("gold_window") < 2) fail("gold_window must be >= 2");
  count("min_gold");
  if (str("serve_phase") != "spans" && str("serve_phase") != "questions") {
    fail("serve_phase must be 'spans' or 'questions'");
  }
  if (integer("serve_port") < 0 || integer("serve_port") > 65535) {
    fail("serve_port must be in 0..65535");
  }
  const double tr = real("split_train"), dv = real("split_dev"), te = real("split_test");
  if (tr < 0 || dv < 0 || te < 0 || std::abs(tr + dv + te - 1.0) > 1e-9) {
    fail("split fractions must be non-negative and sum to 1");
  }
  if (!str("subj_threshold").empty()) {
    const auto th = integer("subj_threshold");
    if (th < 1 || th > 5) fail("subj_threshold must be in 1..5");
  }
  for (const char* k : {"mtl_emb_dim", "mtl_hidden", "mtl_proj", "mtl_subj_hidden"}) {
    if (integer(k) < 1) fail(std::string(k) + " must be >= 1");
  }
  if (integer("mtl_max_span_len") < 0) fail("mtl_max_span_len must be >= 0");
  flag("mtl_allow_no_answer");
  if (!(real("mtl_init_scale") > 0)) fail("mtl_init_scale must be > 0");
  if (count("mtl_min_count") < 1) fail("mtl_min_count must be >= 1");
  count("mtl_epochs");
  if (!(real("mtl_lr") > 0)) fail("mtl_lr must be > 0");
  const double p = real("mtl_task_sample_prob");
  if (p < 0 || p > 1) fail("mtl_task_sample_prob must be in [0, 1]");
}

std::string PipelineConfig::canonical() const {
  std::string s;
  for (const auto& [k, v] : values_) s += k + "=" + v + "\n";
  return s;
}

std::string PipelineConfig::hash() const { return sha256_hex(canonical()); }

StageResult run_stage(const std::string& stage, const PipelineConfig& config,
                      const fs::path& out_dir, const StageOptions& options) {
  const auto& stages = pipeline_stages();
  if (std::find(stages.begin(), stages.end(), stage) == stages.end()) {
    throw Error(ErrorKind::kParameter, "unknown stage '" + stage + "'");
  }
  config.validate();
  fs::create_directories(out_dir);
  StageRun run(stage, config, out_dir, options);
  if (stage == "ingest") stage_ingest(run, config, out_dir);
  else if (stage == "extract") stage_extract(run, config, out_dir);
  else if (stage == "factorize") stage_factorize(run, config, out_dir);
  else if (stage == "neighborhood") stage_neighborhood(run, config, out_dir);
  else if (stage == "topics") stage_topics(run, config, out_dir);
  else if (stage == "pair") stage_pair(run, config, out_dir);
  else if (stage == "tasks") stage_tasks(run, config, out_dir);
  else if (stage == "serve") stage_serve(run, config, out_dir, options);
  else if (stage == "assemble") stage_assemble(run, config, out_dir);
  else if (stage == "analyze") stage_analyze(run, config, out_dir);
  else if (stage == "train") stage_train(run, config, out_dir);
  else stage_evaluate(run, config, out_dir);
  return run.finish();
}

}  // namespace subjqa
