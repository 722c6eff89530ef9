#include "subjqa/subjectivity.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

const std::set<std::string>& abbreviations() {
  static const std::set<std::string> kAbbrev = {
      "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g",
      "i.e", "inc", "ltd", "co", "no", "vol", "fig", "approx", "dept", "mt"};
  return kAbbrev;
}

bool is_terminal(char c) { return c == '.' || c == '?' || c == '!'; }

// log(1 + exp(x)) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<std::string> ngrams(std::string_view text,
                                const std::vector<int>& orders) {
  const auto w = text_words(text);
  std::vector<std::string> out;
  for (int n : orders) {
    for (std::size_t i = 0; i + n <= w.size(); ++i) {
      std::string g = w[i];
      for (int k = 1; k < n; ++k) g += ' ' + w[i + k];
      out.push_back(std::move(g));
    }
  }
  return out;
}

struct Batch {
  std::vector<std::vector<std::size_t>> x;
  std::vector<double> y;
};

double batch_loss(const Batch& b, const std::vector<double>& w, double bias,
                  double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < b.x.size(); ++i) {
    double z = bias;
    for (std::size_t f : b.x[i]) z += w[f];
    loss += b.y[i] > 0.5 ? softplus(-z) : softplus(z);
  }
  loss /= static_cast<double>(b.x.size());
  double sq = 0.0;
  for (double v : w) sq += v * v;
  return loss + 0.5 * l2 * sq;
}

std::string pick(Rng& rng, const std::vector<std::string>& v) {
  return v[rng.below(v.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

}  // namespace

SubjectivityLexicon SubjectivityLexicon::parse(std::string_view contents) {
  SubjectivityLexicon lex;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(contents)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto tab = t.find('\t');
    if (tab == std::string::npos) {
      throw Error(ErrorKind::kInput, "subjectivity lexicon line " +
                                         std::to_string(line_no) +
                                         ": expected word<TAB>weight");
    }
    double w = 0.0;
    try {
      w = std::stod(t.substr(tab + 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::kInput, "subjectivity lexicon line " +
                                         std::to_string(line_no) +
                                         ": bad weight");
    }
    if (!(w >= 0.0 && w <= 1.0)) {
      throw Error(ErrorKind::kInput, "subjectivity lexicon line " +
                                         std::to_string(line_no) +
                                         ": weight outside [0,1]");
    }
    lex.weights[to_lower_ascii(trim(t.substr(0, tab)))] = w;
  }
  return lex;
}

SubjectivityLexicon SubjectivityLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

SubjectivityLexicon SubjectivityLexicon::load_default() {
  return load(std::filesystem::path(SUBJQA_DATA_DIR) / "lexicons" /
              "subjectivity.txt");
}

double lexicon_subjectivity(std::string_view sentence,
                            const SubjectivityLexicon& lexicon) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& w : text_words(sentence)) {
    auto it = lexicon.weights.find(w);
    if (it == lexicon.weights.end()) continue;
    sum += it->second;
    ++n;
  }
  return n ? sum / static_cast<double>(n) : 0.5;
}

std::vector<std::string> text_words(std::string_view text) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(text)) {
    const bool word = std::any_of(t.surface.begin(), t.surface.end(), [](char c) {
      return std::isalnum(static_cast<unsigned char>(c)) ||
             static_cast<unsigned char>(c) >= 0x80;
    });
    if (word) out.push_back(to_lower_ascii(t.surface));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t begin = 0;
  auto emit = [&](std::size_t end) {
    std::string s = trim(text.substr(begin, end - begin));
    if (!s.empty()) out.push_back(std::move(s));
    begin = end;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_terminal(text[i])) continue;
    std::size_t j = i;
    while (j < text.size() && is_terminal(text[j])) ++j;
    while (j < text.size() && (text[j] == '"' || text[j] == '\'' || text[j] == ')')) ++j;
    if (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
      i = j - 1;
      continue;
    }
    if (text[i] == '.' && j == i + 1) {
      // word right before the period
      std::size_t k = i;
      while (k > begin && !std::isspace(static_cast<unsigned char>(text[k - 1]))) --k;
      std::string word = to_lower_ascii(text.substr(k, i - k));
      while (!word.empty() && !std::isalnum(static_cast<unsigned char>(word.front()))) {
        word.erase(word.begin());
      }
      const bool single_letter =
          word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0]));
      if (single_letter || abbreviations().count(word)) continue;
    }
    emit(j);
    i = j - 1;
  }
  emit(text.size());
  return out;
}

std::vector<std::size_t> LinearTextModel::features(std::string_view text) const {
  std::vector<std::size_t> out;
  for (const auto& g : ngrams(text, orders)) {
    auto it = vocabulary.find(g);
    if (it != vocabulary.end()) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double LinearTextModel::probability(std::string_view text) const {
  double z = bias;
  for (std::size_t f : features(text)) z += weights[f];
  return sigmoid(z);
}

void LinearTextModel::save(const std::filesystem::path& path) const {
  json vocab = json::object();
  for (const auto& [g, i] : vocabulary) vocab[g] = i;
  json j = {{"schema", "subjqa.linear_text_model.v1"},
            {"orders", orders},
            {"seed", seed},
            {"bias", bias},
            {"vocabulary", vocab},
            {"weights", weights},
            {"loss_history", loss_history}};
  write_file(path, j.dump() + "\n");
}

LinearTextModel LinearTextModel::load(const std::filesystem::path& path) {
  const json j = json::parse(read_file(path));
  if (j.value("schema", "") != "subjqa.linear_text_model.v1") {
    throw Error(ErrorKind::kInput, path.string() + ": not a linear text model");
  }
  LinearTextModel m;
  m.orders = j.at("orders").get<std::vector<int>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.bias = j.at("bias").get<double>();
  for (const auto& [g, i] : j.at("vocabulary").items()) {
    m.vocabulary[g] = i.get<std::size_t>();
  }
  m.weights = j.at("weights").get<std::vector<double>>();
  m.loss_history = j.at("loss_history").get<std::vector<double>>();
  if (m.weights.size() != m.vocabulary.size()) {
    throw Error(ErrorKind::kInput, path.string() + ": weight/vocabulary size mismatch");
  }
  return m;
}

LinearTextModel train_linear_model(const std::vector<LabeledText>& data,
                                   const LinearTrainConfig& config) {
  std::size_t pos = 0;
  for (const auto& d : data) pos += d.label;
  if (pos == 0 || pos == data.size()) {
    throw Error(ErrorKind::kParameter,
                "training data must contain both classes");
  }
  if (config.orders.empty() || config.epochs < 0 || !(config.lr > 0)) {
    throw Error(ErrorKind::kParameter, "bad linear model config");
  }
  LinearTextModel m;
  m.orders = config.orders;
  m.seed = config.seed;
  std::map<std::string, std::size_t> counts;
  for (const auto& d : data) {
    auto g = ngrams(d.text, m.orders);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    for (auto& s : g) ++counts[s];
  }
  for (const auto& [g, c] : counts) {
    if (c >= config.min_count) {
      const std::size_t idx = m.vocabulary.size();
      m.vocabulary[g] = idx;
    }
  }
  m.weights.assign(m.vocabulary.size(), 0.0);
  Batch b;
  for (const auto& d : data) {
    b.x.push_back(m.features(d.text));
    b.y.push_back(d.label ? 1.0 : 0.0);
  }
  const double inv_n = 1.0 / static_cast<double>(data.size());
  double loss = batch_loss(b, m.weights, m.bias, config.l2);
  m.loss_history.push_back(loss);
  std::vector<double> grad(m.weights.size()), trial(m.weights.size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gbias = 0.0;
    for (std::size_t i = 0; i < b.x.size(); ++i) {
      double z = m.bias;
      for (std::size_t f : b.x[i]) z += m.weights[f];
      const double r = (sigmoid(z) - b.y[i]) * inv_n;
      gbias += r;
      for (std::size_t f : b.x[i]) grad[f] += r;
    }
    for (std::size_t f = 0; f < grad.size(); ++f) grad[f] += config.l2 * m.weights[f];
    double step = config.lr;
    bool accepted = false;
    for (int halving = 0; halving < 40; ++halving, step *= 0.5) {
      for (std::size_t f = 0; f < grad.size(); ++f) {
        trial[f] = m.weights[f] - step * grad[f];
      }
      const double trial_bias = m.bias - step * gbias;
      const double trial_loss = batch_loss(b, trial, trial_bias, config.l2);
      if (!std::isfinite(trial_loss)) continue;
      if (trial_loss <= loss) {
        m.weights.swap(trial);
        m.bias = trial_bias;
        loss = trial_loss;
        accepted = true;
        break;
      }
    }
    m.loss_history.push_back(loss);
    if (!accepted) break;
  }
  return m;
}

double accuracy(const LinearTextModel& model,
                const std::vector<LabeledText>& data) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& d : data) ok += model.predict(d.text) == d.label;
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

std::string_view to_string(FilterMode m) {
  return m == FilterMode::kSubjective ? "subjective" : "objective";
}

std::vector<std::size_t> top_n_indices(const std::vector<std::string>& sentences,
                                       std::size_t n, FilterMode mode,
                                       const SentenceScorer& scorer) {
  if (n == 0) throw Error(ErrorKind::kParameter, "top_n_filter needs n >= 1");
  std::vector<std::size_t> idx(sentences.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (sentences.size() <= n) return idx;
  std::vector<double> score(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) score[i] = scorer(sentences[i]);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return mode == FilterMode::kSubjective ? score[a] > score[b]
                                           : score[a] < score[b];
  });
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::string> top_n_filter(const std::vector<std::string>& sentences,
                                      std::size_t n, FilterMode mode,
                                      const SentenceScorer& scorer) {
  std::vector<std::string> out;
  for (std::size_t i : top_n_indices(sentences, n, mode, scorer)) {
    out.push_back(sentences[i]);
  }
  return out;
}

std::vector<SentimentRow> sentiment_experiment(
    const std::vector<LabeledText>& documents,
    const std::vector<std::size_t>& n_values, const SentenceScorer& scorer,
    std::uint64_t seed, const SentimentConfig& config) {
  if (n_values.empty()) {
    throw Error(ErrorKind::kParameter, "sentiment experiment needs n values");
  }
  if (documents.size() < 4) {
    throw Error(ErrorKind::kParameter, "sentiment experiment needs >= 4 documents");
  }
  std::vector<std::size_t> order(documents.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const auto cut = static_cast<std::size_t>(
      std::floor(config.train_fraction * static_cast<double>(order.size())));
  std::vector<std::vector<std::string>> sents;
  for (const auto& d : documents) sents.push_back(split_sentences(d.text));

  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) {
      if (!s.empty()) s += ' ';
      s += x;
    }
    return s;
  };
  auto run = [&](auto&& view) {
    std::vector<LabeledText> train, test;
    for (std::size_t k = 0; k < order.size(); ++k) {
      const std::size_t i = order[k];
      LabeledText t{view(i), documents[i].label};
      (k < cut ? train : test).push_back(std::move(t));
    }
    LinearTrainConfig mc = config.model;
    mc.seed = seed;
    return accuracy(train_linear_model(train, mc), test);
  };

  std::vector<SentimentRow> rows;
  rows.push_back({0, "all", run([&](std::size_t i) { return join(sents[i]); })});
  for (std::size_t n : n_values) {
    for (FilterMode mode : {FilterMode::kSubjective, FilterMode::kObjective}) {
      const double acc = run([&](std::size_t i) {
        return join(top_n_filter(sents[i], n, mode, scorer));
      });
      rows.push_back({n, std::string(to_string(mode)), acc});
    }
  }
  return rows;
}

std::string sentiment_table(const std::vector<SentimentRow>& rows) {
  std::string out = tsv_line({"n", "mode", "accuracy"});
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.4f", r.accuracy);
    out += tsv_line({r.n ? std::to_string(r.n) : "all", r.mode, buf});
  }
  return out;
}

std::vector<LabeledText> synthetic_subjectivity_corpus(std::size_t n,
                                                       std::uint64_t seed) {
  static const std::vector<std::string> aspects = {
      "plot", "ending", "writing", "hotel room", "service", "battery", "screen",
      "soundtrack", "acting", "coffee", "price", "staff", "breakfast", "camera",
      "dialogue", "villain", "lobby", "pasta", "lens", "keyboard"};
  static const std::vector<std::string> evaluative = {
      "amazing", "awful", "wonderful", "boring", "stunning", "dreadful",
      "gorgeous", "overrated", "charming", "pathetic", "delightful", "mediocre",
      "brilliant", "lame", "superb", "tedious", "lovely", "clunky"};
  static const std::vector<std::string> feelings = {
      "love", "hate", "adore", "loathe", "enjoyed", "disliked", "admire", "regret"};
  static const std::vector<std::string> hedges = {
      "honestly", "really", "frankly", "personally", "truly", "somehow"};
  static const std::vector<std::string> facts = {
      "was released in", "was built in", "was renovated in", "was published in",
      "was first sold in", "was redesigned in"};
  static const std::vector<std::string> units = {
      "pages", "chapters", "rooms", "minutes", "floors", "grams", "volts", "episodes"};
  static const std::vector<std::string> places = {
      "near the station", "on the second floor", "in the old town",
      "next to the harbor", "behind the museum", "across from the park"};
  static const std::vector<std::string> colors = {
      "black", "white", "red", "blue", "silver", "green"};
  Rng rng(seed);
  std::vector<LabeledText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const bool subj = rng.bernoulli(0.5);
    const std::string a = pick(rng, aspects);
    std::string s;
    if (subj) {
      switch (rng.below(5)) {
        case 0: s = "the " + a + " is " + pick(rng, evaluative); break;
        case 1: s = "i " + pick(rng, hedges) + " " + pick(rng, feelings) + " the " + a; break;
        case 2: s = "what a " + pick(rng, evaluative) + " " + a; break;
        case 3: s = "in my opinion the " + a + " feels " + pick(rng, evaluative); break;
        // factual frame with an evaluative word
        default: s = "the " + a + " " + pick(rng, facts) + " " +
                     std::to_string(1950 + rng.below(70)) + " and it is " +
                     pick(rng, evaluative);
      }
    } else {
      switch (rng.below(5)) {
        case 0: s = "the " + a + " " + pick(rng, facts) + " " + std::to_string(1950 + rng.below(70)); break;
        case 1: s = "it has " + std::to_string(2 + rng.below(400)) + " " + pick(rng, units); break;
        case 2: s = "the " + a + " is located " + pick(rng, places); break;
        case 3: s = "the " + a + " is " + pick(rng, colors) + " and weighs " +
                    std::to_string(1 + rng.below(900)) + " grams"; break;
        // reported opinion words inside a factual statement
        default: s = "the review called the " + a + " " + pick(rng, evaluative) +
                     " in " + std::to_string(1990 + rng.below(30));
      }
    }
    out.push_back({capitalize(s) + ".", subj});
  }
  return out;
}

std::vector<LabeledText> synthetic_sentiment_corpus(std::size_t n_docs,
                                                    std::size_t sentences_per_doc,
                                                    std::uint64_t seed) {
  if (sentences_per_doc < 3) {
    throw Error(ErrorKind::kParameter, "need at least 3 sentences per document");
  }
  static const std::vector<std::string> aspects = {
      "plot", "ending", "writing", "room", "service", "battery", "screen",
      "acting", "coffee", "staff", "breakfast", "camera"};
  static const std::vector<std::string> positive = {
      "wonderful", "brilliant", "superb", "delightful", "lovely", "amazing"};
  static const std::vector<std::string> negative = {
      "dreadful", "pathetic", "tedious", "awful", "lame", "boring"};
  static const std::vector<std::string> places = {
      "near the station", "on the second floor", "in the old town",
      "next to the harbor"};
  static const std::vector<std::string> units = {"pages", "chapters", "rooms",
                                                 "minutes", "floors"};
  Rng rng(seed);
  std::vector<LabeledText> out;
  for (std::size_t d = 0; d < n_docs; ++d) {
    const bool label = rng.bernoulli(0.5);
    const std::size_t n_subj = 1 + rng.below(sentences_per_doc / 2);
    std::vector<bool> is_subj(sentences_per_doc, false);
    for (std::size_t k = 0; k < n_subj; ++k) is_subj[k] = true;
    for (std::size_t i = is_subj.size(); i > 1; --i) {
      const std::size_t j = rng.below(i);
      const bool tmp = is_subj[i - 1];
      is_subj[i - 1] = is_subj[j];
      is_subj[j] = tmp;
    }
    std::string text;
    for (bool subj : is_subj) {
      const std::string a = pick(rng, aspects);
      std::string s;
      if (subj) {
        const auto& words = label ? positive : negative;
        s = rng.bernoulli(0.5) ? "the " + a + " is " + pick(rng, words)
                               : "in my opinion the " + a + " feels " + pick(rng, words);
      } else {
        switch (rng.below(3)) {
          case 0: s = "the " + a + " was released in " + std::to_string(1950 + rng.below(70)); break;
          case 1: s = "it has " + std::to_string(2 + rng.below(400)) + " " + pick(rng, units); break;
          default: s = "the " + a + " is located " + pick(rng, places);
        }
      }
      if (!text.empty()) text += ' ';
      text += capitalize(s) + ".";
    }
    out.push_back({text, label});
  }
  return out;
}

std::vector<LabeledText> load_subjectivity_corpus(const std::filesystem::path& path) {
  std::vector<LabeledText> out;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      const std::string name = e.path().filename().string();
      const bool subj = name.rfind("quote", 0) == 0;
      const bool obj = name.rfind("plot", 0) == 0;
      if (!subj && !obj) continue;
      const std::string file_text = read_file(e.path());
      for (std::string_view line : split_lines(file_text)) {
        std::string t = trim(line);
        if (!t.empty()) out.push_back({t, subj});
      }
    }
    std::sort(out.begin(), out.end(), [](const LabeledText& a, const LabeledText& b) {
      return std::tie(a.label, a.text) < std::tie(b.label, b.text);
    });
    return out;
  }
  std::size_t line_no = 0;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw Error(ErrorKind::kInput, path.string() + ": line " +
                                         std::to_string(line_no) +
                                         " lacks a label column");
    }
    const std::string label = to_lower_ascii(trim(line.substr(0, tab)));
    bool subj;
    if (label == "1" || label == "subj" || label == "subjective") subj = true;
    else if (label == "0" || label == "obj" || label == "objective") subj = false;
    else throw Error(ErrorKind::kInput, path.string() + ": line " +
                                            std::to_string(line_no) +
                                            ": unknown label '" + label + "'");
    out.push_back({trim(line.substr(tab + 1)), subj});
  }
  return out;
}

}  // namespace subjqa
