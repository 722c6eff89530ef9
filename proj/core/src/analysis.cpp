#include "subjqa/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

bool has_alnum(std::string_view s) {
  for (unsigned char c : s) {
    if (std::isalnum(c) || c >= 0x80) return true;
  }
  return false;
}

std::optional<double> pct(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::optional<double> mean(double sum, std::size_t n) {
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string fmt(const std::optional<double>& v, int digits = 2) {
  if (!v) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, *v);
  return buf;
}

std::string join_prefix(const std::vector<std::string>& w, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += w[i];
  }
  return out;
}

}  // namespace

PrefixLexicon PrefixLexicon::defaults() {
  PrefixLexicon lex;
  lex.prefixes = {"is",   "are",  "was",   "were", "does",   "do",
                  "did",  "can",  "could", "will", "would",  "has",
                  "have", "should", "is there", "are there"};
  return lex;
}

PrefixLexicon PrefixLexicon::parse(std::string_view contents) {
  PrefixLexicon lex;
  for (std::string_view line : split_lines(contents)) {
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    lex.prefixes.insert(normalize_question(to_lower_ascii(t)));
  }
  return lex;
}

PrefixLexicon PrefixLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::vector<std::string> question_words(std::string_view question) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(question)) {
    if (has_alnum(t.surface)) out.push_back(to_lower_ascii(t.surface));
  }
  return out;
}

std::string normalize_question(std::string_view question) {
  std::string out;
  bool pending = false;
  for (char c : question) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out += ' ';
    pending = false;
    out += c;
  }
  return out;
}

bool detect_boolean(std::string_view question, const PrefixLexicon& lexicon) {
  const auto w = question_words(question);
  if (w.empty()) return false;
  if (lexicon.prefixes.count(w[0])) return true;
  return w.size() >= 2 && lexicon.prefixes.count(w[0] + " " + w[1]);
}

std::map<std::string, DomainStats> domain_stats(
    const std::vector<AnnotatedExample>& examples, int subj_threshold,
    const PrefixLexicon& lexicon) {
  struct Acc {
    double review_len = 0, q_len = 0, a_len = 0;
    std::size_t answerable = 0, subj_q = 0, subj_a = 0, boolean = 0;
    std::set<std::string> questions, topics;
  };
  std::map<std::string, DomainStats> out;
  std::map<std::string, Acc> acc;
  for (const auto& ex : examples) {
    DomainStats& d = out[ex.domain];
    Acc& a = acc[ex.domain];
    d.domain = ex.domain;
    switch (ex.split) {
      case Split::kTrain: ++d.n_train; break;
      case Split::kDev: ++d.n_dev; break;
      case Split::kTest: ++d.n_test; break;
    }
    ++d.n_total;
    a.review_len += static_cast<double>(tokenize(ex.review_text).size());
    a.q_len += static_cast<double>(tokenize(ex.question_text).size());
    if (ex.answer) {
      ++a.answerable;
      a.a_len += static_cast<double>(tokenize(ex.answer->surface).size());
      if (ex.answer_subj_score &&
          is_subjective(*ex.answer_subj_score, subj_threshold)) {
        ++a.subj_a;
      }
    }
    if (is_subjective(ex.question_subj_score, subj_threshold)) ++a.subj_q;
    if (detect_boolean(ex.question_text, lexicon)) ++a.boolean;
    a.questions.insert(normalize_question(ex.question_text));
    a.topics.insert(ex.topic_key);
  }
  for (auto& [domain, d] : out) {
    const Acc& a = acc[domain];
    d.mean_review_len = mean(a.review_len, d.n_total);
    d.mean_q_len = mean(a.q_len, d.n_total);
    d.mean_a_len = mean(a.a_len, a.answerable);
    d.pct_answerable = pct(a.answerable, d.n_total);
    d.pct_subj_q = pct(a.subj_q, d.n_total);
    d.pct_subj_a = pct(a.subj_a, a.answerable);
    d.pct_boolean_q = pct(a.boolean, d.n_total);
    d.n_distinct_questions = a.questions.size();
    d.n_distinct_topics = a.topics.size();
  }
  return out;
}

std::optional<SubjectivityJoint> subjectivity_joint(
    const std::vector<AnnotatedExample>& examples, int subj_threshold) {
  std::size_t cell[2][2] = {{0, 0}, {0, 0}};  // [subjQ][subjA]
  std::size_t n = 0;
  for (const auto& ex : examples) {
    if (!ex.answer || !ex.answer_subj_score) continue;
    const int q = is_subjective(ex.question_subj_score, subj_threshold);
    const int a = is_subjective(*ex.answer_subj_score, subj_threshold);
    ++cell[q][a];
    ++n;
  }
  if (n == 0) return std::nullopt;
  SubjectivityJoint j;
  j.n = n;
  j.subjq_subja = *pct(cell[1][1], n);
  j.factq_subja = *pct(cell[0][1], n);
  j.subjq_facta = *pct(cell[1][0], n);
  j.factq_facta = *pct(cell[0][0], n);
  return j;
}

PrefixDistribution prefix_distribution(const std::vector<std::string>& questions,
                                       int max_n) {
  if (max_n < 1) throw Error(ErrorKind::kParameter, "max_n must be >= 1");
  std::map<int, std::map<std::string, std::size_t>> counts;
  std::map<int, std::size_t> totals;
  for (const auto& q : questions) {
    const auto w = question_words(q);
    for (int n = 1; n <= max_n && n <= static_cast<int>(w.size()); ++n) {
      ++counts[n][join_prefix(w, n)];
      ++totals[n];
    }
  }
  PrefixDistribution out;
  for (const auto& [n, m] : counts) {
    for (const auto& [p, c] : m) {
      out[n][p] = static_cast<double>(c) / static_cast<double>(totals[n]);
    }
  }
  return out;
}

std::string prefix_tree_json(const std::vector<std::string>& questions,
                             int max_n) {
  struct Node {
    std::size_t count = 0;
    std::map<std::string, Node> children;
  };
  Node root;
  for (const auto& q : questions) {
    const auto w = question_words(q);
    Node* cur = &root;
    ++cur->count;
    for (int n = 0; n < max_n && n < static_cast<int>(w.size()); ++n) {
      cur = &cur->children[w[n]];
      ++cur->count;
    }
  }
  auto to_json = [&](auto&& self, const std::string& name,
                     const Node& node) -> json {
    json j = {{"name", name},
              {"value", node.count},
              {"share", root.count ? static_cast<double>(node.count) /
                                         static_cast<double>(root.count)
                                   : 0.0}};
    if (!node.children.empty()) {
      j["children"] = json::array();
      for (const auto& [k, child] : node.children) {
        j["children"].push_back(self(self, k, child));
      }
    }
    return j;
  };
  return to_json(to_json, "questions", root).dump(1) + "\n";
}

AnalysisReport analyze(const std::vector<AnnotatedExample>& examples,
                       int subj_threshold, const PrefixLexicon& lexicon) {
  if (subj_threshold < 1 || subj_threshold > 5) {
    throw Error(ErrorKind::kParameter, "subj_threshold must be in 1..5");
  }
  AnalysisReport r;
  r.subj_threshold = subj_threshold;
  r.per_domain = domain_stats(examples, subj_threshold, lexicon);
  r.joint = subjectivity_joint(examples, subj_threshold);
  std::vector<std::string> qs;
  for (const auto& ex : examples) qs.push_back(ex.question_text);
  r.prefixes = prefix_distribution(qs, 3);
  return r;
}

std::string stats_table(const AnalysisReport& r) {
  std::string out = tsv_line({"domain", "n_train", "n_dev", "n_test", "n_total",
                              "mean_review_len", "mean_q_len", "mean_a_len",
                              "pct_answerable", "pct_subj_q", "pct_subj_a",
                              "n_distinct_questions", "n_distinct_topics",
                              "pct_boolean_q", "subj_threshold"});
  for (const auto& [domain, d] : r.per_domain) {
    out += tsv_line({domain, std::to_string(d.n_train), std::to_string(d.n_dev),
                     std::to_string(d.n_test), std::to_string(d.n_total),
                     fmt(d.mean_review_len), fmt(d.mean_q_len),
                     fmt(d.mean_a_len), fmt(d.pct_answerable),
                     fmt(d.pct_subj_q), fmt(d.pct_subj_a),
                     std::to_string(d.n_distinct_questions),
                     std::to_string(d.n_distinct_topics), fmt(d.pct_boolean_q),
                     std::to_string(r.subj_threshold)});
  }
  return out;
}

std::string prefix_table(const AnalysisReport& r) {
  std::string out = tsv_line({"n", "prefix", "frequency"});
  for (const auto& [n, m] : r.prefixes) {
    for (const auto& [p, f] : m) {
      out += tsv_line({std::to_string(n), p, fmt(f, 6)});
    }
  }
  return out;
}

std::string summary_text(const AnalysisReport& r) {
  std::ostringstream os;
  char line[256];
  os << "subjectivity threshold: score >= " << r.subj_threshold << "\n\n";
  std::snprintf(line, sizeof line, "%-14s %7s %7s %7s %7s\n", "domain", "train",
                "dev", "test", "total");
  os << "split sizes\n" << line;
  for (const auto& [domain, d] : r.per_domain) {
    std::snprintf(line, sizeof line, "%-14s %7zu %7zu %7zu %7zu\n",
                  domain.c_str(), d.n_train, d.n_dev, d.n_test, d.n_total);
    os << line;
  }
  os << "\nmean lengths (tokens)\n";
  std::snprintf(line, sizeof line, "%-14s %9s %9s %9s\n", "domain", "review",
                "question", "answer");
  os << line;
  for (const auto& [domain, d] : r.per_domain) {
    std::snprintf(line, sizeof line, "%-14s %9s %9s %9s\n", domain.c_str(),
                  fmt(d.mean_review_len).c_str(), fmt(d.mean_q_len).c_str(),
                  fmt(d.mean_a_len).c_str());
    os << line;
  }
  os << "\nsubjectivity and answerability (%)\n";
  std::snprintf(line, sizeof line, "%-14s %8s %10s %8s %8s %8s %8s\n", "domain",
                "subj Q", "answerable", "subj A", "bool Q", "#quest",
                "#topics");
  os << line;
  for (const auto& [domain, d] : r.per_domain) {
    std::snprintf(line, sizeof line, "%-14s %8s %10s %8s %8s %8zu %8zu\n",
                  domain.c_str(), fmt(d.pct_subj_q).c_str(),
                  fmt(d.pct_answerable).c_str(), fmt(d.pct_subj_a).c_str(),
                  fmt(d.pct_boolean_q).c_str(), d.n_distinct_questions,
                  d.n_distinct_topics);
    os << line;
  }
  os << "\njoint subjectivity over answerable examples (%)\n";
  if (r.joint) {
    std::snprintf(line, sizeof line,
                  "%12s %10s %10s\n%12s %10.2f %10.2f\n%12s %10.2f %10.2f\n",
                  "", "subj Q", "fact Q", "subj A", r.joint->subjq_subja,
                  r.joint->factq_subja, "fact A", r.joint->subjq_facta,
                  r.joint->factq_facta);
    os << line << "(n = " << r.joint->n << ")\n";
  } else {
    os << "NA (no answerable examples)\n";
  }
  if (auto it = r.prefixes.find(1); it != r.prefixes.end()) {
    std::vector<std::pair<double, std::string>> top;
    for (const auto& [p, f] : it->second) top.emplace_back(-f, p);
    std::sort(top.begin(), top.end());
    os << "\nmost frequent first words\n";
    for (std::size_t i = 0; i < top.size() && i < 10; ++i) {
      std::snprintf(line, sizeof line, "%-12s %6.2f%%\n", top[i].second.c_str(),
                    -100.0 * top[i].first);
      os << line;
    }
  }
  return os.str();
}

std::vector<std::filesystem::path> write_report(
    const AnalysisReport& report,
    const std::vector<AnnotatedExample>& examples,
    const std::filesystem::path& out_dir) {
  std::vector<std::string> qs;
  for (const auto& ex : examples) qs.push_back(ex.question_text);
  std::vector<std::filesystem::path> paths = {
      out_dir / "stats.tsv", out_dir / "prefixes.tsv",
      out_dir / "prefix_tree.json", out_dir / "summary.txt"};
  write_file(paths[0], stats_table(report));
  write_file(paths[1], prefix_table(report));
  write_file(paths[2], prefix_tree_json(qs, 3));
  write_file(paths[3], summary_text(report));
  return paths;
}

}  // namespace subjqa
