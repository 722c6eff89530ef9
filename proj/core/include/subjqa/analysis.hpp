#ifndef SUBJQA_ANALYSIS_HPP_
#define SUBJQA_ANALYSIS_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "subjqa/dataset.hpp"

namespace subjqa {

// Subjectivity scores run 1..5 with 5 the most subjective; a score is
// subjective when score >= threshold.
inline bool is_subjective(int score, int threshold) {
  return score >= threshold;
}

struct DomainStats {
  std::string domain;
  std::size_t n_train = 0, n_dev = 0, n_test = 0, n_total = 0;
  // Token means; absent when there is nothing to average.
  std::optional<double> mean_review_len, mean_q_len, mean_a_len;
  std::optional<double> pct_answerable;
  std::optional<double> pct_subj_q;
  std::optional<double> pct_subj_a;  // over answerable examples
  std::size_t n_distinct_questions = 0;
  std::size_t n_distinct_topics = 0;
  std::optional<double> pct_boolean_q;
};

struct SubjectivityJoint {
  // Percentages over answerable examples.
  double subjq_subja = 0, factq_subja = 0, subjq_facta = 0, factq_facta = 0;
  std::size_t n = 0;
};

struct PrefixLexicon {
  std::set<std::string> prefixes;  // lowercase, one or two words

  static PrefixLexicon defaults();
  static PrefixLexicon parse(std::string_view contents);
  static PrefixLexicon load(const std::filesystem::path& path);
};

// n -> prefix -> relative frequency.
using PrefixDistribution = std::map<int, std::map<std::string, double>>;

// Lowercased word tokens (punctuation dropped).
std::vector<std::string> question_words(std::string_view question);

// Whitespace-collapsed, trimmed form used to count distinct questions.
std::string normalize_question(std::string_view question);

bool detect_boolean(std::string_view question, const PrefixLexicon& lexicon);

std::map<std::string, DomainStats> domain_stats(
    const std::vector<AnnotatedExample>& examples, int subj_threshold,
    const PrefixLexicon& lexicon = PrefixLexicon::defaults());

// Absent when no example is answerable.
std::optional<SubjectivityJoint> subjectivity_joint(
    const std::vector<AnnotatedExample>& examples, int subj_threshold);

// Questions shorter than n words do not contribute to order n.
PrefixDistribution prefix_distribution(const std::vector<std::string>& questions,
                                       int max_n = 3);

// Nested {name, value, children} JSON tree over the prefix levels for
// sunburst-style plotting.
std::string prefix_tree_json(const std::vector<std::string>& questions,
                           int max_n = 3);

struct AnalysisReport {
  int subj_threshold = 0;
  std::map<std::string, DomainStats> per_domain;
  std::optional<SubjectivityJoint> joint;
  PrefixDistribution prefixes;
};

AnalysisReport analyze(const std::vector<AnnotatedExample>& examples,
                       int subj_threshold,
                       const PrefixLexicon& lexicon = PrefixLexicon::defaults());

std::string stats_table(const AnalysisReport& report);
std::string prefix_table(const AnalysisReport& report);
std::string summary_text(const AnalysisReport& report);

// stats.tsv, prefixes.tsv, prefix_tree.json and summary.txt.
std::vector<std::filesystem::path> write_report(
    const AnalysisReport& report,
    const std::vector<AnnotatedExample>& examples,
    const std::filesystem::path& out_dir);

}  // namespace subjqa

#endif  // SUBJQA_ANALYSIS_HPP_
