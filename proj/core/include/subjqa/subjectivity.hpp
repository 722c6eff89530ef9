#ifndef SUBJQA_SUBJECTIVITY_HPP_
#define SUBJQA_SUBJECTIVITY_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace subjqa {

struct SubjectivityLexicon {
  std::map<std::string, double> weights;  // lowercase word -> [0,1]

  // word<TAB>weight per line, '#' comments.
  static SubjectivityLexicon parse(std::string_view contents);
  static SubjectivityLexicon load(const std::filesystem::path& path);
  // data/lexicons/subjectivity.txt
  static SubjectivityLexicon load_default();
};

// Mean weight of the matched words; 0.5 when nothing matches.
double lexicon_subjectivity(std::string_view sentence,
                            const SubjectivityLexicon& lexicon);

// Lowercase word tokens (punctuation dropped).
std::vector<std::string> text_words(std::string_view text);

// Splits on . ? ! (runs included) followed by whitespace or end of text.
// A period after a known abbreviation or a single letter does not split.
std::vector<std::string> split_sentences(std::string_view text);

struct LabeledText {
  std::string text;
  bool label = false;  // subjective / positive
};

struct LinearTrainConfig {
  std::vector<int> orders = {1, 2};
  int epochs = 100;
  double lr = 1.0;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
  std::size_t min_count = 1;  // drop n-grams seen fewer times in training
};

// Logistic regression over binary n-gram presence features.
class LinearTextModel {
 public:
  std::vector<int> orders;
  std::map<std::string, std::size_t> vocabulary;
  std::vector<double> weights;
  double bias = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> loss_history;  // training loss after each epoch; [0] = init

  // Sorted, de-duplicated feature indices of a text.
  std::vector<std::size_t> features(std::string_view text) const;
  double probability(std::string_view text) const;
  bool predict(std::string_view text) const { return probability(text) >= 0.5; }

  void save(const std::filesystem::path& path) const;
  static LinearTextModel load(const std::filesystem::path& path);
};

// Full-batch gradient descent; a step that would raise the training loss
// is halved until it does not, so the loss never increases. Throws
// Error(kParameter) when only one class is present.
LinearTextModel train_linear_model(const std::vector<LabeledText>& data,
                                   const LinearTrainConfig& config);

double accuracy(const LinearTextModel& model,
                const std::vector<LabeledText>& data);

using SentenceScorer = std::function<double(std::string_view)>;

enum class FilterMode { kSubjective, kObjective };
std::string_view to_string(FilterMode m);

// Indices of the n highest (subjective) or lowest (objective) scoring
// sentences, in document order. Ties keep the earlier sentence.
std::vector<std::size_t> top_n_indices(const std::vector<std::string>& sentences,
                                       std::size_t n, FilterMode mode,
                                       const SentenceScorer& scorer);
std::vector<std::string> top_n_filter(const std::vector<std::string>& sentences,
                                      std::size_t n, FilterMode mode,
                                      const SentenceScorer& scorer);

struct SentimentRow {
  std::size_t n = 0;  // 0 = all sentences
  std::string mode;   // subjective | objective | all
  double accuracy = 0.0;
};

struct SentimentConfig {
  double train_fraction = 0.7;
  LinearTrainConfig model;
};

// Documents are split once (seeded) into train and test; the same
// classifier class is trained on each filtered view.
std::vector<SentimentRow> sentiment_experiment(
    const std::vector<LabeledText>& documents,
    const std::vector<std::size_t>& n_values, const SentenceScorer& scorer,
    std::uint64_t seed, const SentimentConfig& config = {});

std::string sentiment_table(const std::vector<SentimentRow>& rows);

// Generated corpora for desk-scale experiments. Subjective sentences carry
// evaluative wording, objective ones factual wording; a share of each
// borrows the other's vocabulary so neither class is trivially separable.
std::vector<LabeledText> synthetic_subjectivity_corpus(std::size_t n,
                                                       std::uint64_t seed);
// Review documents whose sentiment words appear only in subjective
// sentences. Every document has exactly `sentences_per_doc` sentences.
std::vector<LabeledText> synthetic_sentiment_corpus(std::size_t n_docs,
                                                    std::size_t sentences_per_doc,
                                                    std::uint64_t seed);

// "label<TAB>sentence" lines (label 1/0 or subj/obj), or a directory with
// the two files of the classic subjectivity corpus (quote.* subjective,
// plot.* objective).
std::vector<LabeledText> load_subjectivity_corpus(const std::filesystem::path& path);

}  // namespace subjqa

#endif  // SUBJQA_SUBJECTIVITY_HPP_
