#ifndef SUBJQA_MTL_HPP_
#define SUBJQA_MTL_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "subjqa/dataset.hpp"

namespace subjqa {

// Lowercased word vocabulary; id 0 is the unknown word.
class WordVocabulary {
 public:
  WordVocabulary();
  std::size_t size() const { return words_.size(); }
  int id(const std::string& word) const;  // 0 if unknown
  int add(const std::string& word);
  const std::string& word(int id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> ids_;
};

struct MtlExample {
  std::vector<int> question_ids;
  std::vector<int> review_ids;
  std::vector<std::string> review_words;  // for token-F1
  // Inclusive token span; empty = unanswerable.
  std::optional<std::pair<int, int>> span;
  // 0 = subjective, 1 = factual; empty when unlabeled.
  std::optional<int> subj_label;
  int question_subj_score = 0;
  std::optional<int> answer_subj_score;
};

// Builds a vocabulary from the question and review words of `examples`.
WordVocabulary build_vocabulary(const std::vector<AnnotatedExample>& examples,
                                std::size_t min_count = 1);

// Converts an assembled example; spans map to the tokens they cover.
// The subjectivity target is the question's (score >= threshold).
MtlExample make_mtl_example(const AnnotatedExample& ex,
                            const WordVocabulary& vocab, int subj_threshold);

struct MtlConfig {
  std::size_t vocab_size = 1;
  int emb_dim = 16;
  int hidden = 16;     // per direction
  int proj = 16;       // rows of H
  int subj_hidden = 8; // rows of S'
  int max_span_len = 30;
  bool allow_no_answer = true;
  // Degenerate config: the recurrence is skipped, H' = X~ and H = B H'.
  bool linear = false;
  double init_scale = 0.5;
};

// Every tensor is a dense matrix; vectors are single columns.
struct MtlParams {
  MtlConfig config;
  std::uint64_t seed = 0;
  Eigen::MatrixXd E;            // vocab x emb
  Eigen::MatrixXd Wf, Uf;       // forward LSTM: 4h x (emb+1), 4h x h
  Eigen::MatrixXd Wb, Ub;       // backward LSTM
  Eigen::MatrixXd B;            // proj x 2h (proj x (emb+1) when linear)
  Eigen::MatrixXd ws, Qs;       // start: proj x 1, proj x emb
  Eigen::MatrixXd we, Qe, M;    // end: proj x 1, proj x emb, proj x proj
  Eigen::MatrixXd na;           // 1 x 1 no-answer logit
  Eigen::MatrixXd W1;           // subj_hidden x proj
  Eigen::MatrixXd W2;           // 2 x subj_hidden

  static MtlParams init(const MtlConfig& config, std::uint64_t seed);
  std::vector<std::pair<std::string, Eigen::MatrixXd*>> tensors();
  std::vector<std::pair<std::string, const Eigen::MatrixXd*>> tensors() const;
  std::size_t parameter_count() const;
  // Throws Error(kIntegrity) on any shape inconsistency.
  void validate() const;

  void save(const std::filesystem::path& path,
            const WordVocabulary* vocab = nullptr) const;
  static MtlParams load(const std::filesystem::path& path,
                        WordVocabulary* vocab = nullptr);
  friend bool operator==(const MtlParams& a, const MtlParams& b);
};

struct Encoding {
  Eigen::MatrixXd X;   // (emb+1) x n, the input features
  Eigen::MatrixXd Hp;  // H': 2h x n (X when linear)
  Eigen::MatrixXd H;   // proj x n
  Eigen::VectorXd q;   // mean question embedding
  // LSTM caches, gate order i f o g.
  Eigen::MatrixXd gates_f, cells_f, gates_b, cells_b;
};

Encoding encode(const MtlExample& ex, const MtlParams& params);

struct SpanPrediction {
  bool no_answer = true;
  int start = 0, end = 0;
  double score = 0.0;
};

// Start logits over positions, plus the no-answer logit as the last entry.
Eigen::VectorXd start_logits(const Encoding& enc, const MtlParams& params);
// End logits for every position given a start (entries before the start
// are meaningless).
Eigen::VectorXd end_logits(const Encoding& enc, const MtlParams& params,
                           int start);

// Maximizes log p_start(i) + log p_end(j | i) over 0 <= j - i <= max_len;
// with `no_answer_logit`, returns NO_ANSWER when log p_start(null) wins.
// start has n entries (no null); end_given_start[i] has n entries.
SpanPrediction decode_span(const Eigen::VectorXd& start,
                           const std::vector<Eigen::VectorXd>& end_given_start,
                           int max_span_len,
                           std::optional<double> no_answer_logit);

SpanPrediction predict_span(const Encoding& enc, const MtlParams& params);

// (subjective, factual) probabilities.
std::array<double, 2> predict_subjectivity(const Encoding& enc,
                                           const MtlParams& params);

struct LossParts {
  double span = 0.0;
  double subj = 0.0;
};

// Loss of the selected heads and, if `grads` is given, its gradient
// (same layout as params, accumulated). Span loss is cross-entropy on
// start (with the null option) plus end given the gold start.
LossParts loss_and_gradient(const MtlExample& ex, const MtlParams& params,
                            bool use_span, bool use_subj, MtlParams* grads);

struct MtlTrainConfig {
  int epochs = 10;
  double lr = 0.05;
  std::uint64_t seed = 0;
  double task_sample_prob = 0.5;  // probability that a step trains the span head
};

struct MtlTrainLog {
  std::size_t span_steps = 0, subj_steps = 0;
  std::vector<double> epoch_loss;
};

// Plain SGD, one example per step in a seeded order. Throws
// NumericalError("mtl train", step) on divergence.
MtlParams train_mtl(const std::vector<MtlExample>& data,
                    const MtlConfig& model_config,
                    const MtlTrainConfig& config, MtlTrainLog* log = nullptr);

// Max relative error |a - n| / max(|a| + |n|, 1e-6) between analytic and
// central-difference gradients of the summed span and subjectivity loss.
// Coordinates whose probes flip a ReLU of the subjectivity head are skipped.
double gradient_check(const MtlParams& params, const MtlExample& ex,
                      double epsilon = 1e-4);

double span_f1(const MtlExample& ex, const SpanPrediction& pred);
bool span_exact(const MtlExample& ex, const SpanPrediction& pred);

struct StratumMetrics {
  std::size_t n = 0;
  double f1 = 0.0;  // percent
  double em = 0.0;  // percent
};

struct MtlMetrics {
  std::map<std::string, StratumMetrics> strata;  // overall, subj_q, fact_q, subj_a, fact_a
  double subj_accuracy = 0.0;
  std::size_t subj_n = 0;
};

MtlMetrics evaluate(const MtlParams& params, const std::vector<MtlExample>& data,
                    int subj_threshold);

std::string metrics_table(const MtlMetrics& m);

// Toy data: random filler words with the answer wrapped in two sentinel
// tokens; the subjectivity label is carried by a marker word in the
// review. Ids index `vocab`, which is filled on first use.
std::vector<MtlExample> sentinel_toy_dataset(std::size_t n, std::uint64_t seed,
                                             WordVocabulary& vocab);

}  // namespace subjqa

#endif  // SUBJQA_MTL_HPP_
