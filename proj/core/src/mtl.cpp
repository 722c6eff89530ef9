#include "subjqa/mtl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "subjqa/analysis.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using json = nlohmann::json;

double sigm(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log-softmax of v
VectorXd log_softmax(const VectorXd& v) {
  const double m = v.maxCoeff();
  const double lse = m + std::log((v.array() - m).exp().sum());
  return v.array() - lse;
}

MtlParams zeros_like(const MtlParams& p) {
  MtlParams z = p;
  for (auto& [name, t] : z.tensors()) t->setZero();
  return z;
}

void check_finite(const MatrixXd& m, const std::string& layer) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    if (!m.col(c).allFinite()) throw NumericalError(layer, static_cast<long>(c));
  }
}

void run_lstm(const MatrixXd& X, const MatrixXd& W, const MatrixXd& U,
              bool reverse, MatrixXd& gates, MatrixXd& cells, MatrixXd& out) {
  const Eigen::Index n = X.cols(), h = U.cols();
  gates.resize(4 * h, n);
  cells.resize(h, n);
  out.resize(h, n);
  VectorXd hp = VectorXd::Zero(h), cp = VectorXd::Zero(h);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    VectorXd a = W * X.col(t) + U * hp;
    for (Eigen::Index r = 0; r < 3 * h; ++r) a[r] = sigm(a[r]);
    for (Eigen::Index r = 3 * h; r < 4 * h; ++r) a[r] = std::tanh(a[r]);
    const auto i = a.segment(0, h), f = a.segment(h, h), o = a.segment(2 * h, h),
               g = a.segment(3 * h, h);
    VectorXd c = f.cwiseProduct(cp) + i.cwiseProduct(g);
    VectorXd hn = o.cwiseProduct(c.array().tanh().matrix());
    gates.col(t) = a;
    cells.col(t) = c;
    out.col(t) = hn;
    hp = hn;
    cp = c;
  }
}

void lstm_backward(const MatrixXd& X, const MatrixXd& gates,
                   const MatrixXd& cells, const MatrixXd& out,
                   const MatrixXd& dout, const MatrixXd& W, const MatrixXd& U,
                   bool reverse, MatrixXd& dW, MatrixXd& dU, MatrixXd& dX) {
  const Eigen::Index n = X.cols(), h = U.cols();
  VectorXd dh_next = VectorXd::Zero(h), dc_next = VectorXd::Zero(h);
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    const Eigen::Index t = reverse ? n - 1 - k : k;
    const bool has_prev = k > 0;
    const Eigen::Index prev = reverse ? t + 1 : t - 1;
    const VectorXd hp = has_prev ? VectorXd(out.col(prev)) : VectorXd::Zero(h);
    const VectorXd cp = has_prev ? VectorXd(cells.col(prev)) : VectorXd::Zero(h);
    const auto a = gates.col(t);
    const VectorXd i = a.segment(0, h), f = a.segment(h, h),
                   o = a.segment(2 * h, h), g = a.segment(3 * h, h);
    const VectorXd tc = cells.col(t).array().tanh();
    const VectorXd dh = dout.col(t) + dh_next;
    const VectorXd d_o = dh.cwiseProduct(tc);
    const VectorXd dc = dh.cwiseProduct(o).cwiseProduct(
                            (1.0 - tc.array().square()).matrix()) +
                        dc_next;
    VectorXd da(4 * h);
    da.segment(0, h) = dc.cwiseProduct(g).array() * i.array() * (1.0 - i.array());
    da.segment(h, h) = dc.cwiseProduct(cp).array() * f.array() * (1.0 - f.array());
    da.segment(2 * h, h) = d_o.array() * o.array() * (1.0 - o.array());
    da.segment(3 * h, h) = dc.cwiseProduct(i).array() * (1.0 - g.array().square());
    dc_next = dc.cwiseProduct(f);
    dW.noalias() += da * X.col(t).transpose();
    dU.noalias() += da * hp.transpose();
    dX.col(t).noalias() += W.transpose() * da;
    dh_next.noalias() = U.transpose() * da;
  }
}

json tensor_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd tensor_from_json(const json& j, const std::string& name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorKind::kIntegrity, "tensor " + name + " has " +
                                           std::to_string(data.size()) +
                                           " values for shape " +
                                           std::to_string(rows) + "x" +
                                           std::to_string(cols));
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  }
  return m;
}

double f1_of(const std::vector<std::string>& pred,
             const std::vector<std::string>& gold) {
  std::map<std::string, int> counts;
  for (const auto& g : gold) ++counts[g];
  std::size_t common = 0;
  for (const auto& p : pred) {
    auto it = counts.find(p);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / pred.size();
  const double recall = static_cast<double>(common) / gold.size();
  return 2 * precision * recall / (precision + recall);
}

std::vector<std::string> words_in(const MtlExample& ex, int start, int end) {
  std::vector<std::string> out;
  for (int t = start; t <= end; ++t) {
    out.push_back(t < static_cast<int>(ex.review_words.size())
                      ? ex.review_words[t]
                      : std::to_string(ex.review_ids[t]));
  }
  return out;
}

}  // namespace

WordVocabulary::WordVocabulary() { add("<unk>"); }

int WordVocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? 0 : it->second;
}

int WordVocabulary::add(const std::string& word) {
  auto [it, inserted] = ids_.emplace(word, static_cast<int>(words_.size()));
  if (inserted) words_.push_back(word);
  return it->second;
}

WordVocabulary build_vocabulary(const std::vector<AnnotatedExample>& examples,
                                std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& ex : examples) {
    for (const Token& t : tokenize(ex.question_text)) ++counts[to_lower_ascii(t.surface)];
    for (const Token& t : tokenize(ex.review_text)) ++counts[to_lower_ascii(t.surface)];
  }
  WordVocabulary v;
  for (const auto& [w, c] : counts) {
    if (c >= min_count) v.add(w);
  }
  return v;
}

MtlExample make_mtl_example(const AnnotatedExample& ex,
                            const WordVocabulary& vocab, int subj_threshold) {
  MtlExample m;
  for (const Token& t : tokenize(ex.question_text)) {
    m.question_ids.push_back(vocab.id(to_lower_ascii(t.surface)));
  }
  const TokenSequence review = tokenize(ex.review_text);
  for (const Token& t : review) {
    m.review_words.push_back(to_lower_ascii(t.surface));
    m.review_ids.push_back(vocab.id(m.review_words.back()));
  }
  if (ex.answer) {
    const auto idx = tokens_in_span(review, ex.answer->byte_start, ex.answer->byte_end);
    if (idx.empty()) {
      throw Error(ErrorKind::kIntegrity,
                  "answer span covers no token in review " + ex.review_id);
    }
    m.span = std::make_pair(static_cast<int>(idx.front()),
                            static_cast<int>(idx.back()));
  }
  m.question_subj_score = ex.question_subj_score;
  m.answer_subj_score = ex.answer_subj_score;
  m.subj_label = is_subjective(ex.question_subj_score, subj_threshold) ? 0 : 1;
  return m;
}

MtlParams MtlParams::init(const MtlConfig& c, std::uint64_t seed) {
  if (c.vocab_size < 1 || c.emb_dim < 1 || c.hidden < 1 || c.proj < 1 ||
      c.subj_hidden < 1 || c.max_span_len < 0) {
    throw Error(ErrorKind::kParameter, "bad MTL model config");
  }
  MtlParams p;
  p.config = c;
  p.seed = seed;
  const Eigen::Index V = static_cast<Eigen::Index>(c.vocab_size), d = c.emb_dim,
                     h = c.hidden, P = c.proj, D = d + 1;
  p.E.resize(V, d);
  p.Wf.resize(4 * h, D);
  p.Uf.resize(4 * h, h);
  p.Wb.resize(4 * h, D);
  p.Ub.resize(4 * h, h);
  p.B.resize(P, c.linear ? D : 2 * h);
  p.ws.resize(P, 1);
  p.Qs.resize(P, d);
  p.we.resize(P, 1);
  p.Qe.resize(P, d);
  p.M.resize(P, P);
  p.na.resize(1, 1);
  p.W1.resize(c.subj_hidden, P);
  p.W2.resize(2, c.subj_hidden);
  Rng rng(mix_seed(seed, 1));
  for (auto& [name, t] : p.tensors()) {
    for (Eigen::Index r = 0; r < t->rows(); ++r) {
      for (Eigen::Index col = 0; col < t->cols(); ++col) {
        (*t)(r, col) = rng.uniform(-c.init_scale, c.init_scale);
      }
    }
  }
  p.na.setZero();
  if (c.linear) {
    p.Wf.setZero();
    p.Uf.setZero();
    p.Wb.setZero();
    p.Ub.setZero();
  }
  return p;
}

std::vector<std::pair<std::string, MatrixXd*>> MtlParams::tensors() {
  return {{"E", &E},   {"Wf", &Wf}, {"Uf", &Uf}, {"Wb", &Wb}, {"Ub", &Ub},
          {"B", &B},   {"ws", &ws}, {"Qs", &Qs}, {"we", &we}, {"Qe", &Qe},
          {"M", &M},   {"na", &na}, {"W1", &W1}, {"W2", &W2}};
}

std::vector<std::pair<std::string, const MatrixXd*>> MtlParams::tensors() const {
  std::vector<std::pair<std::string, const MatrixXd*>> out;
  for (auto& [n, t] : const_cast<MtlParams*>(this)->tensors()) out.emplace_back(n, t);
  return out;
}

std::size_t MtlParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
  return n;
}

void MtlParams::validate() const {
  const auto& c = config;
  const Eigen::Index V = static_cast<Eigen::Index>(c.vocab_size), d = c.emb_dim,
                     h = c.hidden, P = c.proj, D = d + 1;
  auto expect = [](const MatrixXd& m, const char* name, Eigen::Index r,
                   Eigen::Index col) {
    if (m.rows() != r || m.cols() != col) {
      throw Error(ErrorKind::kIntegrity,
                  std::string("tensor ") + name + " is " +
                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                      ", expected " + std::to_string(r) + "x" +
                      std::to_string(col));
    }
    if (!m.allFinite()) {
      throw Error(ErrorKind::kIntegrity, std::string("tensor ") + name +
                                             " has non-finite values");
    }
  };
  expect(E, "E", V, d);
  expect(Wf, "Wf", 4 * h, D);
  expect(Uf, "Uf", 4 * h, h);
  expect(Wb, "Wb", 4 * h, D);
  expect(Ub, "Ub", 4 * h, h);
  expect(B, "B", P, c.linear ? D : 2 * h);
  expect(ws, "ws", P, 1);
  expect(Qs, "Qs", P, d);
  expect(we, "we", P, 1);
  expect(Qe, "Qe", P, d);
  expect(M, "M", P, P);
  expect(na, "na", 1, 1);
  expect(W1, "W1", c.subj_hidden, P);
  expect(W2, "W2", 2, c.subj_hidden);
}

void MtlParams::save(const std::filesystem::path& path,
                     const WordVocabulary* vocab) const {
  validate();
  const auto& c = config;
  json tensors_j = json::object();
  for (const auto& [name, t] : tensors()) tensors_j[name] = tensor_json(*t);
  json j = {{"schema", "subjqa.mtl.v1"},
            {"seed", seed},
            {"config",
             {{"vocab_size", c.vocab_size},
              {"emb_dim", c.emb_dim},
              {"hidden", c.hidden},
              {"proj", c.proj},
              {"subj_hidden", c.subj_hidden},
              {"max_span_len", c.max_span_len},
              {"allow_no_answer", c.allow_no_answer},
              {"linear", c.linear},
              {"init_scale", c.init_scale}}},
            {"parameter_count", parameter_count()},
            {"tensors", tensors_j}};
  if (vocab) j["vocabulary"] = vocab->words();
  write_file(path, j.dump() + "\n");
}

MtlParams MtlParams::load(const std::filesystem::path& path,
                          WordVocabulary* vocab) {
  const json j = json::parse(read_file(path));
  if (j.value("schema", "") != "subjqa.mtl.v1") {
    throw Error(ErrorKind::kInput, path.string() + ": not an MTL checkpoint");
  }
  MtlParams p;
  const json& c = j.at("config");
  p.config.vocab_size = c.at("vocab_size").get<std::size_t>();
  p.config.emb_dim = c.at("emb_dim").get<int>();
  p.config.hidden = c.at("hidden").get<int>();
  p.config.proj = c.at("proj").get<int>();
  p.config.subj_hidden = c.at("subj_hidden").get<int>();
  p.config.max_span_len = c.at("max_span_len").get<int>();
  p.config.allow_no_answer = c.at("allow_no_answer").get<bool>();
  p.config.linear = c.at("linear").get<bool>();
  p.config.init_scale = c.at("init_scale").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  const json& t = j.at("tensors");
  for (auto& [name, tensor] : p.tensors()) {
    if (!t.contains(name)) {
      throw Error(ErrorKind::kIntegrity, path.string() + ": missing tensor " + name);
    }
    *tensor = tensor_from_json(t.at(name), name);
  }
  p.validate();
  if (vocab && j.contains("vocabulary")) {
    *vocab = WordVocabulary();
    for (const auto& w : j.at("vocabulary")) vocab->add(w.get<std::string>());
  }
  return p;
}

bool operator==(const MtlParams& a, const MtlParams& b) {
  const auto ta = a.tensors(), tb = b.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].second->rows() != tb[i].second->rows() ||
        ta[i].second->cols() != tb[i].second->cols() ||
        *ta[i].second != *tb[i].second) {
      return false;
    }
  }
  return a.seed == b.seed;
}

Encoding encode(const MtlExample& ex, const MtlParams& p) {
  const Eigen::Index n = static_cast<Eigen::Index>(ex.review_ids.size());
  const Eigen::Index d = p.config.emb_dim;
  if (n == 0) throw Error(ErrorKind::kParameter, "encode: empty review");
  Encoding enc;
  enc.X.resize(d + 1, n);
  enc.q = VectorXd::Zero(d);
  for (int id : ex.question_ids) enc.q += p.E.row(id).transpose();
  if (!ex.question_ids.empty()) enc.q /= static_cast<double>(ex.question_ids.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    const int id = ex.review_ids[t];
    if (id < 0 || id >= p.E.rows()) {
      throw Error(ErrorKind::kParameter, "encode: token id out of range");
    }
    enc.X.col(t).head(d) = p.E.row(id).transpose();
    const bool wiq = id != 0 && std::find(ex.question_ids.begin(),
                                          ex.question_ids.end(),
                                          id) != ex.question_ids.end();
    enc.X(d, t) = wiq ? 1.0 : 0.0;
  }
  if (p.config.linear) {
    enc.Hp = enc.X;
    enc.H = p.B * enc.Hp;
  } else {
    MatrixXd hf, hb;
    run_lstm(enc.X, p.Wf, p.Uf, false, enc.gates_f, enc.cells_f, hf);
    run_lstm(enc.X, p.Wb, p.Ub, true, enc.gates_b, enc.cells_b, hb);
    enc.Hp.resize(hf.rows() + hb.rows(), n);
    enc.Hp << hf, hb;
    check_finite(enc.Hp, "encoder.lstm");
    enc.H = (p.B * enc.Hp).array().tanh();
  }
  check_finite(enc.H, "encoder.projection");
  return enc;
}

Eigen::VectorXd start_logits(const Encoding& enc, const MtlParams& p) {
  const Eigen::Index n = enc.H.cols();
  VectorXd out(n + 1);
  const VectorXd w = p.ws.col(0) + p.Qs * enc.q;
  out.head(n) = enc.H.transpose() * w;
  out[n] = p.na(0, 0);
  return out;
}

Eigen::VectorXd end_logits(const Encoding& enc, const MtlParams& p, int start) {
  const VectorXd w = p.we.col(0) + p.Qe * enc.q + p.M * enc.H.col(start);
  return enc.H.transpose() * w;
}

SpanPrediction decode_span(const Eigen::VectorXd& start,
                           const std::vector<Eigen::VectorXd>& end_given_start,
                           int max_span_len,
                           std::optional<double> no_answer_logit) {
  const Eigen::Index n = start.size();
  VectorXd all(n + (no_answer_logit ? 1 : 0));
  all.head(n) = start;
  if (no_answer_logit) all[n] = *no_answer_logit;
  const VectorXd ls = log_softmax(all);
  SpanPrediction best;
  bool found = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index last = std::min<Eigen::Index>(n - 1, i + max_span_len);
    const VectorXd le = log_softmax(end_given_start[i].segment(i, last - i + 1));
    for (Eigen::Index j = i; j <= last; ++j) {
      const double s = ls[i] + le[j - i];
      if (!found || s > best.score) {
        best = {false, static_cast<int>(i), static_cast<int>(j), s};
        found = true;
      }
    }
  }
  if (no_answer_logit && (!found || ls[n] > best.score)) {
    best = {true, 0, 0, ls[n]};
  }
  return best;
}

SpanPrediction predict_span(const Encoding& enc, const MtlParams& p) {
  const Eigen::Index n = enc.H.cols();
  const VectorXd s = start_logits(enc, p);
  std::vector<VectorXd> ends;
  ends.reserve(n);
  for (Eigen::Index i = 0; i < n; ++i) ends.push_back(end_logits(enc, p, static_cast<int>(i)));
  std::optional<double> na;
  if (p.config.allow_no_answer) na = s[n];
  return decode_span(s.head(n), ends, p.config.max_span_len, na);
}

std::array<double, 2> predict_subjectivity(const Encoding& enc,
                                           const MtlParams& p) {
  const VectorXd hbar = enc.H.rowwise().mean();
  const VectorXd sp = (p.W1 * hbar).cwiseMax(0.0);
  const VectorXd logits = p.W2 * sp;
  const VectorXd ls = log_softmax(logits);
  return {std::exp(ls[0]), std::exp(ls[1])};
}

LossParts loss_and_gradient(const MtlExample& ex, const MtlParams& p,
                            bool use_span, bool use_subj, MtlParams* g) {
  const Encoding enc = encode(ex, p);
  const Eigen::Index n = enc.H.cols(), d = p.config.emb_dim;
  LossParts loss;
  MatrixXd dH = MatrixXd::Zero(enc.H.rows(), n);
  VectorXd dq = VectorXd::Zero(d);

  const bool span_active =
      use_span && (ex.span.has_value() || p.config.allow_no_answer);
  if (span_active) {
    const VectorXd s_all = start_logits(enc, p);
    const Eigen::Index m = p.config.allow_no_answer ? n + 1 : n;
    const VectorXd s = s_all.head(m);
    const VectorXd ls = log_softmax(s);
    const Eigen::Index target = ex.span ? ex.span->first : n;
    loss.span -= ls[target];
    if (g) {
      VectorXd ds = ls.array().exp();
      ds[target] -= 1.0;
      const VectorXd w = p.ws.col(0) + p.Qs * enc.q;
      const VectorXd ds_pos = ds.head(n);
      dH.noalias() += w * ds_pos.transpose();
      const VectorXd Hds = enc.H * ds_pos;  // sum_t ds_t H_t
      g->ws.col(0) += Hds;
      g->Qs.noalias() += Hds * enc.q.transpose();
      dq.noalias() += p.Qs.transpose() * Hds;
      if (p.config.allow_no_answer) g->na(0, 0) += ds[n];
    }
    if (ex.span) {
      const int a = ex.span->first, b = ex.span->second;
      const int last = std::min<int>(static_cast<int>(n) - 1, a + p.config.max_span_len);
      if (b >= a && b <= last) {
        const VectorXd e = end_logits(enc, p, a).segment(a, last - a + 1);
        const VectorXd le = log_softmax(e);
        loss.span -= le[b - a];
        if (g) {
          VectorXd de = le.array().exp();
          de[b - a] -= 1.0;
          const VectorXd w = p.we.col(0) + p.Qe * enc.q + p.M * enc.H.col(a);
          const auto Hr = enc.H.middleCols(a, last - a + 1);
          dH.middleCols(a, last - a + 1).noalias() += w * de.transpose();
          const VectorXd Hde = Hr * de;
          g->we.col(0) += Hde;
          g->Qe.noalias() += Hde * enc.q.transpose();
          dq.noalias() += p.Qe.transpose() * Hde;
          g->M.noalias() += Hde * enc.H.col(a).transpose();
          dH.col(a).noalias() += p.M.transpose() * Hde;
        }
      }
    }
  }
  if (use_subj && ex.subj_label) {
    const VectorXd hbar = enc.H.rowwise().mean();
    const VectorXd u = p.W1 * hbar;
    const VectorXd sp = u.cwiseMax(0.0);
    const VectorXd ls = log_softmax(p.W2 * sp);
    loss.subj -= ls[*ex.subj_label];
    if (g) {
      VectorXd dl = ls.array().exp();
      dl[*ex.subj_label] -= 1.0;
      g->W2.noalias() += dl * sp.transpose();
      VectorXd du = p.W2.transpose() * dl;
      for (Eigen::Index r = 0; r < du.size(); ++r) {
        if (u[r] <= 0.0) du[r] = 0.0;
      }
      g->W1.noalias() += du * hbar.transpose();
      const VectorXd dhbar = p.W1.transpose() * du / static_cast<double>(n);
      dH.colwise() += dhbar;
    }
  }
  if (!g) return loss;

  MatrixXd dZ = p.config.linear
                    ? dH
                    : MatrixXd(dH.array() * (1.0 - enc.H.array().square()));
  g->B.noalias() += dZ * enc.Hp.transpose();
  MatrixXd dHp = p.B.transpose() * dZ;
  MatrixXd dX;
  if (p.config.linear) {
    dX = dHp;
  } else {
    const Eigen::Index h = p.config.hidden;
    dX = MatrixXd::Zero(d + 1, n);
    const MatrixXd hf = enc.Hp.topRows(h), hb = enc.Hp.bottomRows(h);
    lstm_backward(enc.X, enc.gates_f, enc.cells_f, hf, dHp.topRows(h), p.Wf,
                  p.Uf, false, g->Wf, g->Uf, dX);
    lstm_backward(enc.X, enc.gates_b, enc.cells_b, hb, dHp.bottomRows(h), p.Wb,
                  p.Ub, true, g->Wb, g->Ub, dX);
  }
  for (Eigen::Index t = 0; t < n; ++t) {
    g->E.row(ex.review_ids[t]) += dX.col(t).head(d).transpose();
  }
  if (!ex.question_ids.empty()) {
    const VectorXd share = dq / static_cast<double>(ex.question_ids.size());
    for (int id : ex.question_ids) g->E.row(id) += share.transpose();
  }
  return loss;
}

MtlParams train_mtl(const std::vector<MtlExample>& data,
                    const MtlConfig& model_config,
                    const MtlTrainConfig& config, MtlTrainLog* log) {
  if (data.empty()) throw Error(ErrorKind::kParameter, "train_mtl: empty dataset");
  if (std::none_of(data.begin(), data.end(),
                   [](const MtlExample& e) { return e.subj_label.has_value(); })) {
    throw Error(ErrorKind::kParameter, "train_mtl: no subjectivity labels");
  }
  if (!(config.task_sample_prob >= 0.0 && config.task_sample_prob <= 1.0) ||
      !(config.lr > 0.0) || config.epochs < 0) {
    throw Error(ErrorKind::kParameter, "train_mtl: bad training config");
  }
  MtlParams p = MtlParams::init(model_config, config.seed);
  MtlParams g = zeros_like(p);
  Rng rng(mix_seed(config.seed, 2));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const bool span_task = rng.bernoulli(config.task_sample_prob);
      for (auto& [name, t] : g.tensors()) t->setZero();
      LossParts l;
      try {
        l = loss_and_gradient(data[idx], p, span_task, !span_task, &g);
      } catch (const NumericalError&) {
        throw NumericalError("mtl train", step);
      }
      const double total = l.span + l.subj;
      if (!std::isfinite(total)) throw NumericalError("mtl train", step);
      epoch_loss += total;
      auto pt = p.tensors();
      auto gt = g.tensors();
      for (std::size_t k = 0; k < pt.size(); ++k) {
        if (model_config.linear &&
            (pt[k].first == "Wf" || pt[k].first == "Uf" ||
             pt[k].first == "Wb" || pt[k].first == "Ub")) {
          continue;  // frozen
        }
        if (!gt[k].second->allFinite()) throw NumericalError("mtl train", step);
        *pt[k].second -= config.lr * *gt[k].second;
      }
      if (log) ++(span_task ? log->span_steps : log->subj_steps);
      ++step;
    }
    if (log) log->epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return p;
}

double gradient_check(const MtlParams& params, const MtlExample& ex,
                      double epsilon) {
  MtlParams g = zeros_like(params);
  loss_and_gradient(ex, params, true, true, &g);
  MtlParams work = params;
  auto total = [&]() {
    const LossParts l = loss_and_gradient(ex, work, true, true, nullptr);
    return l.span + l.subj;
  };
  // ReLU sign pattern of the subjectivity head; a probe that flips it
  // straddles a kink where the difference quotient means nothing.
  auto relu_pattern = [&]() {
    const Encoding enc = encode(ex, work);
    const VectorXd u = work.W1 * enc.H.rowwise().mean();
    std::vector<bool> on(static_cast<std::size_t>(u.size()));
    for (Eigen::Index r = 0; r < u.size(); ++r) on[r] = u[r] > 0.0;
    return on;
  };
  const std::vector<bool> base_pattern = relu_pattern();
  double worst = 0.0;
  auto wt = work.tensors();
  const auto gt = g.tensors();
  for (std::size_t k = 0; k < wt.size(); ++k) {
    MatrixXd& t = *wt[k].second;
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) {
        const double orig = t(r, c);
        // fourth-order central difference
        double f[4];
        bool kink = false;
        const double offsets[4] = {2 * epsilon, epsilon, -epsilon, -2 * epsilon};
        for (int s = 0; s < 4; ++s) {
          t(r, c) = orig + offsets[s];
          f[s] = total();
          kink = kink || relu_pattern() != base_pattern;
        }
        t(r, c) = orig;
        if (kink) continue;
        const double f2p = f[0], f1p = f[1], f1m = f[2], f2m = f[3];
        // differences first: equal evaluations give exactly zero
        const double numeric = (8 * (f1p - f1m) - (f2p - f2m)) / (12 * epsilon);
        const double analytic = (*gt[k].second)(r, c);
        const double rel = std::abs(analytic - numeric) /
                           std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
        worst = std::max(worst, rel);
      }
    }
  }
  return worst;
}

double span_f1(const MtlExample& ex, const SpanPrediction& pred) {
  if (!ex.span) return pred.no_answer ? 1.0 : 0.0;
  if (pred.no_answer) return 0.0;
  return f1_of(words_in(ex, pred.start, pred.end),
               words_in(ex, ex.span->first, ex.span->second));
}

bool span_exact(const MtlExample& ex, const SpanPrediction& pred) {
  if (!ex.span) return pred.no_answer;
  if (pred.no_answer) return false;
  return words_in(ex, pred.start, pred.end) ==
         words_in(ex, ex.span->first, ex.span->second);
}

MtlMetrics evaluate(const MtlParams& params, const std::vector<MtlExample>& data,
                    int subj_threshold) {
  struct Acc {
    std::size_t n = 0;
    double f1 = 0, em = 0;
  };
  std::map<std::string, Acc> acc;
  for (const char* s : {"overall", "subj_q", "fact_q", "subj_a", "fact_a"}) acc[s];
  MtlMetrics m;
  std::size_t subj_ok = 0;
  for (const auto& ex : data) {
    const Encoding enc = encode(ex, params);
    const SpanPrediction pred = predict_span(enc, params);
    const double f1 = span_f1(ex, pred);
    const double em = span_exact(ex, pred) ? 1.0 : 0.0;
    auto add = [&](const std::string& k) {
      acc[k].n += 1;
      acc[k].f1 += f1;
      acc[k].em += em;
    };
    add("overall");
    add(is_subjective(ex.question_subj_score, subj_threshold) ? "subj_q" : "fact_q");
    if (ex.span && ex.answer_subj_score) {
      add(is_subjective(*ex.answer_subj_score, subj_threshold) ? "subj_a" : "fact_a");
    }
    if (ex.subj_label) {
      const auto s = predict_subjectivity(enc, params);
      const int guess = s[0] >= s[1] ? 0 : 1;
      subj_ok += guess == *ex.subj_label;
      ++m.subj_n;
    }
  }
  for (const auto& [k, a] : acc) {
    StratumMetrics s;
    s.n = a.n;
    if (a.n) {
      s.f1 = 100.0 * a.f1 / static_cast<double>(a.n);
      s.em = 100.0 * a.em / static_cast<double>(a.n);
    }
    m.strata[k] = s;
  }
  m.subj_accuracy = m.subj_n ? static_cast<double>(subj_ok) / m.subj_n : 0.0;
  return m;
}

std::string metrics_table(const MtlMetrics& m) {
  std::string out = tsv_line({"stratum", "n", "f1", "em"});
  char f1[32], em[32];
  for (const char* k : {"overall", "subj_q", "fact_q", "subj_a", "fact_a"}) {
    const auto it = m.strata.find(k);
    if (it == m.strata.end()) continue;
    std::snprintf(f1, sizeof f1, "%.2f", it->second.f1);
    std::snprintf(em, sizeof em, "%.2f", it->second.em);
    out += tsv_line({k, std::to_string(it->second.n), f1, em});
  }
  char acc[32];
  std::snprintf(acc, sizeof acc, "%.4f", m.subj_accuracy);
  out += tsv_line({"subjectivity_accuracy", std::to_string(m.subj_n), acc, ""});
  return out;
}

std::vector<MtlExample> sentinel_toy_dataset(std::size_t n, std::uint64_t seed,
                                             WordVocabulary& vocab) {
  static const std::vector<std::string> filler = {
      "the", "a", "room", "book", "screen", "was", "and", "it", "with", "of",
      "plot", "staff", "price", "battery", "page", "light", "wall", "door"};
  static const std::vector<std::string> answer_words = {
      "clean", "fast", "cheap", "long", "warm", "bright", "quiet", "short"};
  static const std::vector<std::string> q_words = {"how", "what", "is", "the",
                                                   "about"};
  const int open = vocab.add("[[");
  for (const char* w : {"]]", "lovely", "metal"}) vocab.add(w);
  for (const auto& w : filler) vocab.add(w);
  for (const auto& w : answer_words) vocab.add(w);
  for (const auto& w : q_words) vocab.add(w);
  Rng rng(seed);
  std::vector<MtlExample> out;
  for (std::size_t e = 0; e < n; ++e) {
    MtlExample ex;
    const int qlen = 2 + static_cast<int>(rng.below(3));
    for (int k = 0; k < qlen; ++k) {
      ex.question_ids.push_back(vocab.id(q_words[rng.below(q_words.size())]));
    }
    const int before = 1 + static_cast<int>(rng.below(5));
    const int alen = 1 + static_cast<int>(rng.below(3));
    const int after = 1 + static_cast<int>(rng.below(5));
    const bool subj = rng.bernoulli(0.5);
    std::vector<std::string> words;
    for (int k = 0; k < before; ++k) words.push_back(filler[rng.below(filler.size())]);
    words.push_back("[[");
    for (int k = 0; k < alen; ++k) words.push_back(answer_words[rng.below(answer_words.size())]);
    words.push_back("]]");
    for (int k = 0; k < after; ++k) words.push_back(filler[rng.below(filler.size())]);
    // marker at a random position outside the answer
    const std::size_t pos = rng.below(2) ? rng.below(static_cast<std::uint64_t>(before))
                                         : words.size();
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos),
                 subj ? "lovely" : "metal");
    int start = -1;
    for (std::size_t t = 0; t < words.size(); ++t) {
      ex.review_words.push_back(words[t]);
      ex.review_ids.push_back(vocab.id(words[t]));
      if (ex.review_ids.back() == open) start = static_cast<int>(t) + 1;
    }
    ex.span = std::make_pair(start, start + alen - 1);
    ex.subj_label = subj ? 0 : 1;
    ex.question_subj_score = subj ? 5 : 1;
    ex.answer_subj_score = subj ? 5 : 1;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace subjqa
