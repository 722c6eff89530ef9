// Reference implementations used as test oracles. Each one is written
// directly from the defining formula with plain loops and shares no code
// with the library beyond its data types.
#ifndef SUBJQA_TESTS_ORACLES_HPP_
#define SUBJQA_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat zeros(std::size_t r, std::size_t c) {
  return Mat(r, std::vector<double>(c, 0.0));
}

inline double frobenius(const Mat& m, const Mat& w, const Mat& h) {
  // m ~ w * h^T
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      double r = 0;
      for (std::size_t k = 0; k < w[i].size(); ++k) r += w[i][k] * h[j][k];
      s += (m[i][j] - r) * (m[i][j] - r);
    }
  return std::sqrt(s);
}

// One Lee-Seung sweep: w first, then h. A zero denominator leaves the
// entry as it is.
inline void nmf_sweep(const Mat& m, Mat& w, Mat& h) {
  const std::size_t R = m.size(), C = m[0].size(), K = w[0].size();
  auto update = [&](Mat& f, const Mat& g, bool rows) {
    const std::size_t n = rows ? R : C;
    // gram = g^T g
    Mat gram = zeros(K, K);
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; b < K; ++b)
        for (std::size_t t = 0; t < g.size(); ++t) gram[a][b] += g[t][a] * g[t][b];
    Mat num = zeros(n, K), den = zeros(n, K);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t t = 0; t < g.size(); ++t)
          num[i][k] += (rows ? m[i][t] : m[t][i]) * g[t][k];
        for (std::size_t b = 0; b < K; ++b) den[i][k] += f[i][b] * gram[b][k];
      }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < K; ++k)
        if (den[i][k] > 0) f[i][k] *= num[i][k] / den[i][k];
  };
  update(w, h, true);
  update(h, w, false);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

// All-pairs cosine, then sort each row by (weight desc, key asc), keep k.
inline std::map<std::string, std::vector<std::pair<std::string, double>>>
brute_force_neighbors(const std::vector<std::string>& keys, const Mat& rows,
                      std::size_t k) {
  std::map<std::string, std::vector<std::pair<std::string, double>>> out;
  auto zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  for (std::size_t i = 0; i < keys.size(); ++i) {
    auto& list = out[keys[i]];
    if (zero(rows[i])) continue;
    for (std::size_t j = 0; j < keys.size(); ++j) {
      if (i == j || zero(rows[j])) continue;
      list.emplace_back(keys[j], cosine(rows[i], rows[j]));
    }
    std::sort(list.begin(), list.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if (list.size() > k) list.resize(k);
  }
  return out;
}

// Bag-of-tokens F1.
inline double token_f1(const std::vector<std::string>& pred,
                       const std::vector<std::string>& gold) {
  std::map<std::string, int> g;
  for (const auto& t : gold) ++g[t];
  double common = 0;
  for (const auto& t : pred)
    if (g[t]-- > 0) common += 1;
  if (common == 0) return 0;
  const double p = common / pred.size(), r = common / gold.size();
  return 2 * p * r / (p + r);
}

inline double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One LSTM direction with gate order i f o g and no biases; x[t] is the
// input at position t, W is 4h x D, U is 4h x h (row-major nested vectors).
inline Mat lstm(const Mat& x, const Mat& W, const Mat& U, bool reverse) {
  const std::size_t n = x.size(), h = U[0].size();
  Mat out(n, std::vector<double>(h, 0.0));
  std::vector<double> hp(h, 0.0), cp(h, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t t = reverse ? n - 1 - s : s;
    std::vector<double> a(4 * h, 0.0);
    for (std::size_t r = 0; r < 4 * h; ++r) {
      for (std::size_t c = 0; c < x[t].size(); ++c) a[r] += W[r][c] * x[t][c];
      for (std::size_t c = 0; c < h; ++c) a[r] += U[r][c] * hp[c];
    }
    for (std::size_t u = 0; u < h; ++u) {
      const double i = sig(a[u]), f = sig(a[h + u]), o = sig(a[2 * h + u]),
                   g = std::tanh(a[3 * h + u]);
      const double c = f * cp[u] + i * g;
      out[t][u] = o * std::tanh(c);
      cp[u] = c;
    }
    hp = out[t];
  }
  return out;
}

// Exhaustive span search over log p_start(i) + log p_end(j | i).
struct Span {
  bool none = true;
  int start = 0, end = 0;
};

inline std::vector<double> log_softmax(const std::vector<double>& v) {
  double m = v[0];
  for (double x : v) m = std::max(m, x);
  double s = 0;
  for (double x : v) s += std::exp(x - m);
  std::vector<double> out;
  for (double x : v) out.push_back(x - m - std::log(s));
  return out;
}

inline Span brute_force_span(const std::vector<double>& start,
                             const std::vector<std::vector<double>>& end,
                             int max_len, const double* na) {
  std::vector<double> all = start;
  if (na) all.push_back(*na);
  const auto ls = log_softmax(all);
  const int n = static_cast<int>(start.size());
  Span best;
  double best_score = -1e300;
  bool found = false;
  for (int i = 0; i < n; ++i) {
    std::vector<double> seg;
    for (int j = i; j < n && j - i <= max_len; ++j) seg.push_back(end[i][j]);
    const auto le = log_softmax(seg);
    for (int j = i; j < n && j - i <= max_len; ++j) {
      const double s = ls[i] + le[j - i];
      if (!found || s > best_score) {
        best = {false, i, j};
        best_score = s;
        found = true;
      }
    }
  }
  if (na && ls[n] > best_score) best = {true, 0, 0};
  return best;
}

}  // namespace oracle

#endif  // SUBJQA_TESTS_ORACLES_HPP_
