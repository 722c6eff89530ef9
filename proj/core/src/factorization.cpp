#include "subjqa/factorization.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

constexpr const char* kModelMagic = "subjqa-factor-model";
constexpr int kModelVersion = 1;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw Error(ErrorKind::kInput, "bad number '" + s + "' in " + what);
  }
  return v;
}

void check_unique(const std::vector<std::string>& labels, const char* what) {
  std::set<std::string_view> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) {
      throw Error(ErrorKind::kIntegrity,
                  std::string("duplicate ") + what + " label '" + l + "'");
    }
  }
}

// dense residual when small, otherwise the expanded trace form
double residual_norm(const ExtractionMatrix& m, const Eigen::MatrixXd& x,
                     const Eigen::MatrixXd& e) {
  const double cells = static_cast<double>(m.rows()) * m.cols();
  if (cells <= 4.0e6) {
    Eigen::MatrixXd r = x * e.transpose();
    for (const auto& c : m.entries) r(c.row, c.col) -= c.value;
    return r.norm();
  }
  double m_sq = 0.0, cross = 0.0;
  for (const auto& c : m.entries) {
    m_sq += c.value * c.value;
    cross += c.value * x.row(c.row).dot(e.row(c.col));
  }
  const double recon_sq =
      ((x.transpose() * x).cwiseProduct(e.transpose() * e)).sum();
  return std::sqrt(std::max(0.0, m_sq - 2.0 * cross + recon_sq));
}

// M * E  (rows x K) and M^T * X (cols x K) from the coordinate list.
Eigen::MatrixXd times_right(const ExtractionMatrix& m,
                            const Eigen::MatrixXd& e) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), e.cols());
  for (const auto& c : m.entries) out.row(c.row) += c.value * e.row(c.col);
  return out;
}

Eigen::MatrixXd transpose_times(const ExtractionMatrix& m,
                                const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.cols(), x.cols());
  for (const auto& c : m.entries) out.row(c.col) += c.value * x.row(c.row);
  return out;
}

// factor <- factor .* numer ./ denom; entries with a zero denominator are
// left as they are.
void multiplicative_step(Eigen::MatrixXd& factor, const Eigen::MatrixXd& numer,
                         const Eigen::MatrixXd& denom) {
  for (Eigen::Index i = 0; i < factor.rows(); ++i) {
    for (Eigen::Index k = 0; k < factor.cols(); ++k) {
      const double d = denom(i, k);
      if (d > 0.0) factor(i, k) *= numer(i, k) / d;
    }
  }
}

bool all_finite_nonnegative(const Eigen::MatrixXd& a) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (!std::isfinite(v) || v < 0.0) return false;
  }
  return true;
}

}  // namespace

Eigen::MatrixXd ExtractionMatrix::dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(rows(), cols());
  for (const auto& c : entries) d(c.row, c.col) = c.value;
  return d;
}

void ExtractionMatrix::validate() const {
  check_unique(row_labels, "row");
  check_unique(col_labels, "column");
  for (std::size_t n = 0; n < entries.size(); ++n) {
    const auto& c = entries[n];
    if (c.row >= rows() || c.col >= cols()) {
      throw Error(ErrorKind::kIntegrity, "matrix entry out of range");
    }
    if (!(c.value > 0.0) || !std::isfinite(c.value)) {
      throw Error(ErrorKind::kIntegrity, "matrix entry must be positive");
    }
    if (n > 0 && std::tie(entries[n - 1].row, entries[n - 1].col) >=
                     std::tie(c.row, c.col)) {
      throw Error(ErrorKind::kIntegrity, "matrix entries not sorted");
    }
  }
}

void ExtractionMatrix::save(const std::filesystem::path& path) const {
  std::string out = tsv_line({"item", "extraction", "count"});
  for (const auto& c : entries) {
    out += tsv_line({row_labels[c.row], col_labels[c.col], fmt_double(c.value)});
  }
  // Labels without entries still define the shape.
  out += tsv_line({"#rows", std::to_string(rows())});
  for (const auto& l : row_labels) out += tsv_line({"#row", l});
  for (const auto& l : col_labels) out += tsv_line({"#col", l});
  write_file(path, out);
}

ExtractionMatrix ExtractionMatrix::load(const std::filesystem::path& path) {
  const auto rows = parse_tsv(read_file(path));
  ExtractionMatrix m;
  std::vector<std::array<std::string, 3>> cells;
  for (std::size_t n = 1; n < rows.size(); ++n) {
    const Row& r = rows[n];
    if (r.size() == 2 && r[0] == "#row") {
      m.row_labels.push_back(r[1]);
    } else if (r.size() == 2 && r[0] == "#col") {
      m.col_labels.push_back(r[1]);
    } else if (r.size() == 3) {
      cells.push_back({r[0], r[1], r[2]});
    } else if (!(r.size() == 2 && r[0] == "#rows")) {
      throw Error(ErrorKind::kInput, "malformed matrix row in " + path.string());
    }
  }
  std::map<std::string, std::size_t> ri, ci;
  for (std::size_t i = 0; i < m.row_labels.size(); ++i) ri[m.row_labels[i]] = i;
  for (std::size_t j = 0; j < m.col_labels.size(); ++j) ci[m.col_labels[j]] = j;
  for (const auto& c : cells) {
    if (!ri.contains(c[0]) || !ci.contains(c[1])) {
      throw Error(ErrorKind::kIntegrity, "matrix cell with unknown label");
    }
    m.entries.push_back({ri[c[0]], ci[c[1]], parse_double(c[2], path.string())});
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  m.validate();
  return m;
}

ExtractionMatrix build_matrix(const ExtractionVocabulary& vocab,
                              const ReviewCollection& collection,
                              std::size_t min_item_reviews,
                              std::size_t min_extraction_reviews) {
  ExtractionMatrix m;
  std::map<std::string, std::size_t> item_row;
  for (const auto& [item, ids] : collection.index()) {
    if (ids.size() > min_item_reviews) {
      item_row[item] = m.row_labels.size();
      m.row_labels.push_back(item);
    }
  }
  for (const auto& [key, entry] : vocab.entries()) {
    if (entry.review_frequency() <= min_extraction_reviews) continue;
    const std::size_t col = m.col_labels.size();
    bool any = false;
    for (const auto& [item, count] : entry.per_item_counts) {
      auto it = item_row.find(item);
      if (it == item_row.end() || count == 0) continue;
      m.entries.push_back({it->second, col, static_cast<double>(count)});
      any = true;
    }
    if (any) m.col_labels.push_back(key);
  }
  if (m.entries.empty()) {
    throw Error(ErrorKind::kEmptyMatrix,
                "matrix empty after filtering (min_item_reviews=" +
                    std::to_string(min_item_reviews) +
                    ", min_extraction_reviews=" +
                    std::to_string(min_extraction_reviews) + ")");
  }
  std::sort(m.entries.begin(), m.entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return m;
}

void FactorModel::validate() const {
  if (item_embeddings.cols() < 1 ||
      extraction_embeddings.cols() != item_embeddings.cols()) {
    throw Error(ErrorKind::kIntegrity, "factor model: inconsistent K");
  }
  if (static_cast<std::size_t>(item_embeddings.rows()) != item_labels.size() ||
      static_cast<std::size_t>(extraction_embeddings.rows()) !=
          extraction_labels.size()) {
    throw Error(ErrorKind::kIntegrity, "factor model: label count mismatch");
  }
  if (!all_finite_nonnegative(item_embeddings) ||
      !all_finite_nonnegative(extraction_embeddings)) {
    throw Error(ErrorKind::kIntegrity,
                "factor model: entries must be finite and non-negative");
  }
  check_unique(item_labels, "item");
  check_unique(extraction_labels, "extraction");
}

void FactorModel::save(const std::filesystem::path& path) const {
  std::ostringstream out;
  out << kModelMagic << '\t' << kModelVersion << '\n';
  out << "k\t" << k() << '\n';
  out << "seed\t" << seed << '\n';
  out << "iterations\t" << iterations << '\n';
  auto dump = [&](const char* name, const std::vector<std::string>& labels,
                  const Eigen::MatrixXd& a) {
    out << name << '\t' << labels.size() << '\n';
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out << tsv_escape(labels[i]);
      for (Eigen::Index c = 0; c < a.cols(); ++c) {
        out << '\t' << fmt_double(a(static_cast<Eigen::Index>(i), c));
      }
      out << '\n';
    }
  };
  dump("items", item_labels, item_embeddings);
  dump("extractions", extraction_labels, extraction_embeddings);
  write_file(path, out.str());
}

FactorModel FactorModel::load(const std::filesystem::path& path) {
  const auto rows = parse_tsv(read_file(path));
  const std::string where = path.string();
  auto expect = [&](std::size_t n, const char* key) -> const Row& {
    if (n >= rows.size() || rows[n].size() != 2 || rows[n][0] != key) {
      throw Error(ErrorKind::kInput,
                  where + ": expected '" + std::string(key) + "' header");
    }
    return rows[n];
  };
  const Row& magic = expect(0, kModelMagic);
  if (magic[1] != std::to_string(kModelVersion)) {
    throw Error(ErrorKind::kInput, where + ": unsupported version " + magic[1]);
  }
  const auto k = static_cast<std::size_t>(std::stoull(expect(1, "k")[1]));
  FactorModel model;
  model.seed = std::stoull(expect(2, "seed")[1]);
  model.iterations = std::stoull(expect(3, "iterations")[1]);
  std::size_t n = 4;
  auto read_block = [&](const char* name, std::vector<std::string>& labels,
                        Eigen::MatrixXd& a) {
    const auto count = static_cast<std::size_t>(std::stoull(expect(n, name)[1]));
    ++n;
    a.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < count; ++i, ++n) {
      if (n >= rows.size() || rows[n].size() != k + 1) {
        throw Error(ErrorKind::kInput, where + ": truncated " + name);
      }
      labels.push_back(rows[n][0]);
      for (std::size_t c = 0; c < k; ++c) {
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
            parse_double(rows[n][c + 1], where);
      }
    }
  };
  read_block("items", model.item_labels, model.item_embeddings);
  read_block("extractions", model.extraction_labels,
             model.extraction_embeddings);
  model.validate();
  return model;
}

FactorModel nmf(const ExtractionMatrix& m, const NmfOptions& options,
                NmfTrace* trace) {
  if (m.entries.empty() || m.rows() == 0 || m.cols() == 0) {
    throw Error(ErrorKind::kParameter, "nmf: empty matrix");
  }
  if (options.k < 1 || options.k > std::min(m.rows(), m.cols())) {
    throw Error(ErrorKind::kParameter,
                "nmf: K=" + std::to_string(options.k) +
                    " must be in [1, min(rows, cols)=" +
                    std::to_string(std::min(m.rows(), m.cols())) + "]");
  }
  const auto rows = static_cast<Eigen::Index>(m.rows());
  const auto cols = static_cast<Eigen::Index>(m.cols());
  const auto k = static_cast<Eigen::Index>(options.k);

  double total = 0.0;
  for (const auto& c : m.entries) total += c.value;
  const double mean = total / (static_cast<double>(rows) * cols);
  const double scale = std::sqrt(mean / static_cast<double>(k));

  FactorModel model;
  model.item_labels = m.row_labels;
  model.extraction_labels = m.col_labels;
  model.seed = options.seed;
  Rng rng(options.seed);
  model.item_embeddings.resize(rows, k);
  model.extraction_embeddings.resize(cols, k);
  // row-major fill order pinned for reproducibility
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index c = 0; c < k; ++c)
      model.item_embeddings(i, c) = rng.uniform_open_closed() * scale;
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index c = 0; c < k; ++c)
      model.extraction_embeddings(j, c) = rng.uniform_open_closed() * scale;

  Eigen::MatrixXd& x = model.item_embeddings;
  Eigen::MatrixXd& e = model.extraction_embeddings;
  double err = residual_norm(m, x, e);
  if (trace) trace->errors.assign(1, err);

  for (std::size_t it = 1; it <= options.max_iters; ++it) {
    multiplicative_step(x, times_right(m, e), x * (e.transpose() * e));
    multiplicative_step(e, transpose_times(m, x), e * (x.transpose() * x));
    if (!all_finite_nonnegative(x) || !all_finite_nonnegative(e)) {
      throw NumericalError("nmf update", static_cast<long>(it));
    }
    const double next = residual_norm(m, x, e);
    if (!std::isfinite(next)) {
      throw NumericalError("nmf error", static_cast<long>(it));
    }
    if (trace) trace->errors.push_back(next);
    model.iterations = it;
    const double prev = err;
    err = next;
    if (err == 0.0) break;
    if (options.tol > 0.0 && prev > 0.0 && (prev - err) / prev < options.tol) {
      break;
    }
  }
  return model;
}

double frobenius_error(const ExtractionMatrix& m, const FactorModel& model) {
  return residual_norm(m, model.item_embeddings, model.extraction_embeddings);
}

double reconstruct(const FactorModel& model, std::size_t item,
                   std::size_t extraction) {
  if (item >= static_cast<std::size_t>(model.item_embeddings.rows()) ||
      extraction >=
          static_cast<std::size_t>(model.extraction_embeddings.rows())) {
    throw Error(ErrorKind::kParameter, "reconstruct: index out of range");
  }
  double sum = 0.0;
  for (Eigen::Index c = 0; c < model.item_embeddings.cols(); ++c) {
    sum += model.item_embeddings(static_cast<Eigen::Index>(item), c) *
           model.extraction_embeddings(static_cast<Eigen::Index>(extraction), c);
  }
  return sum;
}

}  // namespace subjqa
