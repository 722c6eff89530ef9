#include "subjqa/neighborhood.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

std::string fmt_weight(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double row_norm(const Eigen::MatrixXd& rows, Eigen::Index r) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) s += rows(r, c) * rows(r, c);
  return std::sqrt(s);
}

bool has_letter_or_digit(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return std::isalnum(u) || u >= 0x80;
  });
}

}  // namespace

bool neighbor_before(const Neighbor& a, const Neighbor& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return a.key < b.key;
}

double cosine_similarity(const Eigen::MatrixXd& rows, Eigen::Index a,
                         Eigen::Index b) {
  double dot = 0.0;
  for (Eigen::Index c = 0; c < rows.cols(); ++c) dot += rows(a, c) * rows(b, c);
  const double denom = row_norm(rows, a) * row_norm(rows, b);
  return denom > 0.0 ? dot / denom : 0.0;
}

NeighborhoodModel build_neighborhood(const FactorModel& model,
                                     std::size_t k_max) {
  const Eigen::MatrixXd& emb = model.extraction_embeddings;
  const auto n = emb.rows();
  NeighborhoodModel out;
  out.k_max = k_max;
  std::vector<bool> nonzero(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) nonzero[i] = row_norm(emb, i) > 0.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    auto& list = out.neighbors[model.extraction_labels[i]];
    if (!nonzero[i] || k_max == 0) continue;
    std::vector<Neighbor> all;
    all.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i || !nonzero[j]) continue;
      all.push_back({model.extraction_labels[j], cosine_similarity(emb, i, j)});
    }
    const std::size_t keep = std::min(k_max, all.size());
    std::partial_sort(all.begin(), all.begin() + keep, all.end(),
                      neighbor_before);
    all.resize(keep);
    list = std::move(all);
  }
  return out;
}

void NeighborhoodModel::save(const std::filesystem::path& path) const {
  std::string out = tsv_line({"extraction", "rank", "neighbor", "weight"});
  out += tsv_line({"#k_max", std::to_string(k_max)});
  for (const auto& [key, list] : neighbors) {
    if (list.empty()) {
      out += tsv_line({key, "0", "", ""});
      continue;
    }
    for (std::size_t r = 0; r < list.size(); ++r) {
      out += tsv_line(
          {key, std::to_string(r + 1), list[r].key, fmt_weight(list[r].weight)});
    }
  }
  write_file(path, out);
}

NeighborhoodModel NeighborhoodModel::load(const std::filesystem::path& path) {
  NeighborhoodModel n;
  const auto rows = parse_tsv(read_file(path));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (r.size() == 2 && r[0] == "#k_max") {
      n.k_max = std::stoull(r[1]);
      continue;
    }
    if (r.size() != 4) {
      throw Error(ErrorKind::kInput, "malformed neighbor row in " + path.string());
    }
    auto& list = n.neighbors[r[0]];
    if (r[1] == "0") continue;
    list.push_back({r[2], std::stod(r[3])});
  }
  return n;
}

std::vector<std::string> extraction_words(std::string_view key) {
  std::vector<std::string> words;
  for (const Token& t : tokenize(key)) {
    if (has_letter_or_digit(t.surface)) words.push_back(to_lower_ascii(t.surface));
  }
  return words;
}

double jaccard_similarity(std::string_view key_a, std::string_view key_b) {
  const auto wa = extraction_words(key_a);
  const auto wb = extraction_words(key_b);
  const std::set<std::string> a(wa.begin(), wa.end());
  const std::set<std::string> b(wb.begin(), wb.end());
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& w : a) inter += b.count(w);
  return static_cast<double>(inter) /
         static_cast<double>(a.size() + b.size() - inter);
}

WordVectors WordVectors::load(const std::filesystem::path& path) {
  WordVectors wv;
  bool first = true;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    std::istringstream in{std::string(line)};
    std::string word;
    if (!(in >> word)) continue;
    std::vector<double> v;
    double x;
    while (in >> x) v.push_back(x);
    if (v.empty()) continue;
    // "400000 300" header of the word2vec text format
    if (first && v.size() == 1 &&
        std::all_of(word.begin(), word.end(),
                    [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      first = false;
      continue;
    }
    first = false;
    wv.add(std::move(word), std::move(v));
  }
  return wv;
}

void WordVectors::add(std::string word, std::vector<double> vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw Error(ErrorKind::kInput, "word vector for '" + word +
                                       "' has dimension " +
                                       std::to_string(vector.size()));
  }
  table_[to_lower_ascii(word)] = std::move(vector);
}

const std::vector<double>* WordVectors::find(std::string_view word) const {
  auto it = table_.find(std::string(word));
  return it == table_.end() ? nullptr : &it->second;
}

double WordVectors::similarity(std::string_view key_a,
                               std::string_view key_b) const {
  auto pooled = [&](std::string_view key, std::vector<double>& out) {
    out.assign(dim_, 0.0);
    std::size_t hits = 0;
    for (const auto& w : extraction_words(key)) {
      if (const auto* v = find(w)) {
        for (std::size_t d = 0; d < dim_; ++d) out[d] += (*v)[d];
        ++hits;
      }
    }
    for (double& x : out) x /= static_cast<double>(std::max<std::size_t>(hits, 1));
    return hits > 0;
  };
  std::vector<double> a, b;
  if (!pooled(key_a, a) || !pooled(key_b, b)) {
    return jaccard_similarity(key_a, key_b);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    dot += a[d] * b[d];
    na += a[d] * a[d];
    nb += b[d] * b[d];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
}

SemanticSimilarity make_semantic_similarity(const WordVectors* vectors) {
  if (vectors == nullptr) return jaccard_similarity;
  return [vectors](std::string_view a, std::string_view b) {
    return vectors->similarity(a, b);
  };
}

NeighborhoodModel prune_neighbors(const NeighborhoodModel& n,
                                  const SemanticSimilarity& semantic_sim,
                                  double cos_min, double sem_max) {
  NeighborhoodModel out;
  out.k_max = n.k_max;
  for (const auto& [key, list] : n.neighbors) {
    auto& kept = out.neighbors[key];
    for (const Neighbor& nb : list) {
      if (nb.weight >= cos_min && semantic_sim(key, nb.key) <= sem_max) {
        kept.push_back(nb);
      }
    }
  }
  return out;
}

std::size_t lower_median_frequency(const ExtractionVocabulary& vocab) {
  if (vocab.empty()) return 0;
  std::vector<std::size_t> freqs;
  freqs.reserve(vocab.size());
  for (const auto& [key, e] : vocab.entries()) freqs.push_back(e.review_frequency());
  const std::size_t mid = (freqs.size() - 1) / 2;
  std::nth_element(freqs.begin(), freqs.begin() + mid, freqs.end());
  return freqs[mid];
}

std::vector<Topic> select_topics(const NeighborhoodModel& pruned,
                                 const ExtractionVocabulary& vocab,
                                 std::size_t min_neighbors) {
  const std::size_t median = lower_median_frequency(vocab);
  std::vector<Topic> topics;
  for (const auto& [key, list] : pruned.neighbors) {
    if (list.size() <= min_neighbors) continue;
    const std::size_t freq = vocab.frequency(key);
    if (freq <= median) continue;
    const bool has_more_frequent =
        std::any_of(list.begin(), list.end(), [&](const Neighbor& nb) {
          return vocab.frequency(nb.key) > freq;
        });
    if (!has_more_frequent) continue;
    topics.push_back(Topic{key, list, freq});
  }
  return topics;
}

void save_topics(const std::filesystem::path& path,
                 const std::vector<Topic>& topics) {
  std::string out = tsv_line({"topic", "frequency", "neighbor", "weight"});
  for (const Topic& t : topics) {
    for (const Neighbor& nb : t.surviving_neighbors) {
      out += tsv_line(
          {t.key, std::to_string(t.frequency), nb.key, fmt_weight(nb.weight)});
    }
  }
  write_file(path, out);
}

std::vector<Topic> load_topics(const std::filesystem::path& path) {
  std::vector<Topic> topics;
  const auto rows = parse_tsv(read_file(path));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (r.size() != 4) {
      throw Error(ErrorKind::kInput, "malformed topic row in " + path.string());
    }
    if (topics.empty() || topics.back().key != r[0]) {
      topics.push_back(Topic{r[0], {}, std::stoull(r[1])});
    }
    topics.back().surviving_neighbors.push_back({r[2], std::stod(r[3])});
  }
  return topics;
}

std::vector<TopicReviewPair> pair_reviews(const Topic& topic,
                                          const ReviewCollection& collection,
                                          const ExtractionVocabulary& vocab,
                                          std::size_t max_pairs) {
  std::vector<Neighbor> ordered = topic.surviving_neighbors;
  std::sort(ordered.begin(), ordered.end(), neighbor_before);
  std::map<std::string, const Neighbor*> best;  // review_id -> neighbor
  for (const Neighbor& nb : ordered) {
    const VocabularyEntry* e = vocab.find(nb.key);
    if (!e) continue;
    for (const std::string& rid : e->review_ids) {
      if (collection.find(rid) == nullptr) continue;
      best.try_emplace(rid, &nb);
    }
  }
  std::vector<TopicReviewPair> pairs;
  pairs.reserve(best.size());
  for (const auto& [rid, nb] : best) {
    pairs.push_back(TopicReviewPair{topic, rid, nb->key, nb->weight});
  }
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const TopicReviewPair& a, const TopicReviewPair& b) {
                     if (a.neighbor_weight != b.neighbor_weight) {
                       return a.neighbor_weight > b.neighbor_weight;
                     }
                     return a.review_id < b.review_id;
                   });
  if (pairs.size() > max_pairs) pairs.resize(max_pairs);
  return pairs;
}

void save_pairs(const std::filesystem::path& path,
                const std::vector<TopicReviewPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j = {{"topic", p.topic.key},
              {"review_id", p.review_id},
              {"matched_neighbor", p.matched_neighbor},
              {"weight", p.neighbor_weight}};
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

std::vector<TopicReviewPair> load_pairs(const std::filesystem::path& path,
                                        const std::vector<Topic>& topics) {
  std::map<std::string, const Topic*> by_key;
  for (const Topic& t : topics) by_key[t.key] = &t;
  std::vector<TopicReviewPair> pairs;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line);
    const std::string key = j.at("topic").get<std::string>();
    auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw Error(ErrorKind::kIntegrity, "pair references unknown topic " + key);
    }
    pairs.push_back(TopicReviewPair{*it->second,
                                    j.at("review_id").get<std::string>(),
                                    j.at("matched_neighbor").get<std::string>(),
                                    j.at("weight").get<double>()});
  }
  return pairs;
}

}  // namespace subjqa
