#include "subjqa/released.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "subjqa/analysis.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

constexpr std::string_view kNoAnswer = "ANSWERNOTFOUND";

std::optional<bool> parse_bool(std::string_view s) {
  const std::string t = to_lower_ascii(trim(s));
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  return std::nullopt;
}

std::optional<int> parse_level(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  try {
    const double v = std::stod(t);
    const int level = static_cast<int>(v + 0.5);
    if (level < 1 || level > 5) return std::nullopt;
    return 6 - level;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string strip_marker(std::string text) {
  std::string t = trim(text);
  if (t.size() >= kNoAnswer.size() &&
      t.compare(t.size() - kNoAnswer.size(), kNoAnswer.size(), kNoAnswer) == 0) {
    t.resize(t.size() - kNoAnswer.size());
    t = trim(t);
  }
  return t;
}

// Byte offset of `surface` in `review`, preferring the occurrence closest
// to the released (character) start index.
std::optional<std::size_t> locate(const std::string& review,
                                  const std::string& surface,
                                  std::optional<std::size_t> hint) {
  std::optional<std::size_t> best;
  for (std::size_t pos = review.find(surface); pos != std::string::npos;
       pos = review.find(surface, pos + 1)) {
    if (!hint) return pos;
    auto dist = [&](std::size_t p) { return p > *hint ? p - *hint : *hint - p; };
    if (!best || dist(pos) < dist(*best)) best = pos;
  }
  return best;
}

std::optional<std::size_t> first_index(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == s.size()) return std::nullopt;
  std::size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  return std::stoull(std::string(s.substr(i, j - i)));
}

}  // namespace

std::vector<ReleasedExample> load_released_csv(const std::filesystem::path& path,
                                               const std::string& domain,
                                               Split split) {
  const auto rows = parse_csv(read_file(path));
  if (rows.empty()) return {};
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    col[to_lower_ascii(trim(rows[0][i]))] = i;
  }
  auto need = [&](const char* name) {
    auto it = col.find(name);
    if (it == col.end()) {
      throw Error(ErrorKind::kInput,
                  path.string() + ": missing column '" + name + "'");
    }
    return it->second;
  };
  auto maybe = [&](const char* name) -> std::optional<std::size_t> {
    auto it = col.find(name);
    if (it == col.end()) return std::nullopt;
    return it->second;
  };
  const std::size_t c_q = need("question");
  const std::size_t c_review = need("review");
  const std::size_t c_ans = need("human_ans_spans");
  const std::size_t c_qlevel = need("question_subj_level");
  const auto c_alevel = maybe("answer_subj_level");
  const auto c_idx = maybe("human_ans_indices");
  const auto c_rid = maybe("review_id");
  const auto c_item = maybe("item_id");
  const auto c_qlab = maybe("is_ques_subjective");
  const auto c_alab = maybe("is_ans_subjective");
  const auto c_mod = maybe("query_mod");
  const auto c_asp = maybe("query_asp");
  const auto c_domain = maybe("domain");

  auto cell = [](const Row& r, std::optional<std::size_t> c) -> std::string {
    return c && *c < r.size() ? r[*c] : std::string();
  };

  std::vector<ReleasedExample> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const Row& r = rows[i];
    if (r.size() == 1 && trim(r[0]).empty()) continue;
    if (r.size() < rows[0].size()) {
      throw Error(ErrorKind::kInput, path.string() + ": short row " +
                                         std::to_string(i));
    }
    ReleasedExample rx;
    AnnotatedExample& ex = rx.example;
    ex.domain = c_domain && !trim(r[*c_domain]).empty() ? trim(r[*c_domain])
                                                        : domain;
    ex.question_text = r[c_q];
    ex.review_text = strip_marker(r[c_review]);
    ex.review_id = cell(r, c_rid);
    ex.split = split;
    rx.item_id = cell(r, c_item);
    const std::string mod = cell(r, c_mod), asp = cell(r, c_asp);
    ex.topic_key = mod.empty() && asp.empty()
                       ? normalize_question(ex.question_text)
                       : to_lower_ascii(mod) + "|" + to_lower_ascii(asp);
    ex.question_subj_score = parse_level(r[c_qlevel]).value_or(0);
    const std::string ans = trim(r[c_ans]);
    if (!ans.empty() && ans != kNoAnswer) {
      const auto hint = first_index(cell(r, c_idx));
      const auto pos = locate(ex.review_text, ans, hint);
      const std::size_t start = pos.value_or(0);
      ex.answer = AnswerSpan{start, start + ans.size(), ans};
      ex.answer_subj_score =
          parse_level(cell(r, c_alevel)).value_or(ex.question_subj_score);
      if (c_alab) rx.answer_label = parse_bool(r[*c_alab]);
    }
    if (c_qlab) rx.question_label = parse_bool(r[*c_qlab]);
    out.push_back(std::move(rx));
  }
  return out;
}

std::vector<ReleasedExample> load_released_dir(const std::filesystem::path& root) {
  std::vector<ReleasedExample> out;
  if (!std::filesystem::is_directory(root)) return out;
  std::vector<std::filesystem::path> domains;
  for (const auto& e : std::filesystem::directory_iterator(root)) {
    if (e.is_directory()) domains.push_back(e.path());
  }
  std::sort(domains.begin(), domains.end());
  for (const auto& d : domains) {
    for (Split s : kSplits) {
      const auto p = d / "splits" / (std::string(to_string(s)) + ".csv");
      if (!std::filesystem::exists(p)) continue;
      auto part = load_released_csv(p, d.filename().string(), s);
      out.insert(out.end(), std::make_move_iterator(part.begin()),
                 std::make_move_iterator(part.end()));
    }
  }
  return out;
}

std::optional<int> calibrate_threshold(const std::vector<ReleasedExample>& rows) {
  std::size_t labelled = 0;
  std::optional<int> best;
  std::size_t best_agree = 0;
  for (int t = 1; t <= 5; ++t) {
    std::size_t agree = 0;
    labelled = 0;
    for (const auto& r : rows) {
      if (r.question_label) {
        ++labelled;
        agree += is_subjective(r.example.question_subj_score, t) ==
                 *r.question_label;
      }
      if (r.answer_label && r.example.answer_subj_score) {
        ++labelled;
        agree += is_subjective(*r.example.answer_subj_score, t) ==
                 *r.answer_label;
      }
    }
    if (!best || agree > best_agree) {
      best = t;
      best_agree = agree;
    }
  }
  if (labelled == 0) return std::nullopt;
  return best;
}

std::vector<AnnotatedExample> examples_of(const std::vector<ReleasedExample>& rows) {
  std::vector<AnnotatedExample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.example);
  return out;
}

}  // namespace subjqa
