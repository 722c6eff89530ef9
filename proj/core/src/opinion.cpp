#include "subjqa/opinion.hpp"

#include <algorithm>
#include <optional>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

#ifndef SUBJQA_DATA_DIR
#define SUBJQA_DATA_DIR "data"
#endif

namespace subjqa {
namespace {

using json = nlohmann::json;

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> kStop = {
      "a",     "about", "after", "all",   "also",  "am",    "an",    "and",
      "any",   "are",   "as",    "at",    "be",    "been",  "being", "but",
      "by",    "can",   "could", "did",   "do",    "does",  "for",   "from",
      "had",   "has",   "have",  "he",    "her",   "here",  "his",   "i",
      "if",    "in",    "into",  "is",    "it",    "its",   "just",  "me",
      "more",  "most",  "my",    "of",    "on",    "or",    "our",   "she",
      "so",    "some",  "such",  "than",  "that",  "the",   "their", "them",
      "then",  "there", "these", "they",  "this",  "those", "to",    "up",
      "us",    "was",   "we",    "were",  "what",  "when",  "which", "while",
      "who",   "will",  "with",  "would", "you",   "your",  "s",     "t",
  };
  return kStop;
}

bool is_copula(std::string_view w) {
  return w == "is" || w == "was" || w == "were" || w == "are";
}

bool has_letter(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
  });
}

std::string collapse_spaces(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

class Extractor {
 public:
  Extractor(std::string_view text, const Lexicons& lex)
      : text_(text), lex_(lex), tokens_(tokenize(text)) {
    lower_.reserve(tokens_.size());
    for (const Token& t : tokens_) lower_.push_back(to_lower_ascii(t.surface));
  }

  std::vector<ExtractionMention> run() const {
    std::vector<ExtractionMention> out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!lex_.opinions.contains(lower_[i])) continue;
      const std::size_t first = opinion_start(i);
      if (auto m = copula_pattern(first, i)) {
        out.push_back(*m);
      } else if (auto f = forward_pattern(first, i)) {
        out.push_back(*f);
      }
    }
    return out;
  }

 private:
  bool aspect_token(std::size_t k) const {
    const std::string& w = lower_[k];
    return has_letter(w) && !stopwords().contains(w) &&
           !lex_.opinions.contains(w) && !lex_.modifiers.is_modifier(w);
  }

  // Absorbs a negator separated from the opinion word only by intensifiers.
  std::size_t opinion_start(std::size_t i) const {
    std::size_t k = i;
    while (k > 0 && lex_.modifiers.is_intensifier(lower_[k - 1])) --k;
    if (k > 0 && lex_.modifiers.is_negator(lower_[k - 1])) return k - 1;
    return i;
  }

  ExtractionMention make(std::size_t op_first, std::size_t op_last,
                         std::size_t asp_first, std::size_t asp_last) const {
    ExtractionMention m;
    m.opinion_first = op_first;
    m.opinion_last = op_last;
    m.aspect_first = asp_first;
    m.aspect_last = asp_last;
    m.extraction.opinion = std::string(text_.substr(
        tokens_[op_first].byte_start,
        tokens_[op_last].byte_end - tokens_[op_first].byte_start));
    m.extraction.aspect = std::string(text_.substr(
        tokens_[asp_first].byte_start,
        tokens_[asp_last].byte_end - tokens_[asp_first].byte_start));
    return m;
  }

  // ASPECT (is|was|were|are) [modifiers] OPINION
  std::optional<ExtractionMention> copula_pattern(std::size_t first,
                                                  std::size_t i) const {
    std::size_t k = first;
    while (k > 0 && lex_.modifiers.is_modifier(lower_[k - 1])) --k;
    if (k < 2 || !is_copula(lower_[k - 1])) return std::nullopt;
    const std::size_t head = k - 2;
    if (i - head > kAspectWindow || !aspect_token(head)) return std::nullopt;
    std::size_t start = head;
    while (start > 0 && head - (start - 1) < kMaxAspectTokens &&
           aspect_token(start - 1)) {
      --start;
    }
    return make(first, i, start, head);
  }

  // OPINION [stopwords] ASPECT, head within the window after the opinion.
  std::optional<ExtractionMention> forward_pattern(std::size_t first,
                                                   std::size_t i) const {
    const std::size_t limit = std::min(tokens_.size() - 1, i + kAspectWindow);
    std::size_t k = i + 1;
    while (k <= limit && !aspect_token(k)) {
      const std::string& w = lower_[k];
      if (!has_letter(w) || lex_.opinions.contains(w)) return std::nullopt;
      ++k;
    }
    if (k > limit) return std::nullopt;
    std::size_t end = k;
    while (end + 1 <= limit && end + 1 - k < kMaxAspectTokens &&
           aspect_token(end + 1)) {
      ++end;
    }
    return make(first, i, k, end);
  }

  std::string_view text_;
  const Lexicons& lex_;
  TokenSequence tokens_;
  std::vector<std::string> lower_;
};

Polarity parse_polarity(std::string_view s) {
  if (s == "-" || s == "negative") return Polarity::kNegative;
  if (s == "0" || s == "neutral") return Polarity::kNeutral;
  return Polarity::kPositive;
}

// Strips comments and splits "entry<TAB>extra".
std::vector<std::pair<std::string, std::string>> lexicon_lines(
    std::string_view contents) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::string_view line : split_lines(contents)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    const auto tab = entry.find('\t');
    if (tab == std::string::npos) {
      out.emplace_back(to_lower_ascii(entry), std::string());
    } else {
      out.emplace_back(to_lower_ascii(trim(entry.substr(0, tab))),
                       trim(entry.substr(tab + 1)));
    }
  }
  return out;
}

}  // namespace

OpinionLexicon OpinionLexicon::parse(std::string_view contents) {
  std::map<std::string, Polarity> entries;
  for (auto& [word, extra] : lexicon_lines(contents)) {
    entries[word] = parse_polarity(extra);
  }
  return OpinionLexicon(std::move(entries));
}

OpinionLexicon OpinionLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

bool OpinionLexicon::contains(std::string_view lower_word) const {
  return entries_.find(lower_word) != entries_.end();
}

ModifierLexicon::ModifierLexicon()
    : negators_{"not", "no", "never"}, intensifiers_{"very", "quite", "too"} {}

ModifierLexicon ModifierLexicon::parse(std::string_view contents) {
  std::set<std::string, std::less<>> neg, inten;
  for (auto& [word, kind] : lexicon_lines(contents)) {
    if (kind == "intensifier") {
      inten.insert(word);
    } else if (kind.empty() || kind == "negation") {
      neg.insert(word);
    } else {
      throw Error(ErrorKind::kInput, "unknown modifier kind '" + kind + "'");
    }
  }
  return ModifierLexicon(std::move(neg), std::move(inten));
}

ModifierLexicon ModifierLexicon::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

std::filesystem::path Lexicons::default_dir() {
  return std::filesystem::path(SUBJQA_DATA_DIR) / "lexicons";
}

Lexicons Lexicons::load_dir(const std::filesystem::path& dir) {
  Lexicons lex;
  lex.opinions = OpinionLexicon::load(dir / "opinion.txt");
  if (std::filesystem::exists(dir / "modifiers.txt")) {
    lex.modifiers = ModifierLexicon::load(dir / "modifiers.txt");
  }
  return lex;
}

std::string Extraction::canonical_key() const {
  return to_lower_ascii(collapse_spaces(opinion)) + "|" +
         to_lower_ascii(collapse_spaces(aspect));
}

std::vector<ExtractionMention> extract_opinions(std::string_view text,
                                                const Lexicons& lexicons) {
  return Extractor(text, lexicons).run();
}

std::vector<ExtractionMention> extract_opinions(const Review& review,
                                                const Lexicons& lexicons) {
  return extract_opinions(review.text, lexicons);
}

const VocabularyEntry* ExtractionVocabulary::find(std::string_view key) const {
  auto it = entries_.find(std::string(key));
  return it == entries_.end() ? nullptr : &it->second;
}

std::size_t ExtractionVocabulary::frequency(std::string_view key) const {
  const VocabularyEntry* e = find(key);
  return e ? e->review_frequency() : 0;
}

namespace {

// Representative surface form: the smallest variant, so the result does not
// depend on which review was seen first.
void keep_smaller_surface(Extraction& current, const Extraction& candidate) {
  if (std::tie(candidate.opinion, candidate.aspect) <
      std::tie(current.opinion, current.aspect)) {
    current = candidate;
  }
}

}  // namespace

void ExtractionVocabulary::add(const Extraction& extraction,
                               const Review& review) {
  const std::string key = extraction.canonical_key();
  auto [it, inserted] = entries_.try_emplace(key);
  VocabularyEntry& e = it->second;
  if (inserted) {
    e.extraction = extraction;
  } else {
    keep_smaller_surface(e.extraction, extraction);
  }
  auto pos = std::lower_bound(e.review_ids.begin(), e.review_ids.end(),
                              review.review_id);
  if (pos != e.review_ids.end() && *pos == review.review_id) return;
  e.review_ids.insert(pos, review.review_id);
  ++e.per_item_counts[review.item_id];
}

void ExtractionVocabulary::merge(const ExtractionVocabulary& other) {
  for (const auto& [key, theirs] : other.entries_) {
    auto [it, inserted] = entries_.try_emplace(key, theirs);
    if (inserted) continue;
    VocabularyEntry& mine = it->second;
    keep_smaller_surface(mine.extraction, theirs.extraction);
    std::vector<std::string> merged;
    std::set_union(mine.review_ids.begin(), mine.review_ids.end(),
                   theirs.review_ids.begin(), theirs.review_ids.end(),
                   std::back_inserter(merged));
    // Reviews belong to exactly one item, so disjoint review sets add.
    std::vector<std::string> shared;
    std::set_intersection(mine.review_ids.begin(), mine.review_ids.end(),
                          theirs.review_ids.begin(), theirs.review_ids.end(),
                          std::back_inserter(shared));
    if (!shared.empty()) {
      throw Error(ErrorKind::kIntegrity,
                  "merging vocabularies built from overlapping reviews");
    }
    for (const auto& [item, n] : theirs.per_item_counts) {
      mine.per_item_counts[item] += n;
    }
    mine.review_ids = std::move(merged);
  }
}

bool operator==(const ExtractionVocabulary& a, const ExtractionVocabulary& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (auto ia = a.entries_.begin(), ib = b.entries_.begin();
       ia != a.entries_.end(); ++ia, ++ib) {
    if (ia->first != ib->first) return false;
    const VocabularyEntry& x = ia->second;
    const VocabularyEntry& y = ib->second;
    if (!(x.extraction == y.extraction) || x.review_ids != y.review_ids ||
        x.per_item_counts != y.per_item_counts) {
      return false;
    }
  }
  return true;
}

void ExtractionVocabulary::save(const std::filesystem::path& path) const {
  std::string out;
  for (const auto& [key, e] : entries_) {
    json j = {{"key", key},
              {"opinion", e.extraction.opinion},
              {"aspect", e.extraction.aspect},
              {"review_frequency", e.review_frequency()},
              {"reviews", e.review_ids},
              {"items", e.per_item_counts}};
    out += j.dump() + "\n";
  }
  write_file(path, out);
}

ExtractionVocabulary ExtractionVocabulary::load(
    const std::filesystem::path& path) {
  ExtractionVocabulary vocab;
  const std::string file_text = read_file(path);
  for (std::string_view line : split_lines(file_text)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(ErrorKind::kInput, "malformed vocabulary line in " +
                                         path.string());
    }
    VocabularyEntry e;
    e.extraction.opinion = j.at("opinion").get<std::string>();
    e.extraction.aspect = j.at("aspect").get<std::string>();
    e.review_ids = j.at("reviews").get<std::vector<std::string>>();
    e.per_item_counts = j.at("items").get<std::map<std::string, std::size_t>>();
    std::sort(e.review_ids.begin(), e.review_ids.end());
    const std::string key = j.at("key").get<std::string>();
    if (key != e.extraction.canonical_key()) {
      throw Error(ErrorKind::kIntegrity, "vocabulary key mismatch: " + key);
    }
    vocab.entries_.emplace(key, std::move(e));
  }
  return vocab;
}

ExtractionVocabulary aggregate_extractions(const ReviewCollection& collection,
                                           const Lexicons& lexicons) {
  ExtractionVocabulary vocab;
  for (const Review& r : collection.reviews()) {
    for (const ExtractionMention& m : extract_opinions(r, lexicons)) {
      vocab.add(m.extraction, r);
    }
  }
  return vocab;
}

}  // namespace subjqa
