#ifndef SUBJQA_OPINION_HPP_
#define SUBJQA_OPINION_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "subjqa/corpus.hpp"

namespace subjqa {

enum class Polarity { kPositive, kNegative, kNeutral };

// Opinion words (lowercase) with an optional polarity.
class OpinionLexicon {
 public:
  OpinionLexicon() = default;
  explicit OpinionLexicon(std::map<std::string, Polarity> entries)
      : entries_(entries.begin(), entries.end()) {}

  // One lowercase entry per line, '#' starts a comment. An entry may carry
  // a polarity after a tab: "+", "-" or "0".
  static OpinionLexicon load(const std::filesystem::path& path);
  static OpinionLexicon parse(std::string_view contents);

  bool contains(std::string_view lower_word) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Polarity, std::less<>> entries_;
};

// Negators are absorbed into the opinion span ("not believable");
// intensifiers may sit between an opinion and its negator or copula but are
// not part of the opinion ("quite impressive" -> "impressive").
class ModifierLexicon {
 public:
  ModifierLexicon();  // {not, no, never} and {very, quite, too}
  ModifierLexicon(std::set<std::string, std::less<>> negators,
                  std::set<std::string, std::less<>> intensifiers)
      : negators_(std::move(negators)), intensifiers_(std::move(intensifiers)) {}

  // Lines are "word" (negator) or "word<TAB>negation|intensifier".
  static ModifierLexicon load(const std::filesystem::path& path);
  static ModifierLexicon parse(std::string_view contents);

  bool is_negator(std::string_view w) const { return negators_.contains(w); }
  bool is_intensifier(std::string_view w) const {
    return intensifiers_.contains(w);
  }
  bool is_modifier(std::string_view w) const {
    return is_negator(w) || is_intensifier(w);
  }

 private:
  std::set<std::string, std::less<>> negators_;
  std::set<std::string, std::less<>> intensifiers_;
};

struct Lexicons {
  OpinionLexicon opinions;
  ModifierLexicon modifiers;

  // Loads data/lexicons/{opinion,modifiers}.txt from the given directory.
  static Lexicons load_dir(const std::filesystem::path& dir);
  static std::filesystem::path default_dir();
};

struct Extraction {
  std::string opinion;
  std::string aspect;

  // Lowercase "opinion|aspect"; the deduplication identity.
  std::string canonical_key() const;
  friend bool operator==(const Extraction&, const Extraction&) = default;
};

// An extraction anchored to inclusive token ranges of its review.
struct ExtractionMention {
  Extraction extraction;
  std::size_t opinion_first = 0;
  std::size_t opinion_last = 0;
  std::size_t aspect_first = 0;
  std::size_t aspect_last = 0;
};

// Window (in tokens) between the opinion word and the aspect head.
inline constexpr std::size_t kAspectWindow = 4;
// Maximum number of tokens in an aspect noun phrase.
inline constexpr std::size_t kMaxAspectTokens = 3;

std::vector<ExtractionMention> extract_opinions(const Review& review,
                                                const Lexicons& lexicons);
std::vector<ExtractionMention> extract_opinions(std::string_view text,
                                                const Lexicons& lexicons);

struct VocabularyEntry {
  Extraction extraction;
  // Distinct reviews containing the extraction, sorted ascending.
  std::vector<std::string> review_ids;
  // item_id -> number of distinct reviews of that item containing it.
  std::map<std::string, std::size_t> per_item_counts;

  std::size_t review_frequency() const { return review_ids.size(); }
};

class ExtractionVocabulary {
 public:
  using Entries = std::map<std::string, VocabularyEntry>;

  const Entries& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const VocabularyEntry* find(std::string_view key) const;
  std::size_t frequency(std::string_view key) const;

  // Records that `review` contains `extraction`; repeated adds for the same
  // review are idempotent.
  void add(const Extraction& extraction, const Review& review);
  // Commutative merge of two partial vocabularies.
  void merge(const ExtractionVocabulary& other);

  void save(const std::filesystem::path& path) const;
  static ExtractionVocabulary load(const std::filesystem::path& path);

  friend bool operator==(const ExtractionVocabulary& a,
                         const ExtractionVocabulary& b);

 private:
  Entries entries_;
};

ExtractionVocabulary aggregate_extractions(const ReviewCollection& collection,
                                           const Lexicons& lexicons);

}  // namespace subjqa

#endif  // SUBJQA_OPINION_HPP_
