#ifndef SUBJQA_CORPUS_HPP_
#define SUBJQA_CORPUS_HPP_

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace subjqa {

// Review domain. Known domains are recognized case-insensitively; anything
// else is kOther. The label is kept verbatim either way.
class Domain {
 public:
  enum class Kind {
    kTripAdvisor,
    kRestaurants,
    kMovies,
    kBooks,
    kElectronics,
    kGrocery,
    kOther,
  };

  Domain() = default;
  explicit Domain(std::string label);

  Kind kind() const noexcept { return kind_; }
  const std::string& label() const noexcept { return label_; }

  friend bool operator==(const Domain& a, const Domain& b) {
    return a.label_ == b.label_;
  }
  friend auto operator<=>(const Domain& a, const Domain& b) {
    return a.label_ <=> b.label_;
  }

 private:
  std::string label_ = "other";
  Kind kind_ = Kind::kOther;
};

struct Review {
  std::string review_id;
  std::string item_id;
  Domain domain;
  std::string text;
};

struct Token {
  std::string surface;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;

  friend bool operator==(const Token&, const Token&) = default;
};

using TokenSequence = std::vector<Token>;

// Splits on Unicode whitespace and emits every punctuation code point as
// its own token. Offsets are byte offsets into `text`; case is preserved.
TokenSequence tokenize(std::string_view text);

// Reassembles the text from tokens and the original inter-token bytes.
std::string detokenize(const TokenSequence& tokens, std::string_view text);

// Indices of the tokens lying entirely inside [byte_start, byte_end).
std::vector<std::size_t> tokens_in_span(const TokenSequence& tokens,
                                        std::size_t byte_start,
                                        std::size_t byte_end);

// True iff byte_start is the start of some token and byte_end is the end of
// some token at or after it.
bool is_token_aligned(const TokenSequence& tokens, std::size_t byte_start,
                      std::size_t byte_end);

class ReviewCollection {
 public:
  ReviewCollection() = default;
  // Throws Error(kInput) on a duplicate review_id.
  explicit ReviewCollection(std::vector<Review> reviews);

  const std::vector<Review>& reviews() const noexcept { return reviews_; }
  std::size_t size() const noexcept { return reviews_.size(); }
  bool empty() const noexcept { return reviews_.empty(); }

  // item_id -> review_ids, in load order.
  const std::map<std::string, std::vector<std::string>>& index() const {
    return index_;
  }
  const Review* find(std::string_view review_id) const;
  const Review& at(std::string_view review_id) const;

 private:
  std::vector<Review> reviews_;
  std::map<std::string, std::vector<std::string>> index_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct LoadReport {
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Reads line-delimited JSON records with fields review_id, item_id, text and
// an optional domain (default_domain applies when absent). Field order is
// free and unknown fields are ignored. Malformed records are skipped with a
// warning; a missing file or duplicate review_id is fatal.
ReviewCollection load_reviews(const std::filesystem::path& path,
                              const Domain& default_domain,
                              LoadReport* report = nullptr);

// Concatenation of several loads; duplicate ids across files are fatal.
ReviewCollection merge_collections(const std::vector<ReviewCollection>& parts);

std::string review_to_json_line(const Review& review);
void save_reviews(const std::filesystem::path& path,
                  const ReviewCollection& collection);

}  // namespace subjqa

#endif  // SUBJQA_CORPUS_HPP_
