#include "subjqa/corpus.hpp"

#include <algorithm>
#include <array>
#include <utility>

#include "json.hpp"
#include "subjqa/common.hpp"
#include "subjqa/text_table.hpp"

namespace subjqa {
namespace {

using json = nlohmann::json;

// Decodes one code point starting at text[pos]; returns its byte length.
// Invalid sequences decode as a single byte so offsets stay total.
std::size_t decode_utf8(std::string_view text, std::size_t pos,
                        char32_t* cp) {
  const auto b0 = static_cast<unsigned char>(text[pos]);
  auto cont = [&](std::size_t k) -> int {
    if (pos + k >= text.size()) return -1;
    const auto b = static_cast<unsigned char>(text[pos + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    *cp = b0;
    return 1;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      *cp = (static_cast<char32_t>(b0 & 0x1F) << 6) | c1;
      return 2;
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      *cp = (static_cast<char32_t>(b0 & 0x0F) << 12) | (c1 << 6) | c2;
      return 3;
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      *cp = (static_cast<char32_t>(b0 & 0x07) << 18) | (c1 << 12) |
            (c2 << 6) | c3;
      return 4;
    }
  }
  *cp = 0xFFFD;
  return 1;
}

bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000: case 0xFEFF:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200B;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) ||
           (c >= 0x5B && c <= 0x60) || (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB:
    case 0xBF:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0xFF01 && c <= 0xFF0F);
}

std::string string_field(const json& record, const char* name) {
  auto it = record.find(name);
  if (it == record.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  return {};
}

}  // namespace

Domain::Domain(std::string label) : label_(std::move(label)) {
  static const std::array<std::pair<const char*, Kind>, 6> kKnown = {{
      {"tripadvisor", Kind::kTripAdvisor},
      {"restaurants", Kind::kRestaurants},
      {"movies", Kind::kMovies},
      {"books", Kind::kBooks},
      {"electronics", Kind::kElectronics},
      {"grocery", Kind::kGrocery},
  }};
  const std::string lower = to_lower_ascii(label_);
  kind_ = Kind::kOther;
  for (const auto& [name, kind] : kKnown) {
    if (lower == name) kind_ = kind;
  }
}

TokenSequence tokenize(std::string_view text) {
  TokenSequence tokens;
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  auto flush_word = [&](std::size_t end) {
    if (word_start == std::string_view::npos) return;
    tokens.push_back(Token{std::string(text.substr(word_start, end - word_start)),
                           word_start, end});
    word_start = std::string_view::npos;
  };
  while (pos < text.size()) {
    char32_t cp;
    const std::size_t len = decode_utf8(text, pos, &cp);
    if (is_space(cp)) {
      flush_word(pos);
    } else if (is_punct(cp)) {
      flush_word(pos);
      tokens.push_back(Token{std::string(text.substr(pos, len)), pos, pos + len});
    } else if (word_start == std::string_view::npos) {
      word_start = pos;
    }
    pos += len;
  }
  flush_word(text.size());
  return tokens;
}

std::string detokenize(const TokenSequence& tokens, std::string_view text) {
  std::string out;
  std::size_t cursor = 0;
  for (const Token& t : tokens) {
    out.append(text.substr(cursor, t.byte_start - cursor));
    out.append(t.surface);
    cursor = t.byte_end;
  }
  out.append(text.substr(std::min(cursor, text.size())));
  return out;
}

std::vector<std::size_t> tokens_in_span(const TokenSequence& tokens,
                                        std::size_t byte_start,
                                        std::size_t byte_end) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].byte_start >= byte_start && tokens[i].byte_end <= byte_end) {
      out.push_back(i);
    }
  }
  return out;
}

bool is_token_aligned(const TokenSequence& tokens, std::size_t byte_start,
                      std::size_t byte_end) {
  if (byte_start >= byte_end) return false;
  auto first = std::find_if(tokens.begin(), tokens.end(), [&](const Token& t) {
    return t.byte_start == byte_start;
  });
  if (first == tokens.end()) return false;
  return std::any_of(first, tokens.end(),
                     [&](const Token& t) { return t.byte_end == byte_end; });
}

ReviewCollection::ReviewCollection(std::vector<Review> reviews)
    : reviews_(std::move(reviews)) {
  for (std::size_t i = 0; i < reviews_.size(); ++i) {
    const Review& r = reviews_[i];
    if (!by_id_.emplace(r.review_id, i).second) {
      throw Error(ErrorKind::kInput, "duplicate review_id '" + r.review_id + "'");
    }
    index_[r.item_id].push_back(r.review_id);
  }
}

const Review* ReviewCollection::find(std::string_view review_id) const {
  auto it = by_id_.find(std::string(review_id));
  return it == by_id_.end() ? nullptr : &reviews_[it->second];
}

const Review& ReviewCollection::at(std::string_view review_id) const {
  const Review* r = find(review_id);
  if (!r) {
    throw Error(ErrorKind::kIntegrity,
                "unknown review_id '" + std::string(review_id) + "'");
  }
  return *r;
}

ReviewCollection load_reviews(const std::filesystem::path& path,
                              const Domain& default_domain,
                              LoadReport* report) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorKind::kInput, "review file not found: " + path.string());
  }
  const std::string contents = read_file(path);
  LoadReport local;
  LoadReport& rep = report ? *report : local;
  std::vector<Review> reviews;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(contents)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto warn = [&](const std::string& why) {
      ++rep.skipped;
      rep.warnings.push_back(path.filename().string() + ":" +
                             std::to_string(line_no) + ": " + why);
    };
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) {
      warn("not a JSON object");
      continue;
    }
    Review r;
    r.review_id = string_field(record, "review_id");
    r.item_id = string_field(record, "item_id");
    r.text = string_field(record, "text");
    const std::string domain = string_field(record, "domain");
    r.domain = domain.empty() ? default_domain : Domain(domain);
    if (r.review_id.empty()) { warn("missing review_id"); continue; }
    if (r.item_id.empty()) { warn("missing item_id"); continue; }
    if (r.text.empty()) { warn("missing text"); continue; }
    reviews.push_back(std::move(r));
  }
  ReviewCollection collection(std::move(reviews));
  rep.loaded += collection.size();
  return collection;
}

ReviewCollection merge_collections(const std::vector<ReviewCollection>& parts) {
  std::vector<Review> all;
  for (const auto& part : parts) {
    all.insert(all.end(), part.reviews().begin(), part.reviews().end());
  }
  return ReviewCollection(std::move(all));
}

std::string review_to_json_line(const Review& review) {
  json j = {{"review_id", review.review_id},
            {"item_id", review.item_id},
            {"domain", review.domain.label()},
            {"text", review.text}};
  return j.dump() + "\n";
}

void save_reviews(const std::filesystem::path& path,
                  const ReviewCollection& collection) {
  std::string out;
  for (const Review& r : collection.reviews()) out += review_to_json_line(r);
  write_file(path, out);
}

}  // namespace subjqa
