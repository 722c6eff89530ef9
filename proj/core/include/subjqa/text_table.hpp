#ifndef SUBJQA_TEXT_TABLE_HPP_
#define SUBJQA_TEXT_TABLE_HPP_

#include <string>
#include <string_view>
#include <vector>

namespace subjqa {

using Row = std::vector<std::string>;

// Tab-separated tables. Cells escape backslash, tab, CR and LF as \\, \t,
// \r, \n so that every record stays on one physical line.
std::string tsv_escape(std::string_view cell);
std::string tsv_unescape(std::string_view cell);
std::string tsv_line(const Row& cells);
std::vector<Row> parse_tsv(std::string_view contents);

// RFC 4180 comma-separated values, with quoted fields that may span lines.
std::vector<Row> parse_csv(std::string_view contents);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string_view> split_lines(std::string_view contents);

}  // namespace subjqa

#endif  // SUBJQA_TEXT_TABLE_HPP_
