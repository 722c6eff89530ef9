#ifndef SUBJQA_RELEASED_HPP_
#define SUBJQA_RELEASED_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "subjqa/dataset.hpp"

namespace subjqa {

// One row of the public SubjQA release, mapped onto our example type.
// The release scores subjectivity 1..5 with 1 the most subjective; scores
// are flipped (6 - level) so that 5 is the most subjective, as everywhere
// else in this library.
struct ReleasedExample {
  AnnotatedExample example;
  std::string item_id;
  std::optional<bool> question_label;  // is_ques_subjective, if present
  std::optional<bool> answer_label;    // is_ans_subjective, if present
};

// Parses one split file. Columns are located by header name; the review
// text's trailing ANSWERNOTFOUND marker is stripped.
std::vector<ReleasedExample> load_released_csv(const std::filesystem::path& path,
                                               const std::string& domain,
                                               Split split);

// Reads <root>/<domain>/splits/{train,dev,test}.csv for every domain
// directory found. Returns an empty vector when none exist.
std::vector<ReleasedExample> load_released_dir(const std::filesystem::path& root);

// Threshold in 1..5 whose "score >= t" rule agrees best with the released
// boolean labels (questions and answers pooled). Ties pick the smaller t.
// Absent when no row carries a label.
std::optional<int> calibrate_threshold(const std::vector<ReleasedExample>& rows);

std::vector<AnnotatedExample> examples_of(const std::vector<ReleasedExample>& rows);

}  // namespace subjqa

#endif  // SUBJQA_RELEASED_HPP_
