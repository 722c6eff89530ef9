#include <iostream>

#include "subjqa/common.hpp"
#include "subjqa/corpus.hpp"
#include "subjqa/dataset.hpp"

int main() {
  const auto tokens = subjqa::tokenize("The room was clean.");
  subjqa::SplitAssignment a = subjqa::split_topics({"a", "b", "c"}, {}, 1);
  std::cout << "tokens " << tokens.size() << " topics " << a.size() << "\n";
  return tokens.size() == 5 && a.size() == 3 ? 0 : 1;
}
