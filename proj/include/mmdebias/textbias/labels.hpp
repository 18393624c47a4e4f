#pragma once

#include <string>
#include <vector>

#include "mmdebias/corpus/corpus.hpp"

namespace mmdebias::textbias {

struct LabeledToken {
  std::string token;
  int label = 0;  // 1 when the token was edited away in the neutral rewrite

  friend bool operator==(const LabeledToken&, const LabeledToken&) = default;
};

/// Labels each biased-side token by aligning the two sides with a longest
/// common subsequence: tokens outside the alignment are labeled 1. Pairs whose
/// edit is a pure insertion label the biased token at the insertion point, so
/// every pair yields at least one positive. Identical sides are rejected.
std::vector<LabeledToken> derive_diff_labels(const corpus::NeutralityPair& pair);

}  // namespace mmdebias::textbias
