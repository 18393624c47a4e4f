#pragma once

#include <string>
#include <vector>

#include "mmdebias/textbias/tagger.hpp"
#include "mmdebias/textbias/tokenizer.hpp"

namespace mmdebias::neutralize {

/// Mask every word whose probability exceeds `threshold`; when none does and
/// `fallback_top1` is set, mask the single most probable word (lowest index
/// on ties).
struct MaskPolicy {
  double threshold = 0.9;
  bool fallback_top1 = true;
};

/// Pieces with masked positions replaced by the mask sentinel. mask_positions
/// index pieces, strictly increasing; original_tokens holds the replaced
/// pieces in the same order.
struct MaskedSentence {
  std::vector<textbias::Token> tokens;
  std::vector<std::size_t> mask_positions;
  std::vector<std::string> original_tokens;
};

/// `predictions` are word-level (one per word, index = word index). All pieces
/// of a selected word are masked together.
MaskedSentence mask_biased(const std::vector<textbias::Token>& tokens,
                           const std::vector<textbias::TokenBias>& predictions, const MaskPolicy& policy = {});

/// Word indices selected by the policy, ascending.
std::vector<std::size_t> select_words(const std::vector<textbias::TokenBias>& predictions, const MaskPolicy& policy);

}  // namespace mmdebias::neutralize
