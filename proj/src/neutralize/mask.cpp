#include "mmdebias/neutralize/mask.hpp"

#include <set>

#include "mmdebias/common/error.hpp"

namespace mmdebias::neutralize {

std::vector<std::size_t> select_words(const std::vector<textbias::TokenBias>& predictions, const MaskPolicy& policy) {
  std::vector<std::size_t> out;
  std::size_t top = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i].probability > policy.threshold) out.push_back(i);
    if (predictions[i].probability > predictions[top].probability) top = i;
  }
  if (out.empty() && policy.fallback_top1 && !predictions.empty()) out.push_back(top);
  return out;
}

MaskedSentence mask_biased(const std::vector<textbias::Token>& tokens,
                           const std::vector<textbias::TokenBias>& predictions, const MaskPolicy& policy) {
  if (tokens.empty()) throw ValidationError("cannot mask an empty token list");
  if (predictions.size() != textbias::word_count(tokens))
    throw ValidationError("predictions do not align with tokens");
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i].index != i) throw ValidationError("predictions do not align with tokens");

  auto words = select_words(predictions, policy);
  std::set<std::size_t> chosen(words.begin(), words.end());
  MaskedSentence out;
  out.tokens = tokens;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!chosen.contains(tokens[i].word_index)) continue;
    out.mask_positions.push_back(i);
    out.original_tokens.push_back(tokens[i].text);
    out.tokens[i].text = std::string(textbias::kMask);
  }
  return out;
}

}  // namespace mmdebias::neutralize
