#include "mmdebias/textbias/labels.hpp"

#include "mmdebias/common/error.hpp"

namespace mmdebias::textbias {

std::vector<LabeledToken> derive_diff_labels(const corpus::NeutralityPair& pair) {
  const auto& a = pair.biased_tokens;
  const auto& b = pair.neutral_tokens;
  if (a.empty() || b.empty()) throw ValidationError("pair " + pair.id + " has an empty side");
  if (a == b) throw ValidationError("pair " + pair.id + " has identical sides");

  const std::size_t n = a.size(), m = b.size();
  // lcs[i][j] = LCS length of a[i..] and b[j..]
  std::vector<std::vector<int>> lcs(n + 1, std::vector<int>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[i][j] = a[i] == b[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);

  std::vector<LabeledToken> out;
  out.reserve(n);
  for (const auto& t : a) out.push_back({t, 1});
  // First biased index before which neutral-only tokens were inserted.
  std::size_t insertion_at = n;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (a[i] == b[j] && lcs[i][j] == lcs[i + 1][j + 1] + 1) {
      out[i].label = 0;
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      ++i;
    } else {
      if (insertion_at == n) insertion_at = i;
      ++j;
    }
  }

  bool any = false;
  for (const auto& t : out) any = any || t.label == 1;
  if (!any) {
    // Pure insertion: mark the biased token the insertion attaches to.
    std::size_t k = insertion_at == 0 ? 0 : insertion_at - 1;
    out[std::min(k, n - 1)].label = 1;
  }
  return out;
}

}  // namespace mmdebias::textbias
