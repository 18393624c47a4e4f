#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mmdebias/common/error.hpp"

namespace mmdebias {

/// [begin, end) windows of at most `length` covering [0, n), consecutive
/// windows sharing `overlap` positions. A single window when n <= length.
inline std::vector<std::pair<std::size_t, std::size_t>> sliding_windows(std::size_t n, std::size_t length,
                                                                         std::size_t overlap) {
  if (length == 0 || overlap >= length) throw ValidationError("window overlap must be smaller than its length");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (n == 0) return out;
  std::size_t start = 0;
  while (true) {
    std::size_t end = std::min(start + length, n);
    out.emplace_back(start, end);
    if (end == n) break;
    start = end - overlap;
  }
  return out;
}

}  // namespace mmdebias
