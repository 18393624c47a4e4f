#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmdebias::text {

/// Lowercases ASCII and splits on whitespace; punctuation runs become separate
/// words ("corrupt." -> "corrupt", "."). Non-ASCII bytes are kept inside words.
std::vector<std::string> split_words(std::string_view s);

/// Splits running text into sentences on '.', '!' or '?' followed by whitespace
/// or end of input. Returned sentences are trimmed and non-empty.
std::vector<std::string> split_sentences(std::string_view s);

std::string join(const std::vector<std::string>& words, std::string_view sep = " ");

std::string trim(std::string_view s);

/// 64-bit FNV-1a; stable across platforms, used for feature hashing.
std::uint64_t fnv1a(std::string_view s);

}  // namespace mmdebias::text
