#pragma once

#include <string_view>
#include <vector>

#include "mmdebias/textbias/tagger.hpp"

namespace mmdebias::textbias {

/// Reporting bands, ordered: none < low < mid < high < max.
enum class BiasBand { none, low, mid, high, max };

inline constexpr double kHighThreshold = 0.9;
inline constexpr double kMidThreshold = 0.75;
inline constexpr double kLowThreshold = 0.5;

/// The single most probable token (lowest index on ties) is max; the rest are
/// high above 0.9, mid above 0.75, low above 0.5, none otherwise.
std::vector<BiasBand> classify_band(const std::vector<TokenBias>& predictions);

std::string_view band_name(BiasBand band);

}  // namespace mmdebias::textbias
