#include "mmdebias/textbias/bands.hpp"

#include "mmdebias/common/error.hpp"

namespace mmdebias::textbias {

std::vector<BiasBand> classify_band(const std::vector<TokenBias>& predictions) {
  if (predictions.empty()) throw ValidationError("no predictions to classify");
  std::size_t top = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double p = predictions[i].probability;
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
    if (p > predictions[top].probability) top = i;
  }
  std::vector<BiasBand> out;
  out.reserve(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double p = predictions[i].probability;
    if (i == top)
      out.push_back(BiasBand::max);
    else if (p > kHighThreshold)
      out.push_back(BiasBand::high);
    else if (p > kMidThreshold)
      out.push_back(BiasBand::mid);
    else if (p > kLowThreshold)
      out.push_back(BiasBand::low);
    else
      out.push_back(BiasBand::none);
  }
  return out;
}

std::string_view band_name(BiasBand band) {
  switch (band) {
    case BiasBand::none: return "none";
    case BiasBand::low: return "low";
    case BiasBand::mid: return "mid";
    case BiasBand::high: return "high";
    case BiasBand::max: return "max";
  }
  return "none";
}

}  // namespace mmdebias::textbias
