#include "mmdebias/retrieval/metrics.hpp"

#include <cmath>

#include "mmdebias/common/error.hpp"

namespace mmdebias::retrieval {

double avg_retrieved_bias(std::span<const double> retrieved) {
  if (retrieved.empty()) throw UndefinedError("average retrieved bias of an empty test set is undefined");
  double sum = 0.0;
  for (double b : retrieved) sum += std::abs(b);
  return sum / static_cast<double>(retrieved.size());
}

double avg_neutrality_gain(std::span<const double> original, std::span<const double> retrieved) {
  if (original.size() != retrieved.size()) throw ValidationError("original and retrieved bias lists differ in length");
  if (original.empty()) throw UndefinedError("average neutrality gain of an empty test set is undefined");
  double sum = 0.0;
  for (std::size_t i = 0; i < original.size(); ++i) sum += std::abs(original[i]) - std::abs(retrieved[i]);
  return sum / static_cast<double>(original.size());
}

double avg_retrieved_bias(const std::vector<std::vector<double>>& queries, const RetrievalIndex& index) {
  std::vector<double> biases;
  for (const auto& q : queries) biases.push_back(nearest_images(index, q, 1).results.front().image_bias);
  return avg_retrieved_bias(biases);
}

double avg_neutrality_gain(const std::vector<GainSample>& samples, const RetrievalIndex& index) {
  std::vector<double> orig, got;
  for (const auto& s : samples) {
    orig.push_back(s.original_bias);
    got.push_back(nearest_images(index, s.query, 1).results.front().image_bias);
  }
  return avg_neutrality_gain(orig, got);
}

}  // namespace mmdebias::retrieval
