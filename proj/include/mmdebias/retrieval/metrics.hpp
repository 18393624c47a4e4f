#pragma once

#include <span>
#include <vector>

#include "mmdebias/retrieval/index.hpp"

namespace mmdebias::retrieval {

/// Mean |b(N(y))| over the biases of the top-1 retrievals.
double avg_retrieved_bias(std::span<const double> retrieved_biases);

/// Mean (|b(x)| - |b(N(y))|); positive when retrievals are more neutral.
double avg_neutrality_gain(std::span<const double> original_biases, std::span<const double> retrieved_biases);

/// Retrieves the top-1 image for each query vector and averages its |bias|.
double avg_retrieved_bias(const std::vector<std::vector<double>>& queries, const RetrievalIndex& index);

struct GainSample {
  double original_bias;
  std::vector<double> query;
};
double avg_neutrality_gain(const std::vector<GainSample>& samples, const RetrievalIndex& index);

}  // namespace mmdebias::retrieval
