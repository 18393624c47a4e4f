#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mmdebias/common/rng.hpp"

namespace mmdebias::embedspace {

using VectorMap = std::map<std::string, std::vector<double>, std::less<>>;
using ScoreMap = std::map<std::string, double, std::less<>>;

struct SemanticNeighborhood {
  std::string anchor_id;
  std::vector<std::string> neighbor_ids;  // nearest first
  std::size_t k = 200;
};

struct BiasNeighborhood {
  std::string anchor_id;
  double epsilon = 0.1;
  std::vector<std::string> member_ids;  // ascending id
};

/// The k documents nearest (Euclidean) to doc_id in the reference space,
/// excluding doc_id itself; ties broken by ascending id.
SemanticNeighborhood semantic_neighbors(const std::string& doc_id, const VectorMap& reference, std::size_t k = 200);

/// Uniform draw from the neighborhood; SamplingError when empty.
std::string sample_positive(const SemanticNeighborhood& neigh, Rng& rng);

/// Every other id whose score lies within epsilon of the anchor's.
BiasNeighborhood bias_neighborhood(const std::string& anchor_id, const ScoreMap& scores, double epsilon = 0.1);

/// Uniform draw from the bias neighborhood; SamplingError when empty.
std::string sample_bias_positive(const std::string& anchor_id, const BiasNeighborhood& neigh, Rng& rng);

/// Index-based variants used by the trainer. `reference` is row-major n x dim.
std::vector<std::size_t> semantic_neighbor_indices(std::size_t anchor, const std::vector<double>& reference,
                                                   std::size_t dim, const std::vector<std::string>& ids,
                                                   std::size_t k);
std::vector<std::size_t> bias_neighbor_indices(std::size_t anchor, const std::vector<double>& scores, double epsilon);

inline bool within_band(double a, double b, double epsilon) { return std::abs(a - b) <= epsilon; }

}  // namespace mmdebias::embedspace
