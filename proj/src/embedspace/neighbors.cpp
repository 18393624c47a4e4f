#include "mmdebias/embedspace/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmdebias/common/error.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::embedspace {

std::vector<std::size_t> semantic_neighbor_indices(std::size_t anchor, const std::vector<double>& reference,
                                                   std::size_t dim, const std::vector<std::string>& ids,
                                                   std::size_t k) {
  const std::size_t n = ids.size();
  std::vector<double> dist(n);
  kernels::sq_distances(reference, dim, std::span<const double>(reference).subspan(anchor * dim, dim), dist);
  std::vector<std::size_t> order;
  order.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    if (i != anchor) order.push_back(i);
  auto less = [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : ids[a] < ids[b]; };
  std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), less);
  order.resize(take);
  return order;
}

SemanticNeighborhood semantic_neighbors(const std::string& doc_id, const VectorMap& reference, std::size_t k) {
  auto it = reference.find(doc_id);
  if (it == reference.end()) throw NotFoundError("unknown document '" + doc_id + "'");
  if (reference.size() < 2) throw ValidationError("semantic neighbors need at least two documents");
  const std::size_t dim = it->second.size();
  std::vector<std::string> ids;
  std::vector<double> flat;
  std::size_t anchor = 0;
  for (const auto& [id, v] : reference) {
    if (v.size() != dim) throw ValidationError("reference embeddings differ in dimension");
    if (id == doc_id) anchor = ids.size();
    ids.push_back(id);
    flat.insert(flat.end(), v.begin(), v.end());
  }
  SemanticNeighborhood out{doc_id, {}, k};
  for (auto i : semantic_neighbor_indices(anchor, flat, dim, ids, k)) out.neighbor_ids.push_back(ids[i]);
  return out;
}

std::string sample_positive(const SemanticNeighborhood& neigh, Rng& rng) {
  if (neigh.neighbor_ids.empty()) throw SamplingError("semantic neighborhood of '" + neigh.anchor_id + "' is empty");
  return neigh.neighbor_ids[rng.index(neigh.neighbor_ids.size())];
}

std::vector<std::size_t> bias_neighbor_indices(std::size_t anchor, const std::vector<double>& scores, double epsilon) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (i != anchor && within_band(scores[i], scores[anchor], epsilon)) out.push_back(i);
  return out;
}

BiasNeighborhood bias_neighborhood(const std::string& anchor_id, const ScoreMap& scores, double epsilon) {
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
  auto it = scores.find(anchor_id);
  if (it == scores.end()) throw NotFoundError("anchor '" + anchor_id + "' has no bias score");
  BiasNeighborhood out{anchor_id, epsilon, {}};
  for (const auto& [id, s] : scores)
    if (id != anchor_id && within_band(s, it->second, epsilon)) out.member_ids.push_back(id);
  return out;
}

std::string sample_bias_positive(const std::string& anchor_id, const BiasNeighborhood& neigh, Rng& rng) {
  if (neigh.member_ids.empty()) throw SamplingError("bias neighborhood of '" + anchor_id + "' is empty");
  return neigh.member_ids[rng.index(neigh.member_ids.size())];
}

}  // namespace mmdebias::embedspace
