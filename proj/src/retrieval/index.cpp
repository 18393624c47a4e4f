#include "mmdebias/retrieval/index.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmdebias/common/error.hpp"
#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::retrieval {

std::string_view provenance_name(Provenance p) { return p == Provenance::ground_truth ? "ground_truth" : "estimated"; }

RetrievalIndex RetrievalIndex::build(const embedspace::EmbeddingTable& table, const embedspace::ScoreMap& scores,
                                     BiasEstimator estimator) {
  RetrievalIndex idx;
  idx.dim_ = table.dim();
  idx.estimator_ = std::move(estimator);
  for (const auto& e : table.entries()) {
    if (e.vector.modality != embedspace::Modality::image) continue;
    if (e.vector.dim() != idx.dim_) throw ValidationError("embedding '" + e.id + "' has the wrong dimension");
    auto v = embedspace::l2_normalized(e.vector.values);
    idx.vectors_.insert(idx.vectors_.end(), v.begin(), v.end());
    idx.ids_.push_back(e.id);
    auto s = scores.find(e.id);
    if (s != scores.end()) {
      if (s->second < -1.0 || s->second > 1.0) throw ValidationError("bias of '" + e.id + "' outside [-1, 1]");
      idx.scores_.emplace_back(s->second);
    } else {
      idx.scores_.emplace_back(std::nullopt);
    }
  }
  if (idx.ids_.empty()) throw ValidationError("retrieval index needs at least one image embedding");
  return idx;
}

std::optional<std::size_t> RetrievalIndex::find(std::string_view id) const {
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (ids_[i] == id) return i;
  return std::nullopt;
}

RetrievalIndex::Bias RetrievalIndex::bias_of(std::size_t i) const {
  if (scores_[i]) return {*scores_[i], Provenance::ground_truth};
  if (!estimator_) throw StateError("image '" + ids_[i] + "' has no bias score and no estimator is configured");
  double v = estimator_(ids_[i]);
  if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("estimated bias of '" + ids_[i] + "' outside [-1, 1]");
  return {v, Provenance::estimated};
}

NearestResult nearest_images(const RetrievalIndex& index, std::span<const double> query, std::size_t k,
                             std::string_view query_text) {
  if (k == 0) throw ValidationError("k must be at least 1");
  if (query.size() != index.dim()) throw ValidationError("query dimension does not match the index");
  auto q = embedspace::l2_normalized(std::vector<double>(query.begin(), query.end()));
  const std::size_t n = index.size();
  std::vector<double> dist(n);
  kernels::sq_distances(index.vectors(), index.dim(), q, dist);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto& ids = index.ids();
  auto less = [&](std::size_t a, std::size_t b) { return dist[a] != dist[b] ? dist[a] < dist[b] : ids[a] < ids[b]; };
  NearestResult out;
  out.truncated = k > n;
  std::size_t take = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(), less);
  for (std::size_t r = 0; r < take; ++r) {
    std::size_t i = order[r];
    RetrievalResult res{std::string(query_text), ids[i], std::sqrt(dist[i]), 0.0, Provenance::ground_truth};
    // Resolved per result so unscored entries that are never retrieved need no estimate.
    auto b = index.bias_of(i);
    res.image_bias = b.value;
    res.provenance = b.provenance;
    out.results.push_back(std::move(res));
  }
  return out;
}

ReplacementDecision select_replacement(const RetrievalIndex& index, std::span<const double> query, double original_bias,
                                       std::size_t k, const SelectOptions& options, std::string_view query_text) {
  if (index.size() == 0) throw ValidationError("empty retrieval index");
  auto top = nearest_images(index, query, k, query_text).results;
  const RetrievalResult* best = nullptr;
  for (const auto& r : top)
    if (!best || std::abs(r.image_bias) < std::abs(best->image_bias)) best = &r;

  ReplacementDecision d;
  if (!best) {
    d.reason = "no candidates";
    return d;
  }
  if (options.guard) {
    double cand = std::abs(best->image_bias), orig = std::abs(original_bias);
    bool less_biased = cand < orig;
    bool tie_but_closer = cand == orig && options.original_distance && best->distance < *options.original_distance;
    if (!less_biased && !tie_but_closer) {
      d.reason = "no candidate is less biased than the original";
      return d;
    }
  }
  d.keep_original = false;
  d.replacement = *best;
  d.reason = "replaced";
  return d;
}

}  // namespace mmdebias::retrieval
