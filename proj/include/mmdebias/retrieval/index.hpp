#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmdebias/embedspace/neighbors.hpp"
#include "mmdebias/embedspace/table.hpp"

namespace mmdebias::retrieval {

enum class Provenance { ground_truth, estimated };
std::string_view provenance_name(Provenance p);

struct RetrievalResult {
  std::string query_text;
  std::string image_id;
  double distance = 0.0;  // Euclidean, between unit-normalized vectors
  double image_bias = 0.0;
  Provenance provenance = Provenance::ground_truth;
};

/// Scores an image that has no ground-truth bias. Must be thread-safe.
using BiasEstimator = std::function<double(const std::string& image_id)>;

/// Exact search index over unit-normalized image embeddings. Entries without
/// a ground-truth score are flagged and resolved through the estimator.
class RetrievalIndex {
 public:
  static RetrievalIndex build(const embedspace::EmbeddingTable& table, const embedspace::ScoreMap& scores,
                              BiasEstimator estimator = {});

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> vector(std::size_t i) const { return std::span<const double>(vectors_).subspan(i * dim_, dim_); }
  const std::vector<double>& vectors() const { return vectors_; }
  bool flagged(std::size_t i) const { return !scores_[i].has_value(); }
  std::optional<std::size_t> find(std::string_view id) const;

  struct Bias {
    double value;
    Provenance provenance;
  };
  /// Ground truth when known, else the estimator's value; StateError when the
  /// entry is unscored and there is no estimator.
  Bias bias_of(std::size_t i) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> vectors_;
  std::vector<std::optional<double>> scores_;
  BiasEstimator estimator_;
};

struct NearestResult {
  std::vector<RetrievalResult> results;
  bool truncated = false;  // k exceeded the index size
};

/// The k nearest images by ascending distance, ties by ascending id. The
/// query is normalized before comparison.
NearestResult nearest_images(const RetrievalIndex& index, std::span<const double> query, std::size_t k,
                             std::string_view query_text = {});

struct ReplacementDecision {
  bool keep_original = true;
  std::optional<RetrievalResult> replacement;
  std::string reason;
};

struct SelectOptions {
  /// Reject any candidate that would not lower |bias| (disable for ablation).
  bool guard = true;
  /// Distance from the query to the original image, when it is known. A
  /// candidate with equal |bias| is accepted only if strictly closer.
  std::optional<double> original_distance;
};

/// Among the top-k semantic matches, the one with least |bias| (ranking order
/// breaks ties). With the guard on, the original is kept unless that
/// candidate is strictly less biased, or equally biased and strictly closer.
ReplacementDecision select_replacement(const RetrievalIndex& index, std::span<const double> query, double original_bias,
                                       std::size_t k, const SelectOptions& options = {},
                                       std::string_view query_text = {});

}  // namespace mmdebias::retrieval
