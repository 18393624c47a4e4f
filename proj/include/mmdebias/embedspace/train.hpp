#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/embedspace/loss.hpp"
#include "mmdebias/embedspace/table.hpp"

namespace mmdebias::embedspace {

/// One training document: its text, its image (already featurized by the
/// image tower's featurizer) and the image's bias score.
struct SpaceSample {
  std::string id;
  std::string text;
  std::vector<double> image_features;
  std::optional<double> bias;
};

struct SpaceConfig {
  LossConfig loss;
  double epsilon = 0.1;         // bias neighborhood half-width
  std::size_t neighbors = 200;  // semantic neighborhood size
  double learning_rate = 1e-2;
  std::size_t batch_size = 32;
  bool text_triplets = true;  // semantic loss on text anchors/positives/negatives
  bool cross_modal = true;    // text anchor, own image positive, non-neighbor image negative

  void validate() const;
};

struct StepRecord {
  double semantic = 0.0;  // mean semantic angular loss
  double bias = 0.0;      // bias_weight x mean bias angular loss (0 when the weight is 0)
  double objective = 0.0;
};

struct SpaceHistory {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_objective;
};

struct TrainedSpace {
  DualEncoder encoder;
  EmbeddingTable table;  // unit-normalized text and image embeddings
  SpaceHistory history;
};

/// Trains both towers with the semantic angular loss plus the weighted bias
/// angular loss. Losses act on raw tower outputs; the returned table is
/// normalized afterwards for retrieval. Every sample must carry a bias score.
/// Deterministic for a given seed.
TrainedSpace train_space(const std::vector<SpaceSample>& samples, DualEncoder encoder, const DocumentEmbedder& reference,
                         const SpaceConfig& config, std::size_t epochs, std::uint64_t seed);

/// Embeds every sample's text and image, optionally L2-normalized.
EmbeddingTable build_table(const DualEncoder& encoder, const std::vector<SpaceSample>& samples, bool normalize = true);

}  // namespace mmdebias::embedspace
