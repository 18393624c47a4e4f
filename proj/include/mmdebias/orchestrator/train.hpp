#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mmdebias/corpus/corpus.hpp"
#include "mmdebias/embedspace/table.hpp"
#include "mmdebias/embedspace/train.hpp"
#include "mmdebias/imagescore/regressor.hpp"
#include "mmdebias/neutralize/infill.hpp"
#include "mmdebias/orchestrator/pipeline.hpp"
#include "mmdebias/textbias/tagger.hpp"

namespace mmdebias::orchestrator {

struct TrainOptions {
  textbias::TaggerConfig tagger;
  neutralize::InfillConfig infill;
  embedspace::DualEncoder::Config encoder;
  embedspace::SpaceConfig space;
  std::size_t space_epochs = 30;
  imagescore::RegressorConfig regressor;
  bool train_regressor = true;
  PipelineOptions pipeline;
  std::uint64_t seed = 0;
};

/// Articles whose images exist on disk, as space training samples. An image
/// takes its article's id and its bias is the article's source score.
struct SpaceCorpus {
  std::vector<embedspace::SpaceSample> samples;
  corpus::ScoreTable image_scores;
  std::map<std::string, std::filesystem::path, std::less<>> image_paths;
};
SpaceCorpus space_corpus(const std::vector<corpus::Article>& articles, const std::filesystem::path& image_base,
                         const embedspace::DualEncoder& encoder);

/// Sizes that train in seconds on one core.
TrainOptions desk_options();

struct TrainedBundle {
  StageModels models;
  embedspace::EmbeddingTable table;
  corpus::ScoreTable image_scores;  // image id -> ground-truth bias
};

/// Trains all four stages: the tagger and infill model on the pairs, the
/// space on article texts and images (image bias = source score), and the
/// regressor from the trained image tower. Articles without a readable image
/// are left out of the space and the index.
TrainedBundle train_pipeline(const std::vector<corpus::Article>& articles,
                             const std::vector<corpus::NeutralityPair>& pairs, const std::filesystem::path& image_base,
                             const TrainOptions& options);

}  // namespace mmdebias::orchestrator
