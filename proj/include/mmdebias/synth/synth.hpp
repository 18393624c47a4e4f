#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mmdebias/common/image.hpp"
#include "mmdebias/common/rng.hpp"
#include "mmdebias/corpus/corpus.hpp"
#include "mmdebias/neutralize/infill.hpp"

namespace mmdebias::synth {

/// Planted biased word -> its neutral rewrite.
const std::vector<std::pair<std::string, std::string>>& biased_lexicon();

struct PlantedPairs {
  std::vector<corpus::NeutralityPair> pairs;
  std::vector<std::vector<std::size_t>> planted;  // biased word indices per pair
};

/// Template sentences with one or two planted biased words each; the neutral
/// side swaps every planted word for its rewrite.
PlantedPairs planted_pairs(std::size_t n, std::uint64_t seed);

/// Neutral sides of the pairs as text-only infill examples.
std::vector<neutralize::InfillExample> neutral_examples(const std::vector<corpus::NeutralityPair>& pairs);

const std::vector<std::string>& topic_words(int topic);

struct ImageStyle {
  int size = 24;
  double noise = 0.08;
  /// Brightness offset per band step painted into the top-left quadrant.
  double band_cue = 0.01;
};

/// Topic sets the base colour; band in {-1, 0, 1} shifts one quadrant.
Image topic_band_image(int topic, int band, Rng& rng, const ImageStyle& style = {});

struct GeometryDoc {
  std::string id;
  int topic = 0;
  int band = 0;
  double bias = 0.0;
  std::string text;
  Image image;
};

/// 2 topics x 3 bias bands, `per_cell` documents each. Band scores sit at
/// -0.8, 0 and 0.8 with jitter well inside a 0.1 neighborhood.
std::vector<GeometryDoc> geometry_corpus(std::size_t per_cell, std::uint64_t seed, const ImageStyle& style = {});

struct LabeledSynthImage {
  Image image;
  double label = 0.0;
};

/// Random-texture images whose label is 2 * mean brightness - 1.
std::vector<LabeledSynthImage> brightness_images(std::size_t n, std::uint64_t seed, int size = 16);
double mean_brightness(const Image& img);

struct PipelineFixture {
  std::vector<corpus::Article> articles;
  std::map<std::string, Image> images;  // by article id
  std::vector<corpus::NeutralityPair> pairs;
};

/// Articles with planted biased sentences and images whose band follows the
/// source score, plus planted pairs for training the text stages.
PipelineFixture pipeline_fixture(std::size_t n_articles, std::size_t n_pairs, std::uint64_t seed);

/// Writes articles.jsonl, pairs.tsv, labels.tsv and images/<id>.ppm.
void write_pipeline_fixture(const std::filesystem::path& dir, const PipelineFixture& fixture);

}  // namespace mmdebias::synth
