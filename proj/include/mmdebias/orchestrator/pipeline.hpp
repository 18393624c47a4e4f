#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/error.hpp"
#include "mmdebias/corpus/corpus.hpp"
#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/imagescore/regressor.hpp"
#include "mmdebias/neutralize/image_tokens.hpp"
#include "mmdebias/neutralize/infill.hpp"
#include "mmdebias/neutralize/mask.hpp"
#include "mmdebias/retrieval/index.hpp"
#include "mmdebias/textbias/tagger.hpp"

namespace mmdebias::orchestrator {

struct TraceEntry {
  std::string stage;   // detect, neutralize, embed, retrieve
  std::string status;  // ok or failed
  std::string detail;
};

class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& cause, std::vector<TraceEntry> trace)
      : Error("stage " + stage + " failed: " + cause), stage_(std::move(stage)), cause_(cause), trace_(std::move(trace)) {}
  const std::string& stage() const { return stage_; }
  const std::string& cause() const { return cause_; }
  /// Completed stages followed by the failed one.
  const std::vector<TraceEntry>& trace() const { return trace_; }

 private:
  std::string stage_, cause_;
  std::vector<TraceEntry> trace_;
};

struct PipelineOptions {
  neutralize::MaskPolicy mask;
  std::size_t retrieve_k = 5;
  bool guard = true;
};

/// Everything the four stages need, plus where indexed images live on disk.
struct StageModels {
  textbias::TaggerModel tagger;
  neutralize::InfillModel infill;
  neutralize::PatchGridTokenizer image_tokenizer;
  embedspace::DualEncoder encoder;
  std::shared_ptr<const retrieval::RetrievalIndex> index;
  std::optional<imagescore::BiasRegressor> regressor;
  std::map<std::string, std::filesystem::path, std::less<>> image_paths;
  PipelineOptions options;

  /// Writes manifest.json and one file per model into `dir`.
  void save(const std::filesystem::path& dir, const embedspace::EmbeddingTable& table,
            const corpus::ScoreTable& image_scores) const;
  /// Unscored index entries are estimated with the regressor when present.
  static StageModels load(const std::filesystem::path& dir);
};

/// Builds the retrieval index; unscored images are scored by `regressor` from
/// their files in `image_paths`.
std::shared_ptr<const retrieval::RetrievalIndex> make_index(
    const embedspace::EmbeddingTable& table, const corpus::ScoreTable& image_scores,
    const std::optional<imagescore::BiasRegressor>& regressor,
    const std::map<std::string, std::filesystem::path, std::less<>>& image_paths);

struct TextEdit {
  std::size_t sentence = 0;
  neutralize::Replacement replacement;
};

struct ImageDecision {
  bool keep_original = true;
  std::optional<retrieval::RetrievalResult> replacement;
  std::string cause;
  std::string original_image_path;  // empty when missing
  std::string replacement_image_path;
};

struct DebiasedArticle {
  corpus::Article original;
  std::string neutralized_text;
  std::vector<std::vector<textbias::TokenBias>> detections;  // per sentence, word level
  std::vector<TextEdit> replacements;
  double original_image_bias = 0.0;
  ImageDecision image;
  std::vector<TraceEntry> trace;
};

/// detect -> neutralize -> embed -> retrieve. Relative image refs resolve
/// against `image_base`. The original image's bias is its article's source
/// score. Throws PipelineError naming the failed stage.
DebiasedArticle debias_article(const corpus::Article& article, const StageModels& models,
                               const std::filesystem::path& image_base = {});

struct BatchOutcome {
  std::optional<DebiasedArticle> result;
  std::string error;
};

/// Runs articles independently in parallel; output order matches input.
std::vector<BatchOutcome> debias_batch(const std::vector<corpus::Article>& articles, const StageModels& models,
                                       const std::filesystem::path& image_base = {});

nlohmann::json to_json(const DebiasedArticle& d);

}  // namespace mmdebias::orchestrator
