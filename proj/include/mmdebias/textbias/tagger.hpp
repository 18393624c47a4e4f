#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mmdebias/corpus/corpus.hpp"
#include "mmdebias/textbias/encoder.hpp"
#include "mmdebias/textbias/tokenizer.hpp"

namespace mmdebias::textbias {

struct TaggerConfig {
  std::size_t hidden = 768;
  std::size_t layers = 12;
  double learning_rate = 1e-4;
  std::size_t epochs = 1;
  std::size_t batch_size = 16;
  /// Longest piece sequence the encoder sees at once; longer inputs are
  /// windowed with `window_overlap` pieces shared between windows.
  std::size_t context_length = 128;
  std::size_t window_overlap = 32;
  std::size_t max_vocab_words = 30000;
  /// Weight of positive (biased) tokens in the binary cross-entropy.
  double positive_weight = 1.0;
  /// Fraction of training words split into subword pieces even when the whole
  /// word is in the vocabulary, so piece embeddings see training signal.
  double piece_dropout = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const TaggerConfig& c);
TaggerConfig tagger_config_from_json(const nlohmann::json& j);

/// Bias probability of one word (or piece, for piece-level queries).
struct TokenBias {
  std::string token;
  std::size_t index = 0;
  double probability = 0.0;
};

/// Per-token bias tagger: encoder plus a sigmoid head. A default-constructed
/// model is untrained and rejects inference with StateError.
class TaggerModel {
 public:
  TaggerModel() = default;
  TaggerModel(TaggerConfig config, Tokenizer tokenizer, std::unique_ptr<SequenceEncoder> encoder);
  TaggerModel(const TaggerModel& other);
  TaggerModel& operator=(const TaggerModel& other);
  TaggerModel(TaggerModel&&) noexcept = default;
  TaggerModel& operator=(TaggerModel&&) noexcept = default;

  bool trained() const { return encoder_ != nullptr; }
  const TaggerConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }

  /// Probability per piece, windowing long inputs and max-merging overlaps.
  std::vector<double> piece_probabilities(std::span<const int> ids) const;

  /// Mean weighted BCE over all pieces of the given sequences.
  double loss(const std::vector<std::vector<int>>& ids, const std::vector<std::vector<int>>& labels) const;

  /// Accumulates the gradient of the summed loss of one window (divided by
  /// `normalizer`) into parameter gradients. Returns the summed loss.
  double accumulate_gradient(std::span<const int> ids, std::span<const int> labels, double normalizer);

  std::vector<nn::Param*> params();

  void save(const std::filesystem::path& path) const;
  static TaggerModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static TaggerModel from_json(const nlohmann::json& j);

 private:
  void require_trained() const;
  std::vector<double> window_probabilities(std::span<const int> ids) const;

  TaggerConfig config_;
  Tokenizer tokenizer_;
  std::unique_ptr<SequenceEncoder> encoder_;
  nn::Param head_w_{"head.w", 1, 0};
  nn::Param head_b_{"head.b", 1, 1};
};

struct TaggerHistory {
  /// Mean training loss before training (index 0) and after each epoch.
  std::vector<double> epoch_loss;
  /// Batch loss evaluated before each optimizer step.
  std::vector<double> step_loss;
};

/// One training example: piece ids and per-piece labels from the pair diff.
struct TaggedSequence {
  std::vector<int> ids;
  std::vector<int> labels;
};

/// Turns pairs into piece sequences with word labels copied to every piece.
/// With an rng, each word is split into pieces with probability piece_dropout.
std::vector<TaggedSequence> make_training_sequences(const std::vector<corpus::NeutralityPair>& pairs,
                                                    const Tokenizer& tokenizer, double piece_dropout = 0.0,
                                                    Rng* rng = nullptr);

/// Trains a fresh tagger on the diff labels of the pairs. Deterministic for a
/// given config (including seed). Throws ValidationError on an empty set.
TaggerModel train_tagger(const std::vector<corpus::NeutralityPair>& pairs, const TaggerConfig& config,
                         TaggerHistory* history = nullptr);

/// Word-level predictions: one entry per word, probability = max over the
/// word's pieces.
std::vector<TokenBias> predict_token_bias(const TaggerModel& model, std::string_view text);
std::vector<TokenBias> predict_token_bias(const TaggerModel& model, const std::vector<Token>& tokens);

/// Indices into `predictions` of the k most probable entries, ties broken by
/// lower index.
std::vector<std::size_t> top_k(const std::vector<TokenBias>& predictions, std::size_t k);

}  // namespace mmdebias::textbias
