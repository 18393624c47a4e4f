#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmdebias/neutralize/mask.hpp"
#include "mmdebias/nn/param.hpp"
#include "mmdebias/textbias/tokenizer.hpp"

namespace mmdebias::neutralize {

struct InfillConfig {
  std::size_t hidden = 64;
  double learning_rate = 1e-2;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t max_vocab_words = 20000;
  /// Probability of masking one extra context position per training example,
  /// so the model sees multi-mask contexts.
  double extra_mask_rate = 0.15;
  /// Never predict the piece that was masked out.
  bool forbid_original = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A neutral sentence with optional image tokens (empty = text-only).
struct InfillExample {
  std::vector<std::string> words;
  std::vector<std::vector<double>> image_tokens;
};

struct Replacement {
  std::size_t position = 0;
  std::string original;
  std::string predicted;
  double score = 0.0;  // softmax probability among admissible pieces
};

struct InfillHistory {
  std::vector<double> epoch_loss;  // index 0 = before training
};

/// Masked-token predictor conditioned on the surrounding pieces (two on each
/// side plus a bag of the whole sentence) and on the mean image token:
///   h = tanh(sum_slots E_slot[ctx] + mean_j E_bag[t_j] + P * img + b)
///   p(piece) = softmax(W h + c).
/// Default-constructed models are untrained and reject inference.
class InfillModel {
 public:
  InfillModel() = default;
  InfillModel(InfillConfig config, textbias::Tokenizer tokenizer, std::size_t image_dim);

  bool trained() const { return trained_; }
  const InfillConfig& config() const { return config_; }
  const textbias::Tokenizer& tokenizer() const { return tokenizer_; }
  std::size_t image_dim() const { return image_dim_; }

  /// Probability distribution over the vocabulary at `position` of `ids`
  /// (which may contain mask ids), given a mean image vector (may be empty).
  std::vector<double> distribution(const std::vector<int>& ids, std::size_t position,
                                   const std::vector<double>& image_mean) const;

  std::vector<Replacement> predict(const MaskedSentence& masked,
                                   const std::vector<std::vector<double>>& image_tokens) const;

  void init(Rng& rng);
  std::vector<nn::Param*> params();
  void mark_trained() { trained_ = true; }

  struct Example {
    std::vector<int> ids;
    std::size_t target_position;
    int target;
    std::vector<double> image_mean;
  };
  /// Mean cross-entropy; with `accumulate`, adds gradients of that mean.
  double batch_loss(const std::vector<const Example*>& batch, bool accumulate);

  void save(const std::filesystem::path& path) const;
  static InfillModel load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static InfillModel from_json(const nlohmann::json& j);

 private:
  static constexpr std::size_t kSlots = 4;  // p-2, p-1, p+1, p+2
  void hidden_pre(const std::vector<int>& ids, std::size_t position, const std::vector<double>& image_mean,
                  double* z) const;

  InfillConfig config_;
  textbias::Tokenizer tokenizer_;
  std::size_t image_dim_ = 0;
  bool trained_ = false;
  std::vector<nn::Param> slot_;
  nn::Param bag_, image_proj_, bias_, out_w_, out_b_;
};

/// Mean of the image tokens; empty when there are none.
std::vector<double> mean_image_token(const std::vector<std::vector<double>>& tokens);

/// Trains on neutral sentences: every in-vocabulary piece is used once per
/// epoch as a masked target. Deterministic for a given config.
InfillModel train_infill(const std::vector<InfillExample>& examples, std::size_t image_dim,
                         const InfillConfig& config, InfillHistory* history = nullptr,
                         const textbias::Vocabulary* vocabulary = nullptr);

/// Exactly one replacement per mask position. Image tokens may be empty.
std::vector<Replacement> predict_replacements(const InfillModel& model, const MaskedSentence& masked,
                                              const std::vector<std::vector<double>>& image_tokens);

/// Substitutes predictions into the masked pieces.
std::vector<textbias::Token> apply_replacements(const MaskedSentence& masked,
                                                const std::vector<Replacement>& replacements);

}  // namespace mmdebias::neutralize
