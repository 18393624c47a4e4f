#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/rng.hpp"
#include "mmdebias/nn/param.hpp"

namespace mmdebias::textbias {

/// Activations kept from a forward pass for the backward pass. Layout is up
/// to the encoder; `output` (tokens x hidden) is always the final layer.
struct EncoderCache {
  std::size_t tokens = 0;
  std::vector<std::vector<double>> states;
  std::vector<double> output;
};

/// Contextual token encoder: ids in, one hidden vector per token out.
/// Implementations are immutable during inference, so forward() is safe to
/// call concurrently; backward() accumulates into parameter gradients and is
/// single-writer.
class SequenceEncoder {
 public:
  virtual ~SequenceEncoder() = default;
  virtual std::string kind() const = 0;
  virtual std::size_t hidden() const = 0;
  virtual void forward(std::span<const int> ids, EncoderCache& cache) const = 0;
  virtual void backward(std::span<const int> ids, const EncoderCache& cache, std::span<const double> grad_output) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  virtual std::unique_ptr<SequenceEncoder> clone() const = 0;
  virtual nlohmann::json to_json() const = 0;
};

/// Embedding lookup followed by residual layers
///   h' = h + tanh(A h_i + B (h_{i-1} + h_{i+1}) / 2 + b),
/// so each layer widens the receptive field by one token on each side.
class ContextMixEncoder final : public SequenceEncoder {
 public:
  ContextMixEncoder(std::size_t vocab_size, std::size_t hidden, std::size_t layers);

  void init(Rng& rng);

  std::string kind() const override { return "context-mix"; }
  std::size_t hidden() const override { return hidden_; }
  std::size_t layers() const { return mix_.size(); }
  void forward(std::span<const int> ids, EncoderCache& cache) const override;
  void backward(std::span<const int> ids, const EncoderCache& cache, std::span<const double> grad_output) override;
  std::vector<nn::Param*> params() override;
  std::unique_ptr<SequenceEncoder> clone() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<ContextMixEncoder> from_json(const nlohmann::json& j);

 private:
  struct Layer {
    nn::Param self, neighbor, bias;
  };
  std::size_t vocab_;
  std::size_t hidden_;
  nn::Param embedding_;
  std::vector<Layer> mix_;
};

std::unique_ptr<SequenceEncoder> encoder_from_json(const nlohmann::json& j);

}  // namespace mmdebias::textbias
