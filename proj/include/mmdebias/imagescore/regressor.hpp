#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/image.hpp"
#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/nn/param.hpp"

namespace mmdebias::imagescore {

struct RegressorConfig {
  int grid = 6;
  std::size_t hidden = 32;
  double lr = 1e-2;
  int epochs = 100;
  std::size_t batch = 16;
  double validation_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LabeledImage {
  std::filesystem::path path;
  double score = 0.0;
};

/// Features plus label, decoupled from the filesystem.
struct LabeledFeatures {
  std::vector<double> features;
  double score = 0.0;
};

/// Grid features -> tanh hidden layer -> scalar head squashed by tanh.
class BiasRegressor {
 public:
  BiasRegressor() = default;
  /// Cold start with random backbone weights.
  BiasRegressor(int grid, std::size_t hidden, std::uint64_t seed);
  /// Backbone initialized from a trained space's image tower.
  static BiasRegressor from_space(const embedspace::DualEncoder& encoder, std::uint64_t seed);

  int grid() const { return grid_; }
  std::size_t features() const { return static_cast<std::size_t>(grid_) * grid_ * 3; }
  std::size_t hidden() const { return hidden_; }

  std::vector<double> featurize(const Image& img) const { return centered_grid_features(img, grid_); }
  double predict(std::span<const double> features) const;
  double predict(const Image& img) const { return predict(featurize(img)); }

  /// Mean squared error over the samples; adds its gradient when accumulate is set.
  double loss(std::span<const LabeledFeatures* const> batch, bool accumulate);

  std::vector<nn::Param*> params() { return {&w1_, &b1_, &w2_, &b2_}; }

  nlohmann::json to_json() const;
  static BiasRegressor from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static BiasRegressor load(const std::filesystem::path& path);

 private:
  int grid_ = 0;
  std::size_t hidden_ = 0;
  nn::Param w1_, b1_, w2_, b2_;
};

struct RegressionHistory {
  // Index 0 holds the loss before the first update.
  std::vector<double> train_loss;
  std::vector<double> validation_loss;  // empty when no samples were held out
};

/// Adam on squared error. A validation split is held out only when it would
/// keep at least one training sample.
RegressionHistory fine_tune(BiasRegressor& model, const std::vector<LabeledFeatures>& labeled,
                            const RegressorConfig& config);

/// Reads the image at `path`; IoError when it cannot be read.
double predict_bias(const BiasRegressor& model, const std::filesystem::path& path);

/// TSV of `image path<TAB>score`; relative paths resolve against the file's directory.
std::vector<LabeledImage> load_labeled_images(const std::filesystem::path& path);
std::vector<LabeledFeatures> featurize_labeled(const BiasRegressor& model, const std::vector<LabeledImage>& labeled);

}  // namespace mmdebias::imagescore
