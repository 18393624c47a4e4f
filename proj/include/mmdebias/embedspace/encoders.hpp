#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/image.hpp"
#include "mmdebias/common/rng.hpp"
#include "mmdebias/nn/param.hpp"

namespace mmdebias::embedspace {

/// Signed feature hashing of lowercased words into `buckets` dims, L2-normalized.
std::vector<double> hashed_bag_of_words(std::string_view text, std::size_t buckets, bool signed_hash = true);

/// Unsupervised document embedding used to define semantic neighborhoods.
class DocumentEmbedder {
 public:
  virtual ~DocumentEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<double> embed(std::string_view text) const = 0;
};

/// Unsigned hashed bag of words followed by a fixed Gaussian random
/// projection; preserves bag-of-words cosine geometry approximately.
class BowProjectionEmbedder final : public DocumentEmbedder {
 public:
  BowProjectionEmbedder(std::size_t dim = 64, std::size_t buckets = 1024, std::uint64_t seed = 7);
  std::size_t dim() const override { return dim_; }
  std::vector<double> embed(std::string_view text) const override;

 private:
  std::size_t dim_, buckets_;
  std::vector<double> projection_;  // dim x buckets
};

/// Text and image towers mapping into the shared space. Each tower is a fixed
/// featurizer followed by a trainable linear projection.
class DualEncoder {
 public:
  struct Config {
    std::size_t dim = 32;
    std::size_t text_buckets = 256;
    int image_grid = 6;
  };

  DualEncoder() = default;
  explicit DualEncoder(Config cfg);

  void init(Rng& rng);

  const Config& config() const { return cfg_; }
  std::size_t text_features() const { return cfg_.text_buckets; }
  std::size_t image_features() const { return static_cast<std::size_t>(cfg_.image_grid) * cfg_.image_grid * 3; }

  std::vector<double> text_featurize(std::string_view text) const;
  std::vector<double> image_featurize(const Image& img) const;

  /// Raw (unnormalized) tower outputs.
  std::vector<double> embed_text(std::string_view text) const;
  std::vector<double> embed_image(const Image& img) const;
  std::vector<double> project_text(const std::vector<double>& features) const;
  std::vector<double> project_image(const std::vector<double>& features) const;

  nn::Param& text_projection() { return text_proj_; }
  nn::Param& image_projection() { return image_proj_; }
  const nn::Param& text_projection() const { return text_proj_; }
  const nn::Param& image_projection() const { return image_proj_; }

  void save(const std::filesystem::path& path) const;
  static DualEncoder load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  static DualEncoder from_json(const nlohmann::json& j);

 private:
  Config cfg_;
  nn::Param text_proj_, image_proj_;
};

/// Unit L2 norm copy; zero vectors are returned unchanged.
std::vector<double> l2_normalized(std::vector<double> v);

}  // namespace mmdebias::embedspace
