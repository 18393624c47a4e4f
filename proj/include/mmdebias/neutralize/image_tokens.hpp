#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmdebias/common/image.hpp"

namespace mmdebias::neutralize {

/// Turns an image into a fixed-length sequence of continuous token embeddings.
class ImageTokenizer {
 public:
  virtual ~ImageTokenizer() = default;
  virtual std::size_t length() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<std::vector<double>> encode(const Image& img) const = 0;
};

/// One token per grid cell: (mean R, mean G, mean B, luminance stddev) of the
/// cell, mapped through a fixed seeded random projection to `dim`.
class PatchGridTokenizer final : public ImageTokenizer {
 public:
  PatchGridTokenizer(int grid = 4, std::size_t dim = 16, std::uint64_t seed = 17);

  std::size_t length() const override { return static_cast<std::size_t>(grid_) * grid_; }
  std::size_t dim() const override { return dim_; }
  std::vector<std::vector<double>> encode(const Image& img) const override;

  nlohmann::json to_json() const;
  static PatchGridTokenizer from_json(const nlohmann::json& j);

 private:
  int grid_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> projection_;  // dim x 4
};

struct ImageTokens {
  std::vector<std::vector<double>> tokens;
  bool missing = false;  // image absent; infill runs text-only
  std::string warning;
};

/// Missing image (empty ref or nonexistent file): empty sequence with the
/// missing flag and a warning. An existing file that cannot be decoded
/// throws IoError.
ImageTokens encode_image_tokens(const std::filesystem::path& image_ref, const ImageTokenizer& tokenizer);

}  // namespace mmdebias::neutralize
