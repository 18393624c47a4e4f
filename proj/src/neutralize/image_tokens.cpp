#include "mmdebias/neutralize/image_tokens.hpp"

#include <array>
#include <cmath>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/log.hpp"
#include "mmdebias/common/rng.hpp"

namespace mmdebias::neutralize {

PatchGridTokenizer::PatchGridTokenizer(int grid, std::size_t dim, std::uint64_t seed)
    : grid_(grid), dim_(dim), seed_(seed), projection_(dim * 4) {
  if (grid <= 0 || dim == 0) throw ValidationError("image tokenizer needs a positive grid and dimension");
  Rng rng(seed);
  for (auto& w : projection_) w = rng.normal(0.0, 1.0);
}

std::vector<std::vector<double>> PatchGridTokenizer::encode(const Image& img) const {
  if (img.empty()) throw ValidationError("cannot tokenize an empty image");
  const std::size_t cells = length();
  std::vector<std::array<double, 4>> stats(cells, {0, 0, 0, 0});
  std::vector<double> lum_sq(cells, 0.0);
  std::vector<int> count(cells, 0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      std::size_t cell = static_cast<std::size_t>(y * grid_ / img.height) * grid_ + x * grid_ / img.width;
      double rgb[3];
      for (int c = 0; c < 3; ++c) rgb[c] = img.at(x, y, img.channels == 3 ? c : 0);
      double lum = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
      for (int c = 0; c < 3; ++c) stats[cell][c] += rgb[c];
      stats[cell][3] += lum;
      lum_sq[cell] += lum * lum;
      ++count[cell];
    }
  std::vector<std::vector<double>> out(cells, std::vector<double>(dim_, 0.0));
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double f[4] = {0, 0, 0, 0};
    if (count[cell]) {
      double n = count[cell];
      for (int c = 0; c < 3; ++c) f[c] = stats[cell][c] / n;
      double mean = stats[cell][3] / n;
      f[3] = std::sqrt(std::max(0.0, lum_sq[cell] / n - mean * mean));
    }
    for (std::size_t d = 0; d < dim_; ++d) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += projection_[d * 4 + k] * f[k];
      out[cell][d] = s;
    }
  }
  return out;
}

nlohmann::json PatchGridTokenizer::to_json() const {
  return {{"kind", "patch-grid"}, {"grid", grid_}, {"dim", dim_}, {"seed", seed_}};
}

PatchGridTokenizer PatchGridTokenizer::from_json(const nlohmann::json& j) {
  return PatchGridTokenizer(j.at("grid").get<int>(), j.at("dim").get<std::size_t>(), j.at("seed").get<std::uint64_t>());
}

ImageTokens encode_image_tokens(const std::filesystem::path& image_ref, const ImageTokenizer& tokenizer) {
  ImageTokens out;
  if (image_ref.empty() || !std::filesystem::exists(image_ref)) {
    out.missing = true;
    out.warning = "image '" + image_ref.string() + "' not found; infilling from text only";
    log::warn(out.warning);
    return out;
  }
  out.tokens = tokenizer.encode(read_netpbm(image_ref));
  return out;
}

}  // namespace mmdebias::neutralize
