#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace mmdebias {

/// Interleaved 8-bit image, values stored as floats in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 or 3
  std::vector<float> pixels;

  float at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool empty() const { return pixels.empty(); }
};

/// Reads binary or ASCII Netpbm (P2, P3, P5, P6) with maxval <= 255.
/// Throws IoError when the file cannot be opened or is malformed.
Image read_netpbm(const std::filesystem::path& path);

/// Writes P5 (1 channel) or P6 (3 channels).
void write_netpbm(const std::filesystem::path& path, const Image& img);

/// Per-cell channel means over a grid x grid partition. Gray images are
/// replicated to three channels so the output length is always grid*grid*3.
std::vector<double> grid_features(const Image& img, int grid);

/// grid_features shifted to [-0.5, 0.5], the input of every trainable image model.
std::vector<double> centered_grid_features(const Image& img, int grid);

}  // namespace mmdebias
