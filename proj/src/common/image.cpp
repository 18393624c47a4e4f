#include "mmdebias/common/image.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

#include "mmdebias/common/error.hpp"

namespace mmdebias {

namespace {

class NetpbmReader {
 public:
  NetpbmReader(std::vector<char> data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}

  int next_int() {
    skip_space_and_comments();
    if (pos_ >= data_.size() || !std::isdigit(static_cast<unsigned char>(data_[pos_])))
      throw IoError("malformed netpbm header in " + name_);
    long v = 0;
    while (pos_ < data_.size() && std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      v = v * 10 + (data_[pos_++] - '0');
      if (v > 1 << 20) throw IoError("netpbm value too large in " + name_);
    }
    return static_cast<int>(v);
  }

  unsigned char next_byte() {
    if (pos_ >= data_.size()) throw IoError("truncated netpbm raster in " + name_);
    return static_cast<unsigned char>(data_[pos_++]);
  }

  // Exactly one whitespace byte separates the header from a binary raster.
  void skip_single_space() {
    if (pos_ >= data_.size() || !std::isspace(static_cast<unsigned char>(data_[pos_])))
      throw IoError("malformed netpbm header in " + name_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  const std::vector<char>& data() const { return data_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < data_.size()) {
      char c = data_[pos_];
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::vector<char> data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

Image read_netpbm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 2 || data[0] != 'P') throw IoError("not a netpbm image: " + path.string());
  char kind = data[1];
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6')
    throw IoError("unsupported netpbm variant P" + std::string(1, kind) + " in " + path.string());

  NetpbmReader r(std::move(data), path.string());
  r.next_byte();
  r.next_byte();
  Image img;
  img.width = r.next_int();
  img.height = r.next_int();
  int maxval = r.next_int();
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 255)
    throw IoError("unsupported netpbm geometry in " + path.string());
  img.channels = (kind == '3' || kind == '6') ? 3 : 1;
  std::size_t n = static_cast<std::size_t>(img.width) * img.height * img.channels;
  img.pixels.resize(n);
  bool binary = kind == '5' || kind == '6';
  if (binary) r.skip_single_space();
  for (std::size_t i = 0; i < n; ++i) {
    int v = binary ? r.next_byte() : r.next_int();
    if (v > maxval) throw IoError("netpbm sample exceeds maxval in " + path.string());
    img.pixels[i] = static_cast<float>(v) / static_cast<float>(maxval);
  }
  return img;
}

void write_netpbm(const std::filesystem::path& path, const Image& img) {
  if (img.channels != 1 && img.channels != 3) throw ValidationError("netpbm supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image " + path.string());
  out << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
  for (float p : img.pixels) {
    float c = p < 0.f ? 0.f : (p > 1.f ? 1.f : p);
    out.put(static_cast<char>(static_cast<unsigned char>(c * 255.f + 0.5f)));
  }
  if (!out) throw IoError("short write to " + path.string());
}

std::vector<double> grid_features(const Image& img, int grid) {
  if (grid <= 0) throw ValidationError("grid must be positive");
  if (img.empty()) throw ValidationError("empty image");
  std::vector<double> sums(static_cast<std::size_t>(grid) * grid * 3, 0.0);
  std::vector<int> counts(static_cast<std::size_t>(grid) * grid, 0);
  for (int y = 0; y < img.height; ++y) {
    int gy = y * grid / img.height;
    for (int x = 0; x < img.width; ++x) {
      int gx = x * grid / img.width;
      std::size_t cell = static_cast<std::size_t>(gy) * grid + gx;
      ++counts[cell];
      for (int c = 0; c < 3; ++c) sums[cell * 3 + c] += img.at(x, y, img.channels == 3 ? c : 0);
    }
  }
  for (std::size_t cell = 0; cell < counts.size(); ++cell)
    for (int c = 0; c < 3; ++c)
      if (counts[cell]) sums[cell * 3 + c] /= counts[cell];
  return sums;
}

std::vector<double> centered_grid_features(const Image& img, int grid) {
  auto f = grid_features(img, grid);
  for (auto& v : f) v -= 0.5;
  return f;
}

}  // namespace mmdebias
