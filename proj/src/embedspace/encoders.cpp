#include "mmdebias/embedspace/encoders.hpp"

#include <cmath>
#include <fstream>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::embedspace {

namespace {
constexpr const char* kFormat = "mmdebias/dual-encoder";
}

std::vector<double> hashed_bag_of_words(std::string_view s, std::size_t buckets, bool signed_hash) {
  std::vector<double> v(buckets, 0.0);
  for (const auto& w : text::split_words(s)) {
    auto h = text::fnv1a(w);
    double sign = signed_hash && ((h >> 63) & 1U) ? -1.0 : 1.0;
    v[h % buckets] += sign;
  }
  return l2_normalized(std::move(v));
}

std::vector<double> l2_normalized(std::vector<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  if (n == 0.0) return v;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

BowProjectionEmbedder::BowProjectionEmbedder(std::size_t dim, std::size_t buckets, std::uint64_t seed)
    : dim_(dim), buckets_(buckets), projection_(dim * buckets) {
  if (dim == 0 || buckets == 0) throw ValidationError("document embedder needs positive sizes");
  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  for (auto& w : projection_) w = rng.normal(0.0, s);
}

std::vector<double> BowProjectionEmbedder::embed(std::string_view s) const {
  auto bow = hashed_bag_of_words(s, buckets_, false);
  std::vector<double> out(dim_);
  kernels::serial::project(bow, 1, buckets_, projection_, dim_, out);
  return out;
}

DualEncoder::DualEncoder(Config cfg)
    : cfg_(cfg),
      text_proj_("text_proj", cfg.dim, cfg.text_buckets),
      image_proj_("image_proj", cfg.dim, static_cast<std::size_t>(cfg.image_grid) * cfg.image_grid * 3) {
  if (cfg.dim == 0 || cfg.text_buckets == 0 || cfg.image_grid <= 0)
    throw ValidationError("dual encoder needs positive sizes");
}

void DualEncoder::init(Rng& rng) {
  text_proj_.init_normal(rng, 1.0);
  image_proj_.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(image_features())));
}

std::vector<double> DualEncoder::text_featurize(std::string_view text) const {
  return hashed_bag_of_words(text, cfg_.text_buckets);
}

std::vector<double> DualEncoder::image_featurize(const Image& img) const { return centered_grid_features(img, cfg_.image_grid); }

std::vector<double> DualEncoder::project_text(const std::vector<double>& f) const {
  if (f.size() != text_features()) throw ValidationError("text feature size mismatch");
  std::vector<double> out(cfg_.dim);
  kernels::serial::project(f, 1, f.size(), text_proj_.value, cfg_.dim, out);
  return out;
}

std::vector<double> DualEncoder::project_image(const std::vector<double>& f) const {
  if (f.size() != image_features()) throw ValidationError("image feature size mismatch");
  std::vector<double> out(cfg_.dim);
  kernels::serial::project(f, 1, f.size(), image_proj_.value, cfg_.dim, out);
  return out;
}

std::vector<double> DualEncoder::embed_text(std::string_view text) const { return project_text(text_featurize(text)); }

std::vector<double> DualEncoder::embed_image(const Image& img) const { return project_image(image_featurize(img)); }

nlohmann::json DualEncoder::to_json() const {
  return {{"format", kFormat},
          {"version", 1},
          {"dim", cfg_.dim},
          {"text_buckets", cfg_.text_buckets},
          {"image_grid", cfg_.image_grid},
          {"text_proj", nn::to_json(text_proj_)},
          {"image_proj", nn::to_json(image_proj_)}};
}

DualEncoder DualEncoder::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFormat) throw ValidationError("not a dual encoder checkpoint");
  DualEncoder e(Config{j.at("dim"), j.at("text_buckets"), j.at("image_grid")});
  nn::from_json(j.at("text_proj"), e.text_proj_);
  nn::from_json(j.at("image_proj"), e.image_proj_);
  return e;
}

void DualEncoder::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump();
}

DualEncoder DualEncoder::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open encoder " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("encoder checkpoint: ") + e.what(), 0);
  }
}

}  // namespace mmdebias::embedspace
