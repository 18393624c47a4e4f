#include "mmdebias/imagescore/regressor.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/rng.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::imagescore {

namespace {
constexpr const char* kFormat = "mmdebias/imagescore-regressor";
}

void RegressorConfig::validate() const {
  if (grid <= 0) throw ValidationError("grid must be positive");
  if (hidden == 0) throw ValidationError("hidden size must be positive");
  if (!(lr >= 0.0)) throw ValidationError("learning rate must be non-negative");
  if (epochs < 0) throw ValidationError("epochs must be non-negative");
  if (batch == 0) throw ValidationError("batch size must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation fraction must be in [0, 1)");
}

BiasRegressor::BiasRegressor(int grid, std::size_t hidden, std::uint64_t seed)
    : grid_(grid),
      hidden_(hidden),
      w1_("w1", hidden, features()),
      b1_("b1", 1, hidden),
      w2_("w2", 1, hidden),
      b2_("b2", 1, 1) {
  if (grid <= 0 || hidden == 0) throw ValidationError("regressor needs a positive grid and hidden size");
  Rng rng(seed);
  w1_.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(features())));
  w2_.init_normal(rng, 1.0 / std::sqrt(static_cast<double>(hidden)));
}

BiasRegressor BiasRegressor::from_space(const embedspace::DualEncoder& encoder, std::uint64_t seed) {
  BiasRegressor m(encoder.config().image_grid, encoder.config().dim, seed);
  const auto& proj = encoder.image_projection();
  if (proj.rows != m.w1_.rows || proj.cols != m.w1_.cols) throw ValidationError("image tower shape mismatch");
  m.w1_.value = proj.value;
  return m;
}

double BiasRegressor::predict(std::span<const double> x) const {
  if (x.size() != features()) throw ValidationError("feature size mismatch");
  double z = b2_.value[0];
  for (std::size_t h = 0; h < hidden_; ++h) {
    const double* w = w1_.row(h);
    double a = b1_.value[h];
    for (std::size_t f = 0; f < x.size(); ++f) a += w[f] * x[f];
    z += w2_.value[h] * std::tanh(a);
  }
  return std::tanh(z);
}

double BiasRegressor::loss(std::span<const LabeledFeatures* const> batch, bool accumulate) {
  if (batch.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> h(hidden_);
  double total = 0.0;
  for (const auto* s : batch) {
    const auto& x = s->features;
    if (x.size() != features()) throw ValidationError("feature size mismatch");
    double z = b2_.value[0];
    for (std::size_t k = 0; k < hidden_; ++k) {
      const double* w = w1_.row(k);
      double a = b1_.value[k];
      for (std::size_t f = 0; f < x.size(); ++f) a += w[f] * x[f];
      h[k] = std::tanh(a);
      z += w2_.value[k] * h[k];
    }
    double y = std::tanh(z);
    double r = y - s->score;
    total += r * r;
    if (!accumulate) continue;
    double dz = 2.0 * r * inv * (1.0 - y * y);
    b2_.grad[0] += dz;
    for (std::size_t k = 0; k < hidden_; ++k) {
      w2_.grad[k] += dz * h[k];
      double da = dz * w2_.value[k] * (1.0 - h[k] * h[k]);
      b1_.grad[k] += da;
      double* g = w1_.grad_row(k);
      for (std::size_t f = 0; f < x.size(); ++f) g[f] += da * x[f];
    }
  }
  return total * inv;
}

nlohmann::json BiasRegressor::to_json() const {
  return {{"format", kFormat},     {"version", 1},          {"grid", grid_},
          {"hidden", hidden_},     {"w1", nn::to_json(w1_)}, {"b1", nn::to_json(b1_)},
          {"w2", nn::to_json(w2_)}, {"b2", nn::to_json(b2_)}};
}

BiasRegressor BiasRegressor::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFormat) throw ParseError("not an image regressor file");
  BiasRegressor m(j.at("grid").get<int>(), j.at("hidden").get<std::size_t>(), 0);
  nn::from_json(j.at("w1"), m.w1_);
  nn::from_json(j.at("b1"), m.b1_);
  nn::from_json(j.at("w2"), m.w2_);
  nn::from_json(j.at("b2"), m.b2_);
  return m;
}

void BiasRegressor::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump();
}

BiasRegressor BiasRegressor::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

RegressionHistory fine_tune(BiasRegressor& model, const std::vector<LabeledFeatures>& labeled,
                            const RegressorConfig& config) {
  config.validate();
  if (labeled.empty()) throw ValidationError("fine-tuning needs at least one labeled image");
  for (const auto& s : labeled) {
    if (!(s.score >= -1.0 && s.score <= 1.0)) throw ValidationError("label outside [-1, 1]");
    if (s.features.size() != model.features()) throw ValidationError("feature size mismatch");
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(labeled.size())));
  if (n_val >= labeled.size()) n_val = 0;
  std::vector<const LabeledFeatures*> val, train;
  for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val : train).push_back(&labeled[order[i]]);

  RegressionHistory hist;
  auto record = [&] {
    hist.train_loss.push_back(model.loss(train, false));
    if (!val.empty()) hist.validation_loss.push_back(model.loss(val, false));
  };
  record();
  nn::Adam adam(config.lr);
  auto params = model.params();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(train);
    for (std::size_t start = 0; start < train.size(); start += config.batch) {
      std::size_t end = std::min(train.size(), start + config.batch);
      for (auto* p : params) p->zero_grad();
      model.loss(std::span<const LabeledFeatures* const>(train.data() + start, end - start), true);
      adam.step(params);
    }
    record();
  }
  return hist;
}

double predict_bias(const BiasRegressor& model, const std::filesystem::path& path) {
  return model.predict(read_netpbm(path));
}

std::vector<LabeledImage> load_labeled_images(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<LabeledImage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected two tab-separated fields", lineno);
    std::filesystem::path img(line.substr(0, tab));
    if (img.is_relative()) img = path.parent_path() / img;
    double score = 0.0;
    try {
      std::size_t used = 0;
      std::string field = std::string(text::trim(line.substr(tab + 1)));
      score = std::stod(field, &used);
      if (used != field.size()) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ParseError("invalid score", lineno);
    }
    if (!(score >= -1.0 && score <= 1.0)) throw ValidationError("label outside [-1, 1] on line " + std::to_string(lineno));
    out.push_back({img, score});
  }
  return out;
}

std::vector<LabeledFeatures> featurize_labeled(const BiasRegressor& model, const std::vector<LabeledImage>& labeled) {
  std::vector<LabeledFeatures> out;
  out.reserve(labeled.size());
  for (const auto& l : labeled) out.push_back({model.featurize(read_netpbm(l.path)), l.score});
  return out;
}

}  // namespace mmdebias::imagescore
