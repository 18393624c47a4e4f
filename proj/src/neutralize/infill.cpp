#include "mmdebias/neutralize/infill.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mmdebias/common/error.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::neutralize {

using textbias::Vocabulary;

namespace {

constexpr const char* kFormat = "mmdebias/neutralize-infill";

int context_id(const std::vector<int>& ids, std::ptrdiff_t pos) {
  if (pos < 0) return Vocabulary::kBosId;
  if (pos >= static_cast<std::ptrdiff_t>(ids.size())) return Vocabulary::kEosId;
  return ids[static_cast<std::size_t>(pos)];
}

constexpr std::ptrdiff_t kOffsets[] = {-2, -1, 1, 2};

}  // namespace

void InfillConfig::validate() const {
  if (hidden == 0) throw ValidationError("infill hidden size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("infill learning rate must be finite and non-negative");
  if (batch_size == 0) throw ValidationError("infill batch size must be positive");
  if (!(extra_mask_rate >= 0.0 && extra_mask_rate <= 1.0)) throw ValidationError("extra mask rate outside [0, 1]");
}

std::vector<double> mean_image_token(const std::vector<std::vector<double>>& tokens) {
  if (tokens.empty()) return {};
  std::vector<double> mean(tokens.front().size(), 0.0);
  for (const auto& t : tokens) {
    if (t.size() != mean.size()) throw ValidationError("image tokens have inconsistent dimensions");
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += t[k];
  }
  for (auto& v : mean) v /= static_cast<double>(tokens.size());
  return mean;
}

InfillModel::InfillModel(InfillConfig config, textbias::Tokenizer tokenizer, std::size_t image_dim)
    : config_(config), tokenizer_(std::move(tokenizer)), image_dim_(image_dim) {
  const std::size_t v = tokenizer_.vocabulary().size(), h = config_.hidden;
  for (std::size_t s = 0; s < kSlots; ++s) slot_.emplace_back("slot" + std::to_string(s), v, h);
  bag_ = nn::Param("bag", v, h);
  image_proj_ = nn::Param("image_proj", h, std::max<std::size_t>(image_dim, 1));
  bias_ = nn::Param("bias", 1, h);
  out_w_ = nn::Param("out.w", v, h);
  out_b_ = nn::Param("out.b", 1, v);
}

void InfillModel::init(Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(config_.hidden));
  for (auto& p : slot_) p.init_normal(rng, 0.5);
  bag_.init_normal(rng, 0.5);
  image_proj_.init_normal(rng, s);
  out_w_.init_normal(rng, s);
}

std::vector<nn::Param*> InfillModel::params() {
  std::vector<nn::Param*> out;
  for (auto& p : slot_) out.push_back(&p);
  for (auto* p : {&bag_, &image_proj_, &bias_, &out_w_, &out_b_}) out.push_back(p);
  return out;
}

void InfillModel::hidden_pre(const std::vector<int>& ids, std::size_t position, const std::vector<double>& image_mean,
                             double* z) const {
  const std::size_t h = config_.hidden;
  std::copy_n(bias_.value.data(), h, z);
  for (std::size_t s = 0; s < kSlots; ++s) {
    const double* e = slot_[s].row(static_cast<std::size_t>(context_id(ids, static_cast<std::ptrdiff_t>(position) + kOffsets[s])));
    for (std::size_t k = 0; k < h; ++k) z[k] += e[k];
  }
  std::size_t bag_count = 0;
  for (std::size_t j = 0; j < ids.size(); ++j)
    if (j != position && ids[j] != Vocabulary::kMaskId) ++bag_count;
  if (bag_count) {
    double w = 1.0 / static_cast<double>(bag_count);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (j == position || ids[j] == Vocabulary::kMaskId) continue;
      const double* e = bag_.row(static_cast<std::size_t>(ids[j]));
      for (std::size_t k = 0; k < h; ++k) z[k] += w * e[k];
    }
  }
  if (!image_mean.empty()) {
    if (image_mean.size() != image_dim_) throw ValidationError("image token dimension does not match the model");
    for (std::size_t k = 0; k < h; ++k) {
      const double* row = image_proj_.row(k);
      double s = 0.0;
      for (std::size_t d = 0; d < image_dim_; ++d) s += row[d] * image_mean[d];
      z[k] += s;
    }
  }
}

std::vector<double> InfillModel::distribution(const std::vector<int>& ids, std::size_t position,
                                              const std::vector<double>& image_mean) const {
  if (!trained_) throw StateError("infill model is not trained");
  const std::size_t h = config_.hidden, v = tokenizer_.vocabulary().size();
  std::vector<double> hid(h);
  hidden_pre(ids, position, image_mean, hid.data());
  for (auto& x : hid) x = std::tanh(x);
  std::vector<double> logits(v);
  kernels::serial::project(hid, 1, h, out_w_.value, v, logits);
  double mx = -1e300;
  for (std::size_t i = 0; i < v; ++i) mx = std::max(mx, logits[i] += out_b_.value[i]);
  double sum = 0.0;
  for (auto& l : logits) sum += (l = std::exp(l - mx));
  for (auto& l : logits) l /= sum;
  return logits;
}

std::vector<Replacement> InfillModel::predict(const MaskedSentence& masked,
                                              const std::vector<std::vector<double>>& image_tokens) const {
  if (!trained_) throw StateError("infill model is not trained");
  const auto& vocab = tokenizer_.vocabulary();
  std::vector<int> ids = tokenizer_.ids(masked.tokens);
  auto image_mean = mean_image_token(image_tokens);
  std::vector<Replacement> out;
  for (std::size_t m = 0; m < masked.mask_positions.size(); ++m) {
    std::size_t pos = masked.mask_positions[m];
    if (pos >= ids.size() || ids[pos] != Vocabulary::kMaskId) throw ValidationError("mask position is not masked");
    auto probs = distribution(ids, pos, image_mean);
    bool continuation = masked.tokens[pos].continuation;
    const std::string& original = masked.original_tokens[m];
    int best = -1;
    double admissible = 0.0;
    for (std::size_t id = Vocabulary::kNumSpecial; id < vocab.size(); ++id) {
      const auto& piece = vocab.piece(static_cast<int>(id));
      if (piece.starts_with("##") != continuation) continue;
      if (config_.forbid_original && piece == original) continue;
      admissible += probs[id];
      if (best < 0 || probs[id] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(id);
    }
    if (best < 0) throw StateError("infill vocabulary has no admissible replacement piece");
    out.push_back({pos, original, vocab.piece(best), admissible > 0 ? probs[static_cast<std::size_t>(best)] / admissible : 0.0});
  }
  return out;
}

double InfillModel::batch_loss(const std::vector<const Example*>& batch, bool accumulate) {
  const std::size_t b = batch.size(), h = config_.hidden, v = tokenizer_.vocabulary().size();
  if (b == 0) return 0.0;
  std::vector<double> hid(b * h), logits(b * v);
  for (std::size_t i = 0; i < b; ++i) {
    hidden_pre(batch[i]->ids, batch[i]->target_position, batch[i]->image_mean, hid.data() + i * h);
    for (std::size_t k = 0; k < h; ++k) hid[i * h + k] = std::tanh(hid[i * h + k]);
  }
  kernels::project(hid, b, h, out_w_.value, v, logits);
  double loss = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double* l = logits.data() + i * v;
    double mx = -1e300;
    for (std::size_t k = 0; k < v; ++k) mx = std::max(mx, l[k] += out_b_.value[k]);
    double sum = 0.0;
    for (std::size_t k = 0; k < v; ++k) sum += std::exp(l[k] - mx);
    auto target = static_cast<std::size_t>(batch[i]->target);
    loss += -(l[target] - mx - std::log(sum));
    if (accumulate) {
      for (std::size_t k = 0; k < v; ++k) l[k] = std::exp(l[k] - mx) / sum / static_cast<double>(b);
      l[target] -= 1.0 / static_cast<double>(b);
    }
  }
  loss /= static_cast<double>(b);
  if (!accumulate) return loss;

  // logits now holds d loss / d logits.
  kernels::project_grad(hid, b, h, logits, v, out_w_.grad);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < v; ++k) out_b_.grad[k] += logits[i * v + k];
  std::vector<double> dh(b * h);
  kernels::project_back(logits, b, v, out_w_.value, h, dh);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& ex = *batch[i];
    double* dz = dh.data() + i * h;
    for (std::size_t k = 0; k < h; ++k) dz[k] *= 1.0 - hid[i * h + k] * hid[i * h + k];
    for (std::size_t k = 0; k < h; ++k) bias_.grad[k] += dz[k];
    for (std::size_t s = 0; s < kSlots; ++s) {
      auto id = context_id(ex.ids, static_cast<std::ptrdiff_t>(ex.target_position) + kOffsets[s]);
      double* g = slot_[s].grad_row(static_cast<std::size_t>(id));
      for (std::size_t k = 0; k < h; ++k) g[k] += dz[k];
    }
    std::size_t bag_count = 0;
    for (std::size_t j = 0; j < ex.ids.size(); ++j)
      if (j != ex.target_position && ex.ids[j] != Vocabulary::kMaskId) ++bag_count;
    for (std::size_t j = 0; j < ex.ids.size() && bag_count; ++j) {
      if (j == ex.target_position || ex.ids[j] == Vocabulary::kMaskId) continue;
      double* g = bag_.grad_row(static_cast<std::size_t>(ex.ids[j]));
      for (std::size_t k = 0; k < h; ++k) g[k] += dz[k] / static_cast<double>(bag_count);
    }
    if (!ex.image_mean.empty())
      for (std::size_t k = 0; k < h; ++k) {
        double* g = image_proj_.grad_row(k);
        for (std::size_t d = 0; d < image_dim_; ++d) g[d] += dz[k] * ex.image_mean[d];
      }
  }
  return loss;
}

nlohmann::json InfillModel::to_json() const {
  if (!trained_) throw StateError("infill model is not trained");
  nlohmann::json ps = nlohmann::json::array();
  for (auto* p : const_cast<InfillModel*>(this)->params()) ps.push_back(nn::to_json(*p));
  return {{"format", kFormat},
          {"version", 1},
          {"config",
           {{"hidden", config_.hidden},
            {"learning_rate", config_.learning_rate},
            {"epochs", config_.epochs},
            {"batch_size", config_.batch_size},
            {"max_vocab_words", config_.max_vocab_words},
            {"extra_mask_rate", config_.extra_mask_rate},
            {"forbid_original", config_.forbid_original},
            {"seed", config_.seed}}},
          {"image_dim", image_dim_},
          {"vocabulary", tokenizer_.vocabulary().to_json()},
          {"params", ps}};
}

InfillModel InfillModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFormat) throw ValidationError("not an infill checkpoint");
  if (j.at("version").get<int>() != 1) throw ValidationError("unsupported infill checkpoint version");
  const auto& c = j.at("config");
  InfillConfig cfg;
  cfg.hidden = c.at("hidden");
  cfg.learning_rate = c.at("learning_rate");
  cfg.epochs = c.at("epochs");
  cfg.batch_size = c.at("batch_size");
  cfg.max_vocab_words = c.at("max_vocab_words");
  cfg.extra_mask_rate = c.at("extra_mask_rate");
  cfg.forbid_original = c.at("forbid_original");
  cfg.seed = c.at("seed");
  cfg.validate();
  InfillModel m(cfg, textbias::Tokenizer(Vocabulary::from_json(j.at("vocabulary"))), j.at("image_dim"));
  auto ps = m.params();
  const auto& arr = j.at("params");
  if (arr.size() != ps.size()) throw ValidationError("infill checkpoint has wrong parameter count");
  for (std::size_t i = 0; i < ps.size(); ++i) nn::from_json(arr[i], *ps[i]);
  m.trained_ = true;
  return m;
}

void InfillModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump();
}

InfillModel InfillModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("infill checkpoint: ") + e.what(), 0);
  }
}

InfillModel train_infill(const std::vector<InfillExample>& examples, std::size_t image_dim, const InfillConfig& config,
                         InfillHistory* history, const textbias::Vocabulary* vocabulary) {
  config.validate();
  if (examples.empty()) throw ValidationError("cannot train infill model on an empty corpus");
  textbias::Vocabulary vocab;
  if (vocabulary) {
    vocab = *vocabulary;
  } else {
    std::vector<std::vector<std::string>> sentences;
    for (const auto& e : examples) sentences.push_back(e.words);
    vocab = textbias::Vocabulary::build(sentences, config.max_vocab_words);
  }
  InfillModel model(config, textbias::Tokenizer(std::move(vocab)), image_dim);
  Rng rng(config.seed);
  model.init(rng);

  // One target per in-vocabulary piece; the extra masks are drawn once so
  // every epoch sees the same examples.
  std::vector<InfillModel::Example> data;
  for (const auto& e : examples) {
    if (e.words.empty()) continue;
    auto ids = model.tokenizer().ids(model.tokenizer().tokenize_words(e.words));
    auto image_mean = mean_image_token(e.image_tokens);
    if (!image_mean.empty() && image_mean.size() != image_dim)
      throw ValidationError("training image tokens do not match the configured dimension");
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (ids[p] == Vocabulary::kUnkId) continue;
      InfillModel::Example ex{ids, p, ids[p], image_mean};
      ex.ids[p] = Vocabulary::kMaskId;
      if (ids.size() > 2 && rng.uniform() < config.extra_mask_rate) {
        std::size_t q = rng.index(ids.size());
        if (q != p) ex.ids[q] = Vocabulary::kMaskId;
      }
      data.push_back(std::move(ex));
    }
  }
  if (data.empty()) throw ValidationError("infill corpus has no usable tokens");

  auto all_loss = [&] {
    double total = 0.0;
    for (std::size_t start = 0; start < data.size(); start += 256) {
      std::vector<const InfillModel::Example*> batch;
      for (std::size_t k = start; k < std::min(start + 256, data.size()); ++k) batch.push_back(&data[k]);
      total += model.batch_loss(batch, false) * static_cast<double>(batch.size());
    }
    return total / static_cast<double>(data.size());
  };

  InfillHistory local;
  InfillHistory& hist = history ? *history : local;
  hist = {};
  hist.epoch_loss.push_back(all_loss());
  auto params = model.params();
  nn::Adam adam(config.learning_rate);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::vector<const InfillModel::Example*> batch;
      for (std::size_t k = start; k < std::min(start + config.batch_size, order.size()); ++k)
        batch.push_back(&data[order[k]]);
      for (auto* p : params) p->zero_grad();
      model.batch_loss(batch, true);
      adam.step(params);
    }
    hist.epoch_loss.push_back(all_loss());
  }
  model.mark_trained();
  return model;
}

std::vector<Replacement> predict_replacements(const InfillModel& model, const MaskedSentence& masked,
                                              const std::vector<std::vector<double>>& image_tokens) {
  return model.predict(masked, image_tokens);
}

std::vector<textbias::Token> apply_replacements(const MaskedSentence& masked,
                                                const std::vector<Replacement>& replacements) {
  auto tokens = masked.tokens;
  for (const auto& r : replacements) {
    if (r.position >= tokens.size()) throw ValidationError("replacement position out of range");
    tokens[r.position].text = r.predicted;
  }
  return tokens;
}

}  // namespace mmdebias::neutralize
