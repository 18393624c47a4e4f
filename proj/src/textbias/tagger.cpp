#include "mmdebias/textbias/tagger.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/common/window.hpp"
#include "mmdebias/textbias/labels.hpp"

namespace mmdebias::textbias {

namespace {

constexpr const char* kFormat = "mmdebias/textbias-tagger";

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double bce(double logit, int label, double pos_weight) {
  return label ? pos_weight * softplus(-logit) : softplus(logit);
}

}  // namespace

void TaggerConfig::validate() const {
  if (hidden == 0) throw ValidationError("hidden size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ValidationError("learning rate must be finite and non-negative");
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (context_length < 2 || window_overlap >= context_length)
    throw ValidationError("context length must exceed window overlap");
  if (!(positive_weight > 0.0)) throw ValidationError("positive weight must be positive");
  if (!(piece_dropout >= 0.0 && piece_dropout <= 1.0)) throw ValidationError("piece dropout must be in [0, 1]");
}

nlohmann::json to_json(const TaggerConfig& c) {
  return {{"hidden", c.hidden},
          {"layers", c.layers},
          {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"context_length", c.context_length},
          {"window_overlap", c.window_overlap},
          {"max_vocab_words", c.max_vocab_words},
          {"positive_weight", c.positive_weight},
          {"piece_dropout", c.piece_dropout},
          {"seed", c.seed}};
}

TaggerConfig tagger_config_from_json(const nlohmann::json& j) {
  TaggerConfig c;
  c.hidden = j.at("hidden");
  c.layers = j.at("layers");
  c.learning_rate = j.at("learning_rate");
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.context_length = j.at("context_length");
  c.window_overlap = j.at("window_overlap");
  c.max_vocab_words = j.at("max_vocab_words");
  c.positive_weight = j.at("positive_weight");
  c.piece_dropout = j.value("piece_dropout", 0.0);
  c.seed = j.at("seed");
  c.validate();
  return c;
}

TaggerModel::TaggerModel(TaggerConfig config, Tokenizer tokenizer, std::unique_ptr<SequenceEncoder> encoder)
    : config_(config),
      tokenizer_(std::move(tokenizer)),
      encoder_(std::move(encoder)),
      head_w_("head.w", 1, encoder_->hidden()) {}

TaggerModel::TaggerModel(const TaggerModel& other)
    : config_(other.config_),
      tokenizer_(other.tokenizer_),
      encoder_(other.encoder_ ? other.encoder_->clone() : nullptr),
      head_w_(other.head_w_),
      head_b_(other.head_b_) {}

TaggerModel& TaggerModel::operator=(const TaggerModel& other) {
  if (this != &other) *this = TaggerModel(other);
  return *this;
}

void TaggerModel::require_trained() const {
  if (!trained()) throw StateError("tagger model is not trained");
}

std::vector<nn::Param*> TaggerModel::params() {
  require_trained();
  auto ps = encoder_->params();
  ps.push_back(&head_w_);
  ps.push_back(&head_b_);
  return ps;
}

std::vector<double> TaggerModel::window_probabilities(std::span<const int> ids) const {
  EncoderCache cache;
  encoder_->forward(ids, cache);
  const std::size_t h = encoder_->hidden();
  std::vector<double> p(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    double z = head_b_.value[0];
    for (std::size_t k = 0; k < h; ++k) z += head_w_.value[k] * cache.output[i * h + k];
    p[i] = nn::sigmoid(z);
  }
  return p;
}

std::vector<double> TaggerModel::piece_probabilities(std::span<const int> ids) const {
  require_trained();
  std::vector<double> merged(ids.size(), 0.0);
  for (auto [b, e] : sliding_windows(ids.size(), config_.context_length, config_.window_overlap)) {
    auto p = window_probabilities(ids.subspan(b, e - b));
    for (std::size_t i = b; i < e; ++i) merged[i] = std::max(merged[i], p[i - b]);
  }
  return merged;
}

double TaggerModel::loss(const std::vector<std::vector<int>>& ids, const std::vector<std::vector<int>>& labels) const {
  require_trained();
  double total = 0.0;
  std::size_t count = 0;
  const std::size_t h = encoder_->hidden();
  for (std::size_t s = 0; s < ids.size(); ++s) {
    EncoderCache cache;
    encoder_->forward(ids[s], cache);
    for (std::size_t i = 0; i < ids[s].size(); ++i) {
      double z = head_b_.value[0];
      for (std::size_t k = 0; k < h; ++k) z += head_w_.value[k] * cache.output[i * h + k];
      total += bce(z, labels[s][i], config_.positive_weight);
    }
    count += ids[s].size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

double TaggerModel::accumulate_gradient(std::span<const int> ids, std::span<const int> labels, double normalizer) {
  require_trained();
  EncoderCache cache;
  encoder_->forward(ids, cache);
  const std::size_t n = ids.size(), h = encoder_->hidden();
  std::vector<double> grad_out(n * h, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* hi = cache.output.data() + i * h;
    double z = head_b_.value[0];
    for (std::size_t k = 0; k < h; ++k) z += head_w_.value[k] * hi[k];
    total += bce(z, labels[i], config_.positive_weight);
    double p = nn::sigmoid(z);
    double dz = (labels[i] ? -config_.positive_weight * (1.0 - p) : p) / normalizer;
    head_b_.grad[0] += dz;
    for (std::size_t k = 0; k < h; ++k) {
      head_w_.grad[k] += dz * hi[k];
      grad_out[i * h + k] = dz * head_w_.value[k];
    }
  }
  encoder_->backward(ids, cache, grad_out);
  return total;
}

nlohmann::json TaggerModel::to_json() const {
  require_trained();
  return {{"format", kFormat},
          {"version", 1},
          {"config", textbias::to_json(config_)},
          {"vocabulary", tokenizer_.vocabulary().to_json()},
          {"encoder", encoder_->to_json()},
          {"head", {nn::to_json(head_w_), nn::to_json(head_b_)}}};
}

TaggerModel TaggerModel::from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kFormat) throw ValidationError("not a tagger checkpoint");
  if (j.at("version").get<int>() != 1) throw ValidationError("unsupported tagger checkpoint version");
  auto config = tagger_config_from_json(j.at("config"));
  Tokenizer tok(Vocabulary::from_json(j.at("vocabulary")));
  TaggerModel m(config, std::move(tok), encoder_from_json(j.at("encoder")));
  nn::from_json(j.at("head").at(0), m.head_w_);
  nn::from_json(j.at("head").at(1), m.head_b_);
  return m;
}

void TaggerModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump();
  if (!out) throw IoError("short write to " + path.string());
}

TaggerModel TaggerModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("tagger checkpoint: ") + e.what(), 0);
  }
}

std::vector<TaggedSequence> make_training_sequences(const std::vector<corpus::NeutralityPair>& pairs,
                                                    const Tokenizer& tokenizer, double piece_dropout, Rng* rng) {
  std::vector<TaggedSequence> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    auto labels = derive_diff_labels(p);
    std::vector<bool> split(p.biased_tokens.size(), false);
    if (rng && piece_dropout > 0.0)
      for (std::size_t i = 0; i < split.size(); ++i) split[i] = rng->uniform() < piece_dropout;
    auto tokens = tokenizer.tokenize_words(p.biased_tokens, split);
    TaggedSequence s;
    s.ids = tokenizer.ids(tokens);
    for (const auto& t : tokens) s.labels.push_back(labels[t.word_index].label);
    out.push_back(std::move(s));
  }
  return out;
}

TaggerModel train_tagger(const std::vector<corpus::NeutralityPair>& pairs, const TaggerConfig& config,
                         TaggerHistory* history) {
  config.validate();
  if (pairs.empty()) throw ValidationError("cannot train tagger on an empty pair set");

  std::vector<std::vector<std::string>> sentences;
  for (const auto& p : pairs) {
    sentences.push_back(p.biased_tokens);
    sentences.push_back(p.neutral_tokens);
  }
  Tokenizer tokenizer(Vocabulary::build(sentences, config.max_vocab_words));
  Rng rng(config.seed);
  auto sequences = make_training_sequences(pairs, tokenizer, config.piece_dropout, &rng);

  std::vector<std::vector<int>> win_ids, win_labels;
  for (const auto& s : sequences)
    for (auto [b, e] : sliding_windows(s.ids.size(), config.context_length, config.window_overlap)) {
      win_ids.emplace_back(s.ids.begin() + static_cast<std::ptrdiff_t>(b), s.ids.begin() + static_cast<std::ptrdiff_t>(e));
      win_labels.emplace_back(s.labels.begin() + static_cast<std::ptrdiff_t>(b),
                              s.labels.begin() + static_cast<std::ptrdiff_t>(e));
    }

  auto encoder = std::make_unique<ContextMixEncoder>(tokenizer.vocabulary().size(), config.hidden, config.layers);
  encoder->init(rng);
  TaggerModel model(config, std::move(tokenizer), std::move(encoder));
  auto params = model.params();
  params[params.size() - 2]->init_normal(rng, 1.0 / std::sqrt(static_cast<double>(config.hidden)));
  params.back()->value[0] = -2.0;

  TaggerHistory local;
  TaggerHistory& hist = history ? *history : local;
  hist = {};
  hist.epoch_loss.push_back(model.loss(win_ids, win_labels));

  nn::Adam adam(config.learning_rate);
  std::vector<std::size_t> order(win_ids.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t end = std::min(start + config.batch_size, order.size());
      double tokens = 0.0;
      for (std::size_t k = start; k < end; ++k) tokens += static_cast<double>(win_ids[order[k]].size());
      for (auto* p : params) p->zero_grad();
      double total = 0.0;
      for (std::size_t k = start; k < end; ++k)
        total += model.accumulate_gradient(win_ids[order[k]], win_labels[order[k]], tokens);
      hist.step_loss.push_back(total / tokens);
      adam.step(params);
    }
    hist.epoch_loss.push_back(model.loss(win_ids, win_labels));
  }
  return model;
}

std::vector<TokenBias> predict_token_bias(const TaggerModel& model, const std::vector<Token>& tokens) {
  if (!model.trained()) throw StateError("tagger model is not trained");
  if (tokens.empty()) throw ValidationError("cannot predict on empty text");
  auto probs = model.piece_probabilities(model.tokenizer().ids(tokens));
  std::vector<TokenBias> out(word_count(tokens));
  for (std::size_t w = 0; w < out.size(); ++w) out[w].index = w;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto& tb = out[tokens[i].word_index];
    const auto& t = tokens[i];
    tb.token += t.continuation && t.text.starts_with("##") ? t.text.substr(2) : t.text;
    tb.probability = std::max(tb.probability, probs[i]);
  }
  return out;
}

std::vector<TokenBias> predict_token_bias(const TaggerModel& model, std::string_view text) {
  if (!model.trained()) throw StateError("tagger model is not trained");
  return predict_token_bias(model, model.tokenizer().tokenize(text));
}

std::vector<std::size_t> top_k(const std::vector<TokenBias>& predictions, std::size_t k) {
  std::vector<std::size_t> idx(predictions.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a].probability > predictions[b].probability; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

}  // namespace mmdebias::textbias
