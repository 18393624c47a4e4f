#include "mmdebias/orchestrator/train.hpp"

#include "mmdebias/common/log.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/synth/synth.hpp"

namespace mmdebias::orchestrator {

namespace fs = std::filesystem;

TrainOptions desk_options() {
  TrainOptions o;
  o.tagger.hidden = 32;
  o.tagger.layers = 2;
  o.tagger.learning_rate = 1e-2;
  o.tagger.epochs = 8;
  o.tagger.batch_size = 16;
  o.tagger.context_length = 64;
  o.tagger.window_overlap = 16;
  o.tagger.positive_weight = 3.0;
  o.infill.epochs = 15;
  o.space.neighbors = 20;
  o.regressor.epochs = 60;
  return o;
}

SpaceCorpus space_corpus(const std::vector<corpus::Article>& articles, const fs::path& image_base,
                         const embedspace::DualEncoder& encoder) {
  SpaceCorpus out;
  for (const auto& a : articles) {
    if (a.image_ref.empty()) continue;
    fs::path path = fs::path(a.image_ref).is_relative() ? image_base / a.image_ref : fs::path(a.image_ref);
    if (!fs::exists(path)) {
      log::warn("article " + a.id + ": image " + path.string() + " not found, left out of the index");
      continue;
    }
    auto img = read_netpbm(path);
    out.samples.push_back({a.id, a.text, encoder.image_featurize(img), a.source_score.value()});
    out.image_scores[a.id] = a.source_score.value();
    out.image_paths[a.id] = path;
  }
  return out;
}

TrainedBundle train_pipeline(const std::vector<corpus::Article>& articles,
                             const std::vector<corpus::NeutralityPair>& pairs, const fs::path& image_base,
                             const TrainOptions& options) {
  TrainedBundle out;
  auto& m = out.models;
  m.options = options.pipeline;

  auto tagger_cfg = options.tagger;
  tagger_cfg.seed = options.seed;
  m.tagger = textbias::train_tagger(pairs, tagger_cfg);

  auto infill_cfg = options.infill;
  infill_cfg.seed = options.seed + 1;
  // The infill vocabulary also covers biased words and article text so masked
  // words stay whole pieces at inference.
  std::vector<std::vector<std::string>> vocab_text;
  for (const auto& p : pairs) {
    vocab_text.push_back(p.neutral_tokens);
    vocab_text.push_back(p.biased_tokens);
  }
  for (const auto& a : articles) vocab_text.push_back(text::split_words(a.text));
  auto infill_vocab = textbias::Vocabulary::build(vocab_text, infill_cfg.max_vocab_words);
  m.infill = neutralize::train_infill(synth::neutral_examples(pairs), m.image_tokenizer.dim(), infill_cfg, nullptr,
                                      &infill_vocab);

  embedspace::DualEncoder encoder(options.encoder);
  Rng rng(options.seed + 2);
  encoder.init(rng);
  auto sc = space_corpus(articles, image_base, encoder);
  auto& samples = sc.samples;
  out.image_scores = sc.image_scores;
  m.image_paths = sc.image_paths;
  if (samples.size() < 2) throw ValidationError("training the space needs at least two articles with images");

  embedspace::BowProjectionEmbedder reference;
  auto space = embedspace::train_space(samples, encoder, reference, options.space, options.space_epochs, options.seed + 3);
  m.encoder = space.encoder;
  out.table = space.table;

  if (options.train_regressor) {
    auto reg = imagescore::BiasRegressor::from_space(m.encoder, options.seed + 4);
    std::vector<imagescore::LabeledFeatures> labeled;
    for (const auto& s : samples) labeled.push_back({s.image_features, *s.bias});
    auto cfg = options.regressor;
    cfg.grid = m.encoder.config().image_grid;
    cfg.hidden = m.encoder.config().dim;
    cfg.seed = options.seed + 5;
    imagescore::fine_tune(reg, labeled, cfg);
    m.regressor = std::move(reg);
  }
  m.index = make_index(out.table, out.image_scores, m.regressor, m.image_paths);
  return out;
}

}  // namespace mmdebias::orchestrator
