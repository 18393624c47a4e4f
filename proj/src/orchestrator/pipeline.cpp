#include "mmdebias/orchestrator/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <functional>

#include "mmdebias/common/log.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/embedspace/table.hpp"
#include "mmdebias/kernels/kernels.hpp"

namespace mmdebias::orchestrator {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestFormat = "mmdebias/models";

fs::path resolve(const fs::path& base, const fs::path& p) { return p.is_relative() && !base.empty() ? base / p : p; }

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

template <typename F>
auto run_stage(const std::string& stage, std::vector<TraceEntry>& trace, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    trace.push_back({stage, "failed", e.what()});
    throw PipelineError(stage, e.what(), trace);
  }
}

}  // namespace

std::shared_ptr<const retrieval::RetrievalIndex> make_index(
    const embedspace::EmbeddingTable& table, const corpus::ScoreTable& image_scores,
    const std::optional<imagescore::BiasRegressor>& regressor,
    const std::map<std::string, fs::path, std::less<>>& image_paths) {
  embedspace::ScoreMap scores(image_scores.begin(), image_scores.end());
  retrieval::BiasEstimator estimator;
  if (regressor) {
    estimator = [model = *regressor, image_paths](const std::string& id) {
      auto it = image_paths.find(id);
      if (it == image_paths.end()) throw NotFoundError("no image file for '" + id + "'");
      return imagescore::predict_bias(model, it->second);
    };
  }
  return std::make_shared<const retrieval::RetrievalIndex>(retrieval::RetrievalIndex::build(table, scores, estimator));
}

void StageModels::save(const fs::path& dir, const embedspace::EmbeddingTable& table,
                       const corpus::ScoreTable& image_scores) const {
  fs::create_directories(dir);
  tagger.save(dir / "tagger.json");
  infill.save(dir / "infill.json");
  encoder.save(dir / "encoders.json");
  table.save(dir / "embeddings.tsv");
  corpus::save_score_table(dir / "scores.tsv", image_scores);
  if (regressor) regressor->save(dir / "regressor.json");
  std::ofstream images(dir / "images.tsv");
  if (!images) throw IoError("cannot write " + (dir / "images.tsv").string());
  for (const auto& [id, path] : image_paths) images << id << '\t' << fs::absolute(path).string() << '\n';

  nlohmann::json m = {{"format", kManifestFormat},
                      {"version", 1},
                      {"tagger", "tagger.json"},
                      {"infill", "infill.json"},
                      {"image_tokenizer", image_tokenizer.to_json()},
                      {"encoders", "encoders.json"},
                      {"embeddings", "embeddings.tsv"},
                      {"scores", "scores.tsv"},
                      {"images", "images.tsv"},
                      {"mask_threshold", options.mask.threshold},
                      {"mask_fallback_top1", options.mask.fallback_top1},
                      {"retrieve_k", options.retrieve_k},
                      {"guard", options.guard}};
  if (regressor) m["regressor"] = "regressor.json";
  write_json(dir / "manifest.json", m);
}

StageModels StageModels::load(const fs::path& dir) {
  auto m = read_json(dir / "manifest.json");
  if (m.value("format", "") != kManifestFormat) throw ParseError("not a model manifest: " + (dir / "manifest.json").string());
  StageModels s;
  try {
    s.tagger = textbias::TaggerModel::load(dir / m.at("tagger").get<std::string>());
    s.infill = neutralize::InfillModel::load(dir / m.at("infill").get<std::string>());
    s.image_tokenizer = neutralize::PatchGridTokenizer::from_json(m.at("image_tokenizer"));
    s.encoder = embedspace::DualEncoder::load(dir / m.at("encoders").get<std::string>());
    if (m.contains("regressor")) s.regressor = imagescore::BiasRegressor::load(dir / m.at("regressor").get<std::string>());
    s.options.mask.threshold = m.at("mask_threshold").get<double>();
    s.options.mask.fallback_top1 = m.at("mask_fallback_top1").get<bool>();
    s.options.retrieve_k = m.at("retrieve_k").get<std::size_t>();
    s.options.guard = m.at("guard").get<bool>();

    std::ifstream images(dir / m.at("images").get<std::string>());
    if (!images) throw IoError("cannot read image list in " + dir.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(images, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError("expected id and path", lineno);
      s.image_paths[line.substr(0, tab)] = resolve(dir, line.substr(tab + 1));
    }
    auto table = embedspace::EmbeddingTable::load(dir / m.at("embeddings").get<std::string>());
    auto scores = corpus::load_score_table(dir / m.at("scores").get<std::string>());
    s.index = make_index(table, scores, s.regressor, s.image_paths);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("model manifest: " + std::string(e.what()));
  }
  return s;
}

DebiasedArticle debias_article(const corpus::Article& article, const StageModels& models, const fs::path& image_base) {
  DebiasedArticle out;
  out.original = article;
  out.original_image_bias = article.source_score.value();
  auto& trace = out.trace;

  fs::path image_path;
  if (!article.image_ref.empty()) image_path = resolve(image_base, article.image_ref);
  bool image_present = !image_path.empty() && fs::exists(image_path);

  auto sentences = text::split_sentences(article.text);
  out.detections = run_stage("detect", trace, [&] {
    if (sentences.empty()) throw ValidationError("article has no text");
    std::vector<std::vector<textbias::TokenBias>> d;
    for (const auto& s : sentences) d.push_back(textbias::predict_token_bias(models.tagger, s));
    return d;
  });
  trace.push_back({"detect", "ok", std::to_string(sentences.size()) + " sentences"});

  out.neutralized_text = run_stage("neutralize", trace, [&] {
    auto image_tokens = neutralize::encode_image_tokens(image_path, models.image_tokenizer);
    std::vector<std::string> rewritten;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      auto tokens = models.infill.tokenizer().tokenize(sentences[i]);
      auto masked = neutralize::mask_biased(tokens, out.detections[i], models.options.mask);
      auto reps = neutralize::predict_replacements(models.infill, masked, image_tokens.tokens);
      for (const auto& r : reps) out.replacements.push_back({i, r});
      rewritten.push_back(textbias::detokenize(neutralize::apply_replacements(masked, reps)));
    }
    return text::join(rewritten, " ");
  });
  trace.push_back({"neutralize", "ok", std::to_string(out.replacements.size()) + " replacements"});

  auto query = run_stage("embed", trace, [&] { return models.encoder.embed_text(out.neutralized_text); });
  trace.push_back({"embed", "ok", "dim " + std::to_string(query.size())});

  out.image = run_stage("retrieve", trace, [&] {
    ImageDecision d;
    if (!models.index) throw StateError("no retrieval index loaded");
    if (!image_present) {
      d.cause = article.image_ref.empty() ? "missing image: article has no image reference"
                                          : "missing image: " + image_path.string() + " not found";
      return d;
    }
    d.original_image_path = image_path.string();
    retrieval::SelectOptions opts;
    opts.guard = models.options.guard;
    if (auto own = models.index->find(article.id)) {
      auto q = embedspace::l2_normalized(query);
      std::vector<double> dist(1);
      kernels::serial::sq_distances(models.index->vector(*own), q.size(), q, dist);
      opts.original_distance = std::sqrt(dist[0]);
    }
    auto sel = retrieval::select_replacement(*models.index, query, out.original_image_bias, models.options.retrieve_k,
                                             opts, out.neutralized_text);
    d.keep_original = sel.keep_original;
    d.replacement = sel.replacement;
    d.cause = sel.reason;
    if (d.replacement) {
      auto p = models.image_paths.find(d.replacement->image_id);
      if (p != models.image_paths.end()) d.replacement_image_path = p->second.string();
    }
    return d;
  });
  trace.push_back({"retrieve", "ok", out.image.keep_original ? "keep original: " + out.image.cause
                                                             : "replaced with " + out.image.replacement->image_id});
  return out;
}

std::vector<BatchOutcome> debias_batch(const std::vector<corpus::Article>& articles, const StageModels& models,
                                       const fs::path& image_base) {
  std::vector<BatchOutcome> out(articles.size());
  const auto n = static_cast<std::ptrdiff_t>(articles.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    auto& slot = out[static_cast<std::size_t>(i)];
    try {
      slot.result = debias_article(articles[static_cast<std::size_t>(i)], models, image_base);
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }
  return out;
}

nlohmann::json to_json(const DebiasedArticle& d) {
  nlohmann::json reps = nlohmann::json::array();
  for (const auto& e : d.replacements)
    reps.push_back({{"sentence", e.sentence},
                    {"position", e.replacement.position},
                    {"original", e.replacement.original},
                    {"predicted", e.replacement.predicted},
                    {"score", e.replacement.score}});
  nlohmann::json det = nlohmann::json::array();
  for (const auto& s : d.detections) {
    nlohmann::json words = nlohmann::json::array();
    for (const auto& t : s) words.push_back({{"token", t.token}, {"probability", t.probability}});
    det.push_back(words);
  }
  nlohmann::json image = {{"keep_original", d.image.keep_original},
                          {"cause", d.image.cause},
                          {"original_image_path", d.image.original_image_path}};
  if (d.image.replacement) {
    const auto& r = *d.image.replacement;
    image["replacement"] = {{"image_id", r.image_id},
                            {"distance", r.distance},
                            {"image_bias", r.image_bias},
                            {"provenance", std::string(retrieval::provenance_name(r.provenance))},
                            {"path", d.image.replacement_image_path}};
  } else {
    image["replacement"] = nullptr;
  }
  nlohmann::json trace = nlohmann::json::array();
  for (const auto& t : d.trace) trace.push_back({{"stage", t.stage}, {"status", t.status}, {"detail", t.detail}});
  return {{"id", d.original.id},
          {"original", nlohmann::json::parse(corpus::serialize_article(d.original))},
          {"neutralized_text", d.neutralized_text},
          {"detections", det},
          {"replacements", reps},
          {"original_image_bias", d.original_image_bias},
          {"image", image},
          {"trace", trace}};
}

}  // namespace mmdebias::orchestrator
