#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/log.hpp"
#include "mmdebias/common/rng.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/corpus/corpus.hpp"
#include "mmdebias/embedspace/table.hpp"
#include "mmdebias/embedspace/train.hpp"
#include "mmdebias/imagescore/metrics.hpp"
#include "mmdebias/imagescore/regressor.hpp"
#include "mmdebias/neutralize/word_vectors.hpp"
#include "mmdebias/orchestrator/judgments.hpp"
#include "mmdebias/orchestrator/pipeline.hpp"
#include "mmdebias/orchestrator/service.hpp"
#include "mmdebias/orchestrator/train.hpp"
#include "mmdebias/retrieval/metrics.hpp"
#include "mmdebias/synth/synth.hpp"
#include "mmdebias/textbias/bands.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mmdebias;

namespace {

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

// Writes to `path`, or stdout when it is empty or "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    file_.open(path);
    if (!file_) throw IoError("cannot write " + path);
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<corpus::Article> corpus_articles(const fs::path& dir) { return corpus::load_articles(dir / "articles.jsonl"); }

std::vector<corpus::NeutralityPair> load_pairs(const fs::path& path) {
  auto loaded = corpus::load_neutrality_pairs(path);
  if (loaded.dropped) log::warn("dropped " + std::to_string(loaded.dropped) + " pairs with identical sides");
  return loaded.pairs;
}

// A space directory holds encoders.json, embeddings.tsv and scores.tsv; a full
// models directory adds a manifest, and with it regressor-estimated scores.
struct SpaceIndex {
  embedspace::DualEncoder encoder;
  std::shared_ptr<const retrieval::RetrievalIndex> index;
};

SpaceIndex load_space_index(const fs::path& dir) {
  if (fs::exists(dir / "manifest.json")) {
    auto models = orchestrator::StageModels::load(dir);
    return {models.encoder, models.index};
  }
  auto encoder = embedspace::DualEncoder::load(dir / "encoders.json");
  auto table = embedspace::EmbeddingTable::load(dir / "embeddings.tsv");
  auto scores = corpus::load_score_table(dir / "scores.tsv");
  return {encoder, std::make_shared<const retrieval::RetrievalIndex>(retrieval::RetrievalIndex::build(table, scores))};
}

json result_json(const retrieval::RetrievalResult& r) {
  return {{"image_id", r.image_id},
          {"distance", r.distance},
          {"image_bias", r.image_bias},
          {"provenance", std::string(retrieval::provenance_name(r.provenance))}};
}

void add_corpus(CLI::App& app) {
  auto* cmd = app.add_subcommand("corpus", "Article corpus checks");
  cmd->require_subcommand(1);

  auto* validate = cmd->add_subcommand("validate", "Parse a JSONL corpus and check source scores");
  static std::string path, scores;
  validate->add_option("path", path, "articles.jsonl")->required();
  validate->add_option("--scores", scores, "Score table TSV to check against");
  validate->callback([] {
    auto articles = corpus::load_articles(path);
    auto table = scores.empty() ? corpus::build_score_table(articles) : corpus::load_score_table(scores);
    corpus::check_against_table(articles, table);
    print({{"articles", articles.size()}, {"sources", table.size()}, {"valid", true}});
  });

  auto* table = cmd->add_subcommand("score-table", "Derive the per-source score table");
  static std::string table_path, out;
  table->add_option("path", table_path, "articles.jsonl")->required();
  table->add_option("--out", out, "Write the TSV here instead of stdout");
  table->callback([] {
    auto t = corpus::build_score_table(corpus::load_articles(table_path));
    if (!out.empty()) {
      corpus::save_score_table(out, t);
      return;
    }
    for (const auto& [source, score] : t) std::cout << source << '\t' << score << '\n';
  });
}

void add_textbias(CLI::App& app) {
  auto* cmd = app.add_subcommand("textbias", "Token-level bias tagger");
  cmd->require_subcommand(1);

  static auto cfg = orchestrator::desk_options().tagger;
  static std::string pairs, out;
  auto* train = cmd->add_subcommand("train", "Train a tagger on neutrality pairs");
  train->add_option("--pairs", pairs, "Pair TSV: id, biased, neutral")->required();
  train->add_option("--out", out, "Model file")->required();
  train->add_option("--hidden", cfg.hidden)->capture_default_str();
  train->add_option("--layers", cfg.layers)->capture_default_str();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--lr", cfg.learning_rate)->capture_default_str();
  train->add_option("--positive-weight", cfg.positive_weight)->capture_default_str();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  train->callback([] {
    textbias::TaggerHistory history;
    auto model = textbias::train_tagger(load_pairs(pairs), cfg, &history);
    model.save(out);
    print({{"model", out}, {"epoch_loss", history.epoch_loss}});
  });

  static std::string model, input, format = "bands";
  auto* predict = cmd->add_subcommand("predict", "Score each word of a text");
  predict->add_option("--model", model)->required();
  predict->add_option("--text", input)->required();
  predict->add_option("--format", format)->check(CLI::IsMember({"bands", "probs"}))->capture_default_str();
  predict->callback([] {
    auto m = textbias::TaggerModel::load(model);
    auto preds = textbias::predict_token_bias(m, input);
    auto bands = textbias::classify_band(preds);
    json words = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
      json w = {{"token", preds[i].token}, {"probability", preds[i].probability}};
      if (format == "bands") w["band"] = std::string(textbias::band_name(bands[i]));
      words.push_back(w);
    }
    print(words);
  });
}

void add_neutralize(CLI::App& app) {
  auto* cmd = app.add_subcommand("neutralize", "Mask and infill biased words");
  cmd->require_subcommand(1);

  static std::string models, input, image;
  auto* run = cmd->add_subcommand("run", "Neutralize one text with a trained models directory");
  run->add_option("--model", models, "Models directory from `pipeline train`")->required();
  run->add_option("--text", input)->required();
  run->add_option("--image", image, "Image conditioning the infill");
  run->callback([] {
    auto m = orchestrator::StageModels::load(models);
    neutralize::ImageTokens image_tokens{{}, true, {}};
    if (!image.empty()) image_tokens = neutralize::encode_image_tokens(image, m.image_tokenizer);
    std::vector<std::string> rewritten;
    json reps = json::array();
    for (const auto& sentence : text::split_sentences(input)) {
      auto preds = textbias::predict_token_bias(m.tagger, sentence);
      auto masked = neutralize::mask_biased(m.infill.tokenizer().tokenize(sentence), preds, m.options.mask);
      auto r = neutralize::predict_replacements(m.infill, masked, image_tokens.tokens);
      for (const auto& x : r)
        reps.push_back({{"original", x.original}, {"predicted", x.predicted}, {"score", x.score}});
      rewritten.push_back(textbias::detokenize(neutralize::apply_replacements(masked, r)));
    }
    print({{"text", text::join(rewritten, " ")}, {"replacements", reps}, {"image_used", !image_tokens.missing}});
  });

  static std::string pairs, vectors;
  auto* eval = cmd->add_subcommand("eval", "Mean cosine between original and replacement words");
  eval->add_option("--pairs", pairs, "TSV of original<TAB>predicted")->required();
  eval->add_option("--vectors", vectors, "Word-vector text file")->required();
  eval->callback([] {
    auto table = neutralize::WordVectorTable::load(vectors);
    auto r = neutralize::evaluate_neutralization(neutralize::load_word_pairs(pairs), table);
    print({{"mean_cosine", r.mean_cosine}, {"oov_count", r.oov_count}, {"n", r.n}});
  });
}

void add_space(CLI::App& app) {
  auto* cmd = app.add_subcommand("space", "Shared text-image embedding space");
  cmd->require_subcommand(1);

  static std::string corpus_dir, out;
  static embedspace::SpaceConfig cfg = orchestrator::desk_options().space;
  static std::size_t epochs = 30;
  static std::uint64_t seed = 0;
  auto* train = cmd->add_subcommand("train", "Train the dual encoder on a corpus directory");
  train->add_option("--corpus", corpus_dir, "Directory with articles.jsonl and images")->required();
  train->add_option("--alpha", cfg.loss.alpha_degrees)->capture_default_str();
  train->add_option("--epsilon", cfg.epsilon)->capture_default_str();
  train->add_option("--bias-weight", cfg.loss.bias_weight)->capture_default_str();
  train->add_option("--neighbors", cfg.neighbors)->capture_default_str();
  train->add_option("--epochs", epochs)->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--out", out)->required();
  train->callback([] {
    embedspace::DualEncoder encoder(orchestrator::desk_options().encoder);
    Rng rng(seed);
    encoder.init(rng);
    auto sc = orchestrator::space_corpus(corpus_articles(corpus_dir), corpus_dir, encoder);
    auto space = embedspace::train_space(sc.samples, encoder, embedspace::BowProjectionEmbedder{}, cfg, epochs, seed + 1);
    fs::create_directories(out);
    space.encoder.save(fs::path(out) / "encoders.json");
    space.table.save(fs::path(out) / "embeddings.tsv");
    corpus::save_score_table(fs::path(out) / "scores.tsv", sc.image_scores);
    print({{"out", out}, {"samples", sc.samples.size()}, {"epoch_objective", space.history.epoch_objective}});
  });

  static std::string table;
  static bool stats = false;
  auto* inspect = cmd->add_subcommand("inspect", "Summarize an embedding table");
  inspect->add_option("--table", table)->required();
  inspect->add_flag("--stats", stats, "Include distance statistics");
  inspect->callback([] {
    auto t = embedspace::EmbeddingTable::load(table);
    auto s = embedspace::table_stats(t);
    json j = {{"entries", t.size()}, {"text", s.text}, {"image", s.image}, {"dim", s.dim}};
    if (stats) {
      j["mean_norm"] = s.mean_norm;
      j["mean_image_distance"] = s.mean_image_distance;
    }
    print(j);
  });
}

void add_retrieve(CLI::App& app) {
  auto* cmd = app.add_subcommand("retrieve", "Nearest images for a text");
  static std::string index_dir, query;
  static std::size_t k = 5;
  cmd->add_option("--index", index_dir, "Space or models directory");
  cmd->add_option("--text", query);
  cmd->add_option("-k", k)->capture_default_str();

  static std::string eval_index, testset;
  auto* eval = cmd->add_subcommand("eval", "Average retrieved bias and neutrality gain over a test set");
  eval->add_option("--index", eval_index, "Space or models directory")->required();
  eval->add_option("--testset", testset, "TSV of text<TAB>original image bias")->required();
  eval->callback([] {
    auto si = load_space_index(eval_index);
    std::ifstream in(testset);
    if (!in) throw IoError("cannot read " + testset);
    std::vector<std::vector<double>> queries;
    std::vector<retrieval::GainSample> gains;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      auto tab = line.rfind('\t');
      if (tab == std::string::npos) throw ParseError("expected text<TAB>bias", lineno);
      double bias = 0;
      try {
        bias = std::stod(line.substr(tab + 1));
      } catch (const std::exception&) {
        throw ParseError("invalid bias", lineno);
      }
      auto q = si.encoder.embed_text(line.substr(0, tab));
      queries.push_back(q);
      gains.push_back({bias, q});
    }
    print({{"avg_bias", retrieval::avg_retrieved_bias(queries, *si.index)},
           {"avg_gain", retrieval::avg_neutrality_gain(gains, *si.index)},
           {"n", queries.size()}});
  });

  cmd->callback([cmd] {
    if (!cmd->get_subcommands().empty()) return;
    if (index_dir.empty() || query.empty()) throw CLI::ValidationError("retrieve", "--index and --text are required");
    auto si = load_space_index(index_dir);
    auto r = retrieval::nearest_images(*si.index, si.encoder.embed_text(query), k, query);
    json results = json::array();
    for (const auto& x : r.results) results.push_back(result_json(x));
    print({{"query", query}, {"results", results}, {"truncated", r.truncated}});
  });
}

void add_imagescore(CLI::App& app) {
  auto* cmd = app.add_subcommand("imagescore", "Image bias regression");
  cmd->require_subcommand(1);

  static std::string labeled, out, space;
  static imagescore::RegressorConfig cfg;
  auto* train = cmd->add_subcommand("train", "Fine-tune a regressor on labeled images");
  train->add_option("--labeled", labeled, "TSV of image path<TAB>score")->required();
  train->add_option("--out", out)->required();
  train->add_option("--space", space, "Space directory whose image tower initializes the backbone");
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--lr", cfg.lr)->capture_default_str();
  train->add_option("--seed", cfg.seed)->capture_default_str();
  train->callback([] {
    auto model = space.empty()
                     ? imagescore::BiasRegressor(cfg.grid, cfg.hidden, cfg.seed)
                     : imagescore::BiasRegressor::from_space(embedspace::DualEncoder::load(fs::path(space) / "encoders.json"),
                                                             cfg.seed);
    cfg.grid = model.grid();
    cfg.hidden = model.hidden();
    auto history = imagescore::fine_tune(model, imagescore::featurize_labeled(model, imagescore::load_labeled_images(labeled)), cfg);
    model.save(out);
    print({{"model", out}, {"train_loss", history.train_loss}, {"validation_loss", history.validation_loss}});
  });

  static std::string model, image;
  auto* predict = cmd->add_subcommand("predict", "Bias score of one image");
  predict->add_option("--model", model)->required();
  predict->add_option("--image", image)->required();
  predict->callback([] {
    print({{"image", image}, {"bias", imagescore::predict_bias(imagescore::BiasRegressor::load(model), image)}});
  });

  static std::string eval_model, eval_labeled;
  auto* eval = cmd->add_subcommand("eval", "RMSE and R2 on labeled images");
  eval->add_option("--model", eval_model)->required();
  eval->add_option("--labeled", eval_labeled)->required();
  eval->callback([] {
    auto m = imagescore::BiasRegressor::load(eval_model);
    std::vector<double> pred, truth;
    for (const auto& l : imagescore::load_labeled_images(eval_labeled)) {
      pred.push_back(imagescore::predict_bias(m, l.path));
      truth.push_back(l.score);
    }
    print(imagescore::to_json(imagescore::regression_report(pred, truth)));
  });
}

void add_pipeline(CLI::App& app) {
  auto* cmd = app.add_subcommand("pipeline", "End-to-end detect, neutralize, embed and retrieve");
  cmd->require_subcommand(1);

  static std::string corpus_dir, out;
  static std::uint64_t seed = 0;
  auto* train = cmd->add_subcommand("train", "Train every stage from a corpus directory");
  train->add_option("--corpus", corpus_dir, "Directory with articles.jsonl, pairs.tsv and images")->required();
  train->add_option("--out", out, "Models directory")->required();
  train->add_option("--seed", seed)->capture_default_str();
  train->callback([] {
    auto options = orchestrator::desk_options();
    options.seed = seed;
    auto bundle = orchestrator::train_pipeline(corpus_articles(corpus_dir), load_pairs(fs::path(corpus_dir) / "pairs.tsv"),
                                               corpus_dir, options);
    bundle.models.save(out, bundle.table, bundle.image_scores);
    print({{"models", out}, {"indexed_images", bundle.models.index->size()}});
  });

  static std::string article, models, run_out;
  auto* run = cmd->add_subcommand("run", "Debias the articles in a JSONL file");
  run->add_option("--article", article)->required();
  run->add_option("--models", models)->required();
  run->add_option("--out", run_out, "JSONL output (default stdout)");
  run->callback([] {
    auto m = orchestrator::StageModels::load(models);
    auto base = fs::path(article).parent_path();
    Output o(run_out);
    for (const auto& a : corpus::load_articles(article))
      o.stream() << orchestrator::to_json(orchestrator::debias_article(a, m, base)).dump() << '\n';
  });

  static std::string batch_corpus, batch_models, batch_out;
  auto* batch = cmd->add_subcommand("batch", "Debias a whole corpus directory in parallel");
  batch->add_option("--corpus", batch_corpus)->required();
  batch->add_option("--models", batch_models)->required();
  batch->add_option("--out", batch_out, "JSONL output (default stdout)");
  batch->callback([] {
    auto m = orchestrator::StageModels::load(batch_models);
    auto articles = corpus_articles(batch_corpus);
    auto outcomes = orchestrator::debias_batch(articles, m, batch_corpus);
    Output o(batch_out);
    std::size_t failed = 0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      if (outcomes[i].result) {
        o.stream() << orchestrator::to_json(*outcomes[i].result).dump() << '\n';
      } else {
        ++failed;
        o.stream() << json{{"id", articles[i].id}, {"error", outcomes[i].error}}.dump() << '\n';
      }
    }
    log::info(std::to_string(outcomes.size() - failed) + " articles debiased, " + std::to_string(failed) + " failed");
    if (failed) throw Error(std::to_string(failed) + " articles failed");
  });
}

void add_eval(CLI::App& app) {
  static std::string corpus_dir, models, out;
  static std::size_t n = 10;
  static std::uint64_t seed = 0;
  auto* sample = app.add_subcommand("eval-sample", "Debias a corpus and sample pairs for human review");
  sample->add_option("--corpus", corpus_dir)->required();
  sample->add_option("--models", models)->required();
  sample->add_option("-n", n)->capture_default_str();
  sample->add_option("--seed", seed)->capture_default_str();
  sample->add_option("--out", out, "Pairs JSON file")->required();
  sample->callback([] {
    auto m = orchestrator::StageModels::load(models);
    std::vector<orchestrator::DebiasedArticle> done;
    for (auto& o : orchestrator::debias_batch(corpus_articles(corpus_dir), m, corpus_dir))
      if (o.result) done.push_back(std::move(*o.result));
    auto pairs = orchestrator::sample_pairs(done, n, seed);
    orchestrator::save_eval_pairs(out, pairs);
    print({{"pairs", pairs.size()}, {"out", out}});
  });

  static std::string host = "127.0.0.1", pairs_path, store;
  static int port = 8080;
  auto* serve = app.add_subcommand("eval-serve", "Serve pairs to graders and record judgments");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--pairs", pairs_path)->required();
  serve->add_option("--store", store)->required();
  serve->callback([] {
    orchestrator::EvalService service(orchestrator::load_eval_pairs(pairs_path), store);
    int bound = service.bind(host, port);
    std::cout << "listening on http://" << host << ':' << bound << std::endl;
    service.listen();
  });

  static std::string report_store;
  auto* report = app.add_subcommand("eval-report", "Aggregate stored judgments");
  report->add_option("--store", report_store)->required();
  report->callback([] {
    if (!fs::exists(report_store)) throw IoError("no judgment store at " + report_store);
    orchestrator::JudgmentStore s(report_store);
    print(orchestrator::to_json(orchestrator::aggregate_judgments(s.records())));
  });
}

void add_synth(CLI::App& app) {
  static std::string out;
  static std::size_t articles = 20, pairs = 400;
  static std::uint64_t seed = 9;
  auto* cmd = app.add_subcommand("synth", "Write a synthetic corpus with planted bias");
  cmd->add_option("--out", out)->required();
  cmd->add_option("--articles", articles)->capture_default_str();
  cmd->add_option("--pairs", pairs)->capture_default_str();
  cmd->add_option("--seed", seed)->capture_default_str();
  cmd->callback([] {
    synth::write_pipeline_fixture(out, synth::pipeline_fixture(articles, pairs, seed));
    print({{"out", out}, {"articles", articles}, {"pairs", pairs}});
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect and neutralize political bias in news text and images"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only log errors");
  app.parse_complete_callback([&] {
    if (quiet) log::threshold() = log::Level::error;
  });

  add_corpus(app);
  add_textbias(app);
  add_neutralize(app);
  add_space(app);
  add_retrieve(app);
  add_imagescore(app);
  add_pipeline(app);
  add_eval(app);
  add_synth(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
