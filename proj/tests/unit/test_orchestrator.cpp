#include <doctest.h>

#include <fstream>
#include <random>
#include <set>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"
#include "mmdebias/orchestrator/judgments.hpp"
#include "mmdebias/orchestrator/pipeline.hpp"
#include "pipeline_fixture.hpp"

using namespace mmdebias;
using namespace mmdebias::orchestrator;

namespace {

std::string normalized(const std::string& s) {
  std::vector<std::string> words;
  for (const auto& sentence : text::split_sentences(s))
    for (const auto& t : textbias::tokenize(sentence)) words.push_back(t.text);
  return text::join(words);
}

std::vector<std::string> stages(const std::vector<TraceEntry>& trace) {
  std::vector<std::string> out;
  for (const auto& t : trace) out.push_back(t.stage);
  return out;
}

JudgmentRecord judgment(std::string pair, std::string grader, bool yes, int fluency) {
  return {std::move(pair), std::move(grader), yes, yes, !yes, fluency, "2026-01-01T00:00:00Z"};
}

void require_same(const DebiasedArticle& a, const DebiasedArticle& b) {
  CHECK(to_json(a) == to_json(b));
}

}  // namespace

TEST_CASE("planted articles are neutralized without raising image bias") {
  const auto& fx = testutil::trained_fixture();
  std::size_t changed = 0;
  for (const auto& article : fx.data.articles) {
    auto d = debias_article(article, fx.bundle.models, fx.dir.path());
    CHECK(stages(d.trace) == std::vector<std::string>{"detect", "neutralize", "embed", "retrieve"});
    for (const auto& t : d.trace) CHECK(t.status == "ok");
    changed += normalized(d.neutralized_text) != normalized(article.text);
    CHECK_FALSE(d.replacements.empty());
    CHECK(d.original_image_bias == article.source_score.value());
    if (!d.image.keep_original) {
      REQUIRE(d.image.replacement.has_value());
      CHECK(std::abs(d.image.replacement->image_bias) <= std::abs(d.original_image_bias));
      CHECK_FALSE(d.image.replacement_image_path.empty());
    }
    for (const auto& e : d.replacements) CHECK(e.replacement.predicted != textbias::kMask);
  }
  CHECK(changed == fx.data.articles.size());
}

TEST_CASE("a sentence with nothing above the threshold gets one fallback replacement") {
  const auto& fx = testutil::trained_fixture();
  corpus::Article a = fx.data.articles.front();
  a.id = "plain";
  a.text = "the debate over budget continues";
  auto d = debias_article(a, fx.bundle.models, fx.dir.path());
  REQUIRE(d.detections.size() == 1);
  double top = 0;
  for (const auto& w : d.detections[0]) top = std::max(top, w.probability);
  REQUIRE(top <= fx.bundle.models.options.mask.threshold);
  auto top_word = textbias::top_k(d.detections[0], 1)[0];
  auto pieces = fx.bundle.models.infill.tokenizer().tokenize_words({d.detections[0][top_word].token});
  REQUIRE(pieces.size() == 1);
  CHECK(d.replacements.size() == 1);
}

TEST_CASE("a missing image keeps the text path and reports the cause") {
  const auto& fx = testutil::trained_fixture();
  corpus::Article a = fx.data.articles[3];
  a.image_ref = "images/does-not-exist.ppm";
  auto d = debias_article(a, fx.bundle.models, fx.dir.path());
  CHECK(d.image.keep_original);
  CHECK(d.image.cause.starts_with("missing image"));
  CHECK(normalized(d.neutralized_text) != normalized(a.text));

  a.image_ref.clear();
  auto none = debias_article(a, fx.bundle.models, fx.dir.path());
  CHECK(none.image.keep_original);
  CHECK(none.image.cause.starts_with("missing image"));
}

TEST_CASE("stage failures carry the stage name and the completed trace") {
  const auto& fx = testutil::trained_fixture();
  auto models = fx.bundle.models;
  models.index.reset();
  try {
    debias_article(fx.data.articles[0], models, fx.dir.path());
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "retrieve");
    CHECK(stages(e.trace()) == std::vector<std::string>{"detect", "neutralize", "embed", "retrieve"});
    CHECK(e.trace().back().status == "failed");
  }

  corpus::Article empty = fx.data.articles[0];
  empty.text = "   ";
  try {
    debias_article(empty, fx.bundle.models, fx.dir.path());
    FAIL("expected a pipeline error");
  } catch (const PipelineError& e) {
    CHECK(e.stage() == "detect");
    CHECK(e.trace().size() == 1);
  }

  auto untrained = fx.bundle.models;
  untrained.infill = neutralize::InfillModel{};
  CHECK_THROWS_AS(debias_article(fx.data.articles[0], untrained, fx.dir.path()), PipelineError);
}

TEST_CASE("pipeline output is deterministic and batch equals sequential") {
  const auto& fx = testutil::trained_fixture();
  auto batch_in = fx.data.articles;
  corpus::Article broken = batch_in[1];
  broken.text = "";
  batch_in.push_back(broken);
  auto batch = debias_batch(batch_in, fx.bundle.models, fx.dir.path());
  REQUIRE(batch.size() == batch_in.size());
  for (std::size_t i = 0; i < fx.data.articles.size(); ++i) {
    REQUIRE(batch[i].result.has_value());
    require_same(*batch[i].result, debias_article(fx.data.articles[i], fx.bundle.models, fx.dir.path()));
  }
  CHECK_FALSE(batch.back().result.has_value());
  CHECK(batch.back().error.find("detect") != std::string::npos);
}

TEST_CASE("retraining from the same seed reproduces the models") {
  auto data = synth::pipeline_fixture(6, 80, 2);
  testutil::TempDir dir;
  synth::write_pipeline_fixture(dir.path(), data);
  auto opts = desk_options();
  opts.tagger.epochs = 2;
  opts.infill.epochs = 2;
  opts.space_epochs = 3;
  opts.regressor.epochs = 3;
  auto a = train_pipeline(data.articles, data.pairs, dir.path(), opts);
  auto b = train_pipeline(data.articles, data.pairs, dir.path(), opts);
  CHECK(a.models.tagger.to_json() == b.models.tagger.to_json());
  CHECK(a.models.encoder.to_json() == b.models.encoder.to_json());
  for (const auto& article : data.articles)
    require_same(debias_article(article, a.models, dir.path()), debias_article(article, b.models, dir.path()));
}

TEST_CASE("saved models reload to identical output") {
  const auto& fx = testutil::trained_fixture();
  testutil::TempDir out;
  fx.bundle.models.save(out.path(), fx.bundle.table, fx.bundle.image_scores);
  auto back = StageModels::load(out.path());
  CHECK(back.index->size() == fx.bundle.models.index->size());
  for (std::size_t i = 0; i < 5; ++i)
    require_same(debias_article(fx.data.articles[i], back, fx.dir.path()),
                 debias_article(fx.data.articles[i], fx.bundle.models, fx.dir.path()));
  CHECK_THROWS(StageModels::load(out / "nowhere"));
}

TEST_CASE("unscored indexed images are estimated by the regressor") {
  const auto& fx = testutil::trained_fixture();
  auto scores = fx.bundle.image_scores;
  std::string dropped = scores.begin()->first;
  scores.erase(scores.begin());
  auto index = make_index(fx.bundle.table, scores, fx.bundle.models.regressor, fx.bundle.models.image_paths);
  auto i = *index->find(dropped);
  CHECK(index->flagged(i));
  auto b = index->bias_of(i);
  CHECK(b.provenance == retrieval::Provenance::estimated);
  CHECK(b.value == fx.bundle.models.regressor->predict(read_netpbm(fx.bundle.models.image_paths.at(dropped))));
}

TEST_CASE("evaluation pairs are sampled without replacement") {
  const auto& fx = testutil::trained_fixture();
  std::vector<DebiasedArticle> corpus;
  for (std::size_t i = 0; i < 8; ++i) corpus.push_back(debias_article(fx.data.articles[i], fx.bundle.models, fx.dir.path()));
  auto all = sample_pairs(corpus, 8, 1);
  std::set<std::string> ids;
  for (const auto& p : all) ids.insert(p.pair_id);
  CHECK(ids.size() == 8);
  CHECK(sample_pairs(corpus, 0, 1).empty());
  auto a = sample_pairs(corpus, 3, 42), b = sample_pairs(corpus, 3, 42);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a[i].pair_id == b[i].pair_id);
  CHECK_THROWS_AS(sample_pairs(corpus, 9, 1), ValidationError);

  const auto& p = all.front();
  CHECK_FALSE(p.original_text.empty());
  CHECK_FALSE(p.debiased_text.empty());
  CHECK_FALSE(p.original_image.empty());

  testutil::TempDir dir;
  save_eval_pairs(dir / "pairs.json", all);
  auto back = load_eval_pairs(dir / "pairs.json");
  REQUIRE(back.size() == all.size());
  CHECK(to_json(back[2]) == to_json(all[2]));
}

TEST_CASE("judgment validation") {
  auto ok = judgment("p1", "g1", true, 3);
  CHECK_NOTHROW(validate(ok));
  auto bad = ok;
  bad.fluency = 6;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  bad.fluency = 0;
  CHECK_THROWS_AS(validate(bad), ValidationError);
  auto anon = ok;
  anon.grader_id.clear();
  CHECK_THROWS_AS(validate(anon), ValidationError);

  auto j = to_json(ok);
  CHECK(judgment_from_json(j) == ok);
  auto extra = j;
  extra["comment"] = "hi";
  CHECK_THROWS_AS(judgment_from_json(extra), ValidationError);
  auto missing = j;
  missing.erase("same_meaning");
  CHECK_THROWS_AS(judgment_from_json(missing), ValidationError);
  auto typed = j;
  typed["fluency"] = "three";
  CHECK_THROWS_AS(judgment_from_json(typed), ValidationError);
  auto no_time = j;
  no_time.erase("submitted_at");
  CHECK(judgment_from_json(no_time).submitted_at.empty());
  CHECK(utc_timestamp().ends_with("Z"));
}

TEST_CASE("the judgment store overwrites and survives reopening") {
  testutil::TempDir dir;
  {
    JudgmentStore store(dir / "j.jsonl");
    store.submit(judgment("p1", "g1", true, 2));
    store.submit(judgment("p1", "g1", false, 5));
    store.submit(judgment("p2", "g1", true, 4));
    CHECK(store.size() == 2);
    CHECK(store.contains("p1", "g1"));
    CHECK_FALSE(store.contains("p1", "g2"));
    CHECK_THROWS_AS(store.submit(judgment("p3", "g1", true, 7)), ValidationError);
  }
  JudgmentStore again(dir / "j.jsonl");
  CHECK(again.size() == 2);
  for (const auto& r : again.records())
    if (r.pair_id == "p1") CHECK(r.fluency == 5);
}

TEST_CASE("store size equals the number of distinct keys") {
  testutil::TempDir dir;
  std::mt19937_64 g(5);
  JudgmentStore store(dir / "j.jsonl");
  std::set<std::pair<std::string, std::string>> keys;
  for (int i = 0; i < 200; ++i) {
    std::string p = "p" + std::to_string(g() % 7), gr = "g" + std::to_string(g() % 4);
    store.submit(judgment(p, gr, g() % 2, 1 + static_cast<int>(g() % 5)));
    keys.insert({p, gr});
    CHECK(store.size() == keys.size());
  }
  JudgmentStore reopened(dir / "j.jsonl");
  CHECK(reopened.size() == keys.size());
  CHECK(reopened.records() == store.records());
}

TEST_CASE("a torn final line is ignored but earlier corruption is not") {
  testutil::TempDir dir;
  {
    JudgmentStore store(dir / "j.jsonl");
    store.submit(judgment("p1", "g1", true, 3));
  }
  { std::ofstream(dir / "j.jsonl", std::ios::app) << "{\"pair_id\": \"p2\", \"gra"; }
  {
    JudgmentStore store(dir / "j.jsonl");
    CHECK(store.size() == 1);
    store.submit(judgment("p2", "g1", true, 3));
  }
  CHECK(JudgmentStore(dir / "j.jsonl").size() == 2);

  std::ofstream(dir / "open.jsonl") << to_json(judgment("p1", "g1", true, 3)).dump();
  {
    JudgmentStore store(dir / "open.jsonl");
    store.submit(judgment("p1", "g2", true, 3));
  }
  CHECK(JudgmentStore(dir / "open.jsonl").size() == 2);

  std::ofstream(dir / "bad.jsonl") << "not json\n" << to_json(judgment("p1", "g1", true, 3)).dump() << "\n";
  CHECK_THROWS_AS(JudgmentStore(dir / "bad.jsonl"), ParseError);
}

TEST_CASE("judgment aggregation") {
  auto empty = aggregate_judgments({});
  CHECK(empty.overall.n == 0);
  CHECK_FALSE(empty.overall.mean_fluency.has_value());
  const auto j = to_json(empty);
  CHECK(j.at("n") == 0);
  CHECK(j.at("mean_fluency").is_null());
  CHECK(j.at("bias_reduced").is_null());

  auto r = aggregate_judgments({judgment("p1", "g1", true, 2), judgment("p1", "g2", true, 4)});
  CHECK(r.overall.n == 2);
  CHECK(*r.overall.makes_sense_together == 1.0);
  CHECK(*r.overall.same_meaning == 0.0);
  CHECK(*r.overall.mean_fluency == doctest::Approx(3.0));

  auto mixed = aggregate_judgments({judgment("p1", "g1", true, 5), judgment("p2", "g1", false, 1),
                                    judgment("p2", "g2", true, 3)});
  CHECK(*mixed.overall.bias_reduced == doctest::Approx(2.0 / 3.0));
  REQUIRE(mixed.per_pair.size() == 2);
  CHECK(mixed.per_pair.at("p2").n == 2);
  CHECK(*mixed.per_pair.at("p2").mean_fluency == doctest::Approx(2.0));
}
