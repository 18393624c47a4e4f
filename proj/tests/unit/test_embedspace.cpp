#include <doctest.h>

#include <random>
#include <sstream>

#include "geometry.hpp"
#include "mmdebias/common/error.hpp"
#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/embedspace/loss.hpp"
#include "mmdebias/embedspace/neighbors.hpp"
#include "mmdebias/embedspace/table.hpp"
#include "mmdebias/embedspace/train.hpp"
#include "oracles.hpp"

using namespace mmdebias;
using namespace mmdebias::embedspace;
using Vec = std::vector<double>;

namespace {

LossConfig cfg(double alpha = 45.0, bool hinge = true) {
  LossConfig c;
  c.alpha_degrees = alpha;
  c.hinge = hinge;
  return c;
}

EmbeddingVector ev(Vec v) { return {std::move(v), Modality::image}; }

// Negative placed near the centroid so the raw loss is clearly positive.
struct Triple {
  Vec a, p, n;
};
Triple active_triple(std::mt19937_64& g, std::size_t d) {
  for (;;) {
    Triple t{oracle::random_vector(g, d), oracle::random_vector(g, d), oracle::random_vector(g, d, 0.1)};
    for (std::size_t i = 0; i < d; ++i) t.n[i] += 0.5 * (t.a[i] + t.p[i]);
    if (oracle::angular(t.a, t.p, t.n, 45.0, false) > 0.05) return t;
  }
}

std::vector<SpaceSample> small_corpus(const DualEncoder& enc, std::uint64_t seed, std::size_t per_cell = 3) {
  std::vector<SpaceSample> out;
  for (const auto& d : synth::geometry_corpus(per_cell, seed))
    out.push_back({d.id, d.text, enc.image_featurize(d.image), d.bias});
  return out;
}

DualEncoder fresh_encoder(std::uint64_t seed = 1) {
  DualEncoder enc(DualEncoder::Config{});
  Rng rng(seed);
  enc.init(rng);
  return enc;
}

}  // namespace

TEST_CASE("angular loss worked cases") {
  CHECK(angular_loss(Vec{1, 0}, Vec{1, 0}, Vec{5, 5}, cfg()) == 0.0);
  CHECK(angular_loss(Vec{1, 0}, Vec{1, 0}, Vec{5, 5}, cfg(45, false)) == doctest::Approx(-164.0).epsilon(1e-12));
  CHECK(angular_loss(Vec{1, 0}, Vec{0, 1}, Vec{0.5, 0.5}, cfg()) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(angular_loss(Vec{1, 0}, Vec{0, 1}, Vec{0, 0}, cfg()) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("angular loss matches the scalar oracle") {
  std::mt19937_64 g(101);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t d = 2 + g() % 127;
    auto a = oracle::random_vector(g, d), p = oracle::random_vector(g, d), n = oracle::random_vector(g, d);
    double alpha = 5.0 + static_cast<double>(g() % 80);
    bool hinge = trial % 3 != 0;
    double want = oracle::angular(a, p, n, alpha, hinge);
    double got = angular_loss(a, p, n, cfg(alpha, hinge));
    CHECK(std::abs(got - want) <= 1e-9 * std::max(1.0, std::abs(want)));
    CHECK(bias_angular_loss(ev(a), ev(p), ev(n), cfg(alpha, hinge)) == got);
    CHECK(angular_loss(ev(a), ev(p), ev(n), cfg(alpha, hinge)) == got);
  }
}

TEST_CASE("bias loss vanishes when the bias positive is the anchor") {
  std::mt19937_64 g(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = oracle::random_vector(g, 8), n = oracle::random_vector(g, 8);
    CHECK(bias_angular_loss(ev(a), ev(a), ev(n), cfg()) == 0.0);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  std::mt19937_64 g(7);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t d = 2 + g() % 20;
    auto t = active_triple(g, d);
    auto grad = angular_loss_gradient(t.a, t.p, t.n, cfg());
    CHECK(grad.loss == doctest::Approx(oracle::angular(t.a, t.p, t.n, 45.0)).epsilon(1e-12));
    auto fa = oracle::finite_difference([&](const Vec& x) { return oracle::angular(x, t.p, t.n, 45.0); }, t.a);
    auto fp = oracle::finite_difference([&](const Vec& x) { return oracle::angular(t.a, x, t.n, 45.0); }, t.p);
    auto fn = oracle::finite_difference([&](const Vec& x) { return oracle::angular(t.a, t.p, x, 45.0); }, t.n);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(oracle::relative_error(grad.anchor[i], fa[i]) < 1e-4);
      CHECK(oracle::relative_error(grad.positive[i], fp[i]) < 1e-4);
      CHECK(oracle::relative_error(grad.negative[i], fn[i]) < 1e-4);
    }
  }
}

TEST_CASE("hinged triples have exactly zero gradient") {
  std::mt19937_64 g(8);
  int hinged = 0;
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t d = 2 + g() % 20;
    auto a = oracle::random_vector(g, d), p = oracle::random_vector(g, d), n = oracle::random_vector(g, d, 4.0);
    if (oracle::angular(a, p, n, 45.0, false) >= 0) continue;
    ++hinged;
    auto grad = angular_loss_gradient(a, p, n, cfg());
    CHECK(grad.loss == 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      CHECK(grad.anchor[i] == 0.0);
      CHECK(grad.positive[i] == 0.0);
      CHECK(grad.negative[i] == 0.0);
    }
  }
  CHECK(hinged > 50);
}

TEST_CASE("loss properties") {
  std::mt19937_64 g(9);
  for (int trial = 0; trial < 500; ++trial) {
    std::size_t d = 2 + g() % 30;
    auto a = oracle::random_vector(g, d), p = oracle::random_vector(g, d), n = oracle::random_vector(g, d);
    double base = angular_loss(a, p, n, cfg());
    CHECK(base >= 0.0);

    auto shift = oracle::random_vector(g, d, 3.0);
    Vec a2 = a, p2 = p, n2 = n;
    for (std::size_t i = 0; i < d; ++i) {
      a2[i] += shift[i];
      p2[i] += shift[i];
      n2[i] += shift[i];
    }
    CHECK(angular_loss(a2, p2, n2, cfg()) == doctest::Approx(base).epsilon(1e-9).scale(1.0));
    CHECK(bias_angular_loss(ev(a2), ev(p2), ev(n2), cfg()) == doctest::Approx(base).epsilon(1e-9).scale(1.0));
    CHECK(angular_loss(p, a, n, cfg()) == doctest::Approx(base).epsilon(1e-12).scale(1.0));

    double prev = angular_loss(a, p, n, cfg(1.0, false));
    for (double alpha = 5.0; alpha < 90.0; alpha += 7.0) {
      double cur = angular_loss(a, p, n, cfg(alpha, false));
      CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("loss below the boundary is zero") {
  std::mt19937_64 g(10);
  for (int trial = 0; trial < 300; ++trial) {
    auto a = oracle::random_vector(g, 5), p = oracle::random_vector(g, 5), n = oracle::random_vector(g, 5);
    if (oracle::angular(a, p, n, 45.0, false) <= 0) CHECK(angular_loss(a, p, n, cfg()) == 0.0);
  }
}

TEST_CASE("loss input validation") {
  CHECK_THROWS_AS(angular_loss(Vec{1, 0}, Vec{1}, Vec{0, 0}, cfg()), ValidationError);
  CHECK_THROWS_AS(angular_loss(Vec{}, Vec{}, Vec{}, cfg()), ValidationError);
  CHECK_THROWS_AS(cfg(90.0).validate(), ValidationError);
  CHECK_THROWS_AS(cfg(0.0).validate(), ValidationError);
  CHECK(parse_modality("text") == Modality::text);
  CHECK(modality_name(Modality::image) == "image");
  CHECK_THROWS_AS(parse_modality("audio"), ValidationError);
}

TEST_CASE("semantic neighbor examples") {
  VectorMap ref{{"a", {0.0}}, {"b", {1.0}}, {"c", {5.0}}};
  CHECK(semantic_neighbors("a", ref, 1).neighbor_ids == std::vector<std::string>{"b"});
  CHECK(semantic_neighbors("a", ref, 10).neighbor_ids == std::vector<std::string>{"b", "c"});
  VectorMap tie{{"m", {0.0}}, {"z", {1.0}}, {"y", {-1.0}}};
  CHECK(semantic_neighbors("m", tie, 1).neighbor_ids == std::vector<std::string>{"y"});
  CHECK_THROWS_AS(semantic_neighbors("q", ref, 1), NotFoundError);
}

TEST_CASE("semantic neighbors agree with brute force") {
  std::mt19937_64 g(12);
  for (int trial = 0; trial < 50; ++trial) {
    VectorMap ref;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> ids;
    for (int i = 0; i < 40; ++i) {
      Vec v;
      for (int k = 0; k < 3; ++k) v.push_back(static_cast<double>(g() % 4));
      std::string id = "d" + std::to_string(i);
      ref[id] = v;
      rows.push_back(v);
      ids.push_back(id);
    }
    std::size_t anchor = g() % 40;
    std::vector<std::vector<double>> others;
    std::vector<std::string> other_ids;
    for (std::size_t i = 0; i < 40; ++i)
      if (i != anchor) {
        others.push_back(rows[i]);
        other_ids.push_back(ids[i]);
      }
    std::size_t k = 1 + g() % 10;
    auto want = oracle::brute_force_nearest(others, other_ids, rows[anchor], k);
    auto got = semantic_neighbors(ids[anchor], ref, k).neighbor_ids;
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < k; ++i) CHECK(got[i] == want[i].id);
  }
}

TEST_CASE("bias neighborhood examples") {
  ScoreMap s{{"x", 0.5}, {"a", 0.45}, {"b", 0.62}, {"c", -0.5}};
  CHECK(bias_neighborhood("x", s).member_ids == std::vector<std::string>{"a"});
  ScoreMap edge{{"x", 0.95}, {"top", 1.0}};
  CHECK(bias_neighborhood("x", edge).member_ids == std::vector<std::string>{"top"});
  ScoreMap exact{{"x", 0.3}, {"same", 0.3}, {"near", 0.30001}};
  CHECK(bias_neighborhood("x", exact, 0.0).member_ids == std::vector<std::string>{"same"});
  CHECK_THROWS_AS(bias_neighborhood("nope", s), NotFoundError);
}

TEST_CASE("bias neighborhood is exactly the band predicate") {
  std::mt19937_64 g(13);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 200; ++trial) {
    ScoreMap s;
    std::size_t n = 2 + g() % 30;
    for (std::size_t i = 0; i < n; ++i) s["i" + std::to_string(i)] = std::round(u(g) * 20) / 20;
    double eps = static_cast<double>(g() % 5) / 20;
    std::string anchor = "i" + std::to_string(g() % n);
    std::vector<std::string> want;
    for (const auto& [id, v] : s)
      if (id != anchor && std::abs(v - s[anchor]) <= eps) want.push_back(id);
    CHECK(bias_neighborhood(anchor, s, eps).member_ids == want);

    std::vector<double> scores;
    std::vector<std::string> order;
    for (const auto& [id, v] : s) {
      scores.push_back(v);
      order.push_back(id);
    }
    std::size_t ai = static_cast<std::size_t>(std::find(order.begin(), order.end(), anchor) - order.begin());
    std::vector<std::string> by_index;
    for (auto i : bias_neighbor_indices(ai, scores, eps)) by_index.push_back(order[i]);
    CHECK(by_index == want);
  }
}

TEST_CASE("samplers") {
  SemanticNeighborhood one{"a", {"b"}, 1};
  Rng rng(1);
  CHECK(sample_positive(one, rng) == "b");
  SemanticNeighborhood many{"a", {"b", "c", "d", "e"}, 4};
  Rng r1(5), r2(5);
  for (int i = 0; i < 20; ++i) CHECK(sample_positive(many, r1) == sample_positive(many, r2));
  CHECK_THROWS_AS(sample_positive(SemanticNeighborhood{"a", {}, 1}, rng), SamplingError);

  BiasNeighborhood b{"a", 0.1, {"z"}};
  CHECK(sample_bias_positive("a", b, rng) == "z");
  CHECK_THROWS_AS(sample_bias_positive("a", BiasNeighborhood{"a", 0.1, {}}, rng), SamplingError);
}

TEST_CASE("zero bias weight contributes nothing") {
  auto enc = fresh_encoder();
  auto samples = small_corpus(enc, 2);
  SpaceConfig c;
  c.loss.bias_weight = 0.0;
  c.neighbors = 5;
  auto space = train_space(samples, enc, BowProjectionEmbedder{}, c, 3, 1);
  REQUIRE_FALSE(space.history.steps.empty());
  for (const auto& s : space.history.steps) {
    CHECK(s.bias == 0.0);
    CHECK(s.objective == s.semantic);
  }
}

TEST_CASE("zero epochs leaves the towers untouched") {
  auto enc = fresh_encoder();
  auto samples = small_corpus(enc, 2);
  SpaceConfig c;
  c.neighbors = 5;
  auto space = train_space(samples, enc, BowProjectionEmbedder{}, c, 0, 1);
  auto expected = build_table(enc, samples);
  REQUIRE(space.table.size() == expected.size());
  for (const auto& e : expected.entries()) {
    const auto* got = space.table.find(e.id, e.vector.modality);
    REQUIRE(got != nullptr);
    CHECK(got->values == e.vector.values);
  }
}

TEST_CASE("space training is deterministic and normalizes the table") {
  auto enc = fresh_encoder();
  auto samples = small_corpus(enc, 3);
  SpaceConfig c;
  c.neighbors = 5;
  auto a = train_space(samples, enc, BowProjectionEmbedder{}, c, 3, 9);
  auto b = train_space(samples, enc, BowProjectionEmbedder{}, c, 3, 9);
  CHECK(a.encoder.to_json() == b.encoder.to_json());
  CHECK(a.table.count(Modality::text) == samples.size());
  CHECK(a.table.count(Modality::image) == samples.size());
  for (const auto& e : a.table.entries()) {
    double norm = 0;
    for (double x : e.vector.values) norm += x * x;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(a.history.epoch_objective.size() == 3);
}

TEST_CASE("training rejects unscored or out-of-range images up front") {
  auto enc = fresh_encoder();
  auto samples = small_corpus(enc, 2);
  SpaceConfig c;
  c.neighbors = 5;
  auto unscored = samples;
  unscored.back().bias.reset();
  CHECK_THROWS_AS(train_space(unscored, enc, BowProjectionEmbedder{}, c, 1, 1), ValidationError);
  auto wide = samples;
  wide.front().bias = 1.5;
  CHECK_THROWS_AS(train_space(wide, enc, BowProjectionEmbedder{}, c, 1, 1), ValidationError);
  CHECK_THROWS_AS(train_space({}, enc, BowProjectionEmbedder{}, c, 1, 1), ValidationError);
}

TEST_CASE("the bias term separates bands within each topic") {
  auto run = testutil::geometry_ablation(4);
  for (int t = 0; t < 2; ++t) {
    CHECK(run.weighted.intra[t] < run.weighted.inter[t]);
    CHECK(run.weighted.relative(t) >= 0.1);
    CHECK(run.unweighted.relative(t) < 0.5 * run.weighted.relative(t));
  }
}

TEST_CASE("embedding tables round trip through text") {
  EmbeddingTable t(3);
  t.add("a", {{0.1, 0.2, 0.3}, Modality::text});
  t.add("a", {{1, 0, 0}, Modality::image});
  t.add("b", {{-1, 0.5, 0.25}, Modality::image});
  CHECK_THROWS_AS(t.add("a", {{1, 0, 0}, Modality::image}), ValidationError);
  CHECK_THROWS_AS(t.add("c", {{1, 0}, Modality::image}), ValidationError);
  std::stringstream ss;
  t.write(ss);
  auto back = EmbeddingTable::read(ss);
  CHECK(back.size() == 3);
  CHECK(back.count(Modality::image) == 2);
  CHECK(back.find("b", Modality::image)->values == Vec{-1, 0.5, 0.25});
  CHECK(back.find("b", Modality::text) == nullptr);

  std::stringstream bad("mmdebias-embeddings 2 3 image\nx\timage\t1 2 3\n");
  CHECK_THROWS_AS(EmbeddingTable::read(bad), ParseError);
  std::stringstream short_row("mmdebias-embeddings 1 3 image\nx\timage\t1 2\n");
  CHECK_THROWS_AS(EmbeddingTable::read(short_row), ParseError);

  auto stats = table_stats(t);
  CHECK(stats.image == 2);
  CHECK(stats.text == 1);
  CHECK(stats.mean_image_distance > 0);
}

TEST_CASE("dual encoders round trip") {
  testutil::TempDir dir;
  auto enc = fresh_encoder(4);
  enc.save(dir / "enc.json");
  auto back = DualEncoder::load(dir / "enc.json");
  CHECK(back.embed_text("the budget vote") == enc.embed_text("the budget vote"));
  Rng rng(2);
  auto img = synth::topic_band_image(1, 0, rng);
  CHECK(back.embed_image(img) == enc.embed_image(img));
  CHECK_THROWS_AS(DualEncoder::load(dir / "missing.json"), IoError);
}

TEST_CASE("document embedder preserves word overlap") {
  BowProjectionEmbedder e;
  auto a = e.embed("budget taxes trade tariffs");
  auto b = e.embed("budget taxes trade wages");
  auto c = e.embed("climate emissions solar wind");
  auto dist = [](const Vec& x, const Vec& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return s;
  };
  CHECK(dist(a, b) < dist(a, c));
  CHECK(e.embed("budget taxes") == e.embed("budget taxes"));
}
