#include <doctest.h>

#include <algorithm>
#include <random>

#include "mmdebias/common/error.hpp"
#include "mmdebias/embedspace/encoders.hpp"
#include "mmdebias/retrieval/index.hpp"
#include "mmdebias/retrieval/metrics.hpp"
#include "oracles.hpp"

using namespace mmdebias;
using namespace mmdebias::retrieval;
using embedspace::EmbeddingTable;
using embedspace::Modality;
using embedspace::ScoreMap;
using Vec = std::vector<double>;

namespace {

EmbeddingTable table_of(const std::vector<std::pair<std::string, Vec>>& images) {
  EmbeddingTable t(images.front().second.size());
  for (const auto& [id, v] : images) t.add(id, {v, Modality::image});
  return t;
}

std::vector<std::vector<double>> rows_of(const RetrievalIndex& index) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < index.size(); ++i) rows.emplace_back(index.vector(i).begin(), index.vector(i).end());
  return rows;
}

// Angle theta on the unit circle, so distances are controlled exactly by angle.
Vec unit(double theta) { return {std::cos(theta), std::sin(theta)}; }

}  // namespace

TEST_CASE("index construction") {
  auto t = table_of({{"a", {1, 0}}, {"b", {0, 2}}, {"c", {1, 1}}});
  t.add("a", {{0.3, 0.3}, Modality::text});
  auto idx = RetrievalIndex::build(t, ScoreMap{{"a", 0.1}, {"b", -0.2}});
  CHECK(idx.size() == 3);
  CHECK(idx.dim() == 2);
  CHECK_FALSE(idx.flagged(*idx.find("a")));
  CHECK(idx.flagged(*idx.find("c")));
  CHECK_FALSE(idx.find("zzz").has_value());
  auto b = idx.vector(*idx.find("b"));
  CHECK(b[1] == doctest::Approx(1.0));

  CHECK_THROWS_AS(RetrievalIndex::build(EmbeddingTable(2), {}), ValidationError);
  EmbeddingTable text_only(2);
  text_only.add("x", {{1, 0}, Modality::text});
  CHECK_THROWS_AS(RetrievalIndex::build(text_only, {}), ValidationError);
  CHECK_THROWS_AS(RetrievalIndex::build(t, ScoreMap{{"a", 1.5}}), ValidationError);
}

TEST_CASE("unscored entries resolve through the estimator") {
  auto t = table_of({{"a", unit(0)}, {"b", unit(0.5)}});
  auto plain = RetrievalIndex::build(t, ScoreMap{{"a", 0.3}});
  CHECK(plain.bias_of(*plain.find("a")).provenance == Provenance::ground_truth);
  CHECK_THROWS_AS(plain.bias_of(*plain.find("b")), StateError);

  auto est = RetrievalIndex::build(t, ScoreMap{{"a", 0.3}}, [](const std::string&) { return -0.25; });
  auto r = nearest_images(est, unit(0.5), 2).results;
  REQUIRE(r.size() == 2);
  CHECK(r[0].image_id == "b");
  CHECK(r[0].image_bias == -0.25);
  CHECK(r[0].provenance == Provenance::estimated);
  CHECK(r[1].provenance == Provenance::ground_truth);
  CHECK(provenance_name(Provenance::estimated) == "estimated");

  auto wild = RetrievalIndex::build(t, ScoreMap{}, [](const std::string&) { return 3.0; });
  CHECK_THROWS_AS(nearest_images(wild, unit(0), 1), ValidationError);
}

TEST_CASE("self retrieval, ties and truncation") {
  auto t = table_of({{"m", unit(0.3)}, {"z", unit(1.0)}, {"b", unit(-0.4)}, {"a", unit(1.0)}});
  auto idx = RetrievalIndex::build(t, ScoreMap{{"m", 0}, {"z", 0}, {"b", 0}, {"a", 0}});
  auto self = nearest_images(idx, idx.vector(*idx.find("m")), 1, "q");
  CHECK(self.results[0].image_id == "m");
  CHECK(self.results[0].distance == 0.0);
  CHECK(self.results[0].query_text == "q");

  auto tie = nearest_images(idx, unit(1.0), 2).results;
  CHECK(tie[0].image_id == "a");
  CHECK(tie[1].image_id == "z");

  auto all = nearest_images(idx, unit(0), 10);
  CHECK(all.truncated);
  CHECK(all.results.size() == 4);
  CHECK_FALSE(nearest_images(idx, unit(0), 4).truncated);
  CHECK_THROWS_AS(nearest_images(idx, unit(0), 0), ValidationError);
  CHECK_THROWS_AS(nearest_images(idx, Vec{1, 0, 0}, 1), ValidationError);
}

TEST_CASE("nearest images equal an exhaustive scan") {
  std::mt19937_64 g(77);
  for (int round = 0; round < 3; ++round) {
    std::size_t n = round == 0 ? 1000 : 50 + g() % 500;
    std::size_t d = round == 0 ? 32 : 2 + g() % 40;
    std::vector<std::pair<std::string, Vec>> images;
    for (std::size_t i = 0; i < n; ++i) {
      Vec v = oracle::random_vector(g, d);
      // Duplicated vectors under different ids force exact distance ties.
      if (i % 10 == 9) v = images[i - 1 - g() % 5].second;
      images.emplace_back("img" + std::to_string(g() % 100000) + "_" + std::to_string(i), v);
    }
    ScoreMap scores;
    for (const auto& [id, v] : images) scores[id] = 0.0;
    auto idx = RetrievalIndex::build(table_of(images), scores);
    auto rows = rows_of(idx);
    for (int q = 0; q < 100; ++q) {
      Vec query = q % 4 == 0 ? rows[g() % n] : embedspace::l2_normalized(oracle::random_vector(g, d));
      std::size_t k = 1 + g() % 20;
      // The index compares against the normalized query, so the scan does too.
      auto want = oracle::brute_force_nearest(rows, idx.ids(), embedspace::l2_normalized(query), k);
      auto got = nearest_images(idx, query, k).results;
      REQUIRE(got.size() == want.size());
      for (std::size_t i = 0; i < k; ++i) {
        CHECK(got[i].image_id == want[i].id);
        CHECK(got[i].distance == want[i].distance);
      }
    }
  }
}

TEST_CASE("replacement selection examples") {
  auto t = table_of({{"p", unit(0.1)}, {"q", unit(0.2)}, {"r", unit(0.3)}, {"far", unit(3.0)}});
  auto idx = RetrievalIndex::build(t, ScoreMap{{"p", 0.7}, {"q", -0.1}, {"r", 0.4}, {"far", 0.0}});
  auto d = select_replacement(idx, unit(0), 0.8, 3);
  REQUIRE_FALSE(d.keep_original);
  CHECK(d.replacement->image_id == "q");

  auto guarded = select_replacement(idx, unit(0), 0.05, 3);
  CHECK(guarded.keep_original);
  CHECK_FALSE(guarded.replacement.has_value());

  auto unguarded = select_replacement(idx, unit(0), 0.05, 3, SelectOptions{false, {}});
  CHECK_FALSE(unguarded.keep_original);
  CHECK(unguarded.replacement->image_id == "q");
}

TEST_CASE("a neutral original is kept unless a neutral candidate is strictly closer") {
  auto t = table_of({{"n", unit(0.2)}, {"o", unit(0.5)}});
  auto idx = RetrievalIndex::build(t, ScoreMap{{"n", 0.0}, {"o", 0.0}});
  CHECK(select_replacement(idx, unit(0), 0.0, 2).keep_original);
  SelectOptions farther{true, 0.5};
  auto swap = select_replacement(idx, unit(0), 0.0, 2, farther);
  REQUIRE_FALSE(swap.keep_original);
  CHECK(swap.replacement->image_id == "n");
  SelectOptions same{true, nearest_images(idx, unit(0), 1).results[0].distance};
  CHECK(select_replacement(idx, unit(0), 0.0, 2, same).keep_original);
}

TEST_CASE("the guard never increases bias magnitude") {
  std::mt19937_64 g(31);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + g() % 30;
    std::vector<std::pair<std::string, Vec>> images;
    ScoreMap scores;
    for (std::size_t i = 0; i < n; ++i) {
      std::string id = "i" + std::to_string(i);
      images.emplace_back(id, oracle::random_vector(g, 4));
      scores[id] = trial % 2 ? std::round(u(g) * 4) / 4 : u(g);
    }
    auto idx = RetrievalIndex::build(table_of(images), scores);
    double original = trial % 5 == 0 ? 0.0 : u(g);
    SelectOptions opt;
    if (trial % 3 == 0) opt.original_distance = u(g) + 1.0;
    auto d = select_replacement(idx, oracle::random_vector(g, 4), original, 1 + g() % 10, opt);
    if (!d.keep_original) CHECK(std::abs(d.replacement->image_bias) <= std::abs(original));
  }
}

TEST_CASE("retrieval metric examples") {
  CHECK(avg_retrieved_bias(Vec{0.5, -0.3, 0.0}) == doctest::Approx(0.2667).epsilon(1e-4).scale(1.0));
  CHECK(avg_retrieved_bias(Vec{0.0, 0.0}) == 0.0);
  CHECK(avg_retrieved_bias(Vec{-1.0}) == 1.0);
  CHECK_THROWS_AS(avg_retrieved_bias(Vec{}), UndefinedError);

  CHECK(avg_neutrality_gain(Vec{0.8, 0.6}, Vec{0.1, 0.2}) == doctest::Approx(0.55).epsilon(1e-12));
  CHECK(avg_neutrality_gain(Vec{0.8, -0.6}, Vec{0.8, -0.6}) == 0.0);
  CHECK(avg_neutrality_gain(Vec{0.1}, Vec{-0.9}) < 0.0);
  CHECK_THROWS_AS(avg_neutrality_gain(Vec{}, Vec{}), UndefinedError);
  CHECK_THROWS_AS(avg_neutrality_gain(Vec{0.1}, Vec{}), ValidationError);
}

TEST_CASE("metrics are bounded and permutation invariant") {
  std::mt19937_64 g(44);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t n = 1 + g() % 50;
    Vec orig(n), ret(n);
    for (std::size_t i = 0; i < n; ++i) {
      orig[i] = u(g);
      ret[i] = u(g);
    }
    double bias = avg_retrieved_bias(ret), gain = avg_neutrality_gain(orig, ret);
    CHECK(bias >= 0.0);
    CHECK(bias <= 1.0);
    CHECK(gain >= -1.0);
    CHECK(gain <= 1.0);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), g);
    Vec po(n), pr(n);
    for (std::size_t i = 0; i < n; ++i) {
      po[i] = orig[perm[i]];
      pr[i] = ret[perm[i]];
    }
    CHECK(avg_retrieved_bias(pr) == doctest::Approx(bias).epsilon(1e-12));
    CHECK(avg_neutrality_gain(po, pr) == doctest::Approx(gain).epsilon(1e-12));
  }
}

TEST_CASE("index-level metrics use top-1 retrievals") {
  auto t = table_of({{"l", unit(0)}, {"r", unit(1.5)}});
  auto idx = RetrievalIndex::build(t, ScoreMap{{"l", -0.5}, {"r", 0.25}});
  std::vector<Vec> queries{unit(0.1), unit(1.4), unit(1.6)};
  CHECK(avg_retrieved_bias(queries, idx) == doctest::Approx((0.5 + 0.25 + 0.25) / 3));
  std::vector<GainSample> samples{{0.9, unit(0.1)}, {-0.25, unit(1.4)}};
  CHECK(avg_neutrality_gain(samples, idx) == doctest::Approx(((0.9 - 0.5) + (0.25 - 0.25)) / 2));
  CHECK_THROWS_AS(avg_retrieved_bias(std::vector<Vec>{}, idx), UndefinedError);
}
