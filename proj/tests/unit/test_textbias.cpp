#include <doctest.h>

#include <random>
#include <set>

#include "mmdebias/common/text.hpp"
#include "mmdebias/synth/synth.hpp"
#include "mmdebias/textbias/bands.hpp"
#include "mmdebias/textbias/labels.hpp"
#include "mmdebias/textbias/tagger.hpp"
#include "mmdebias/textbias/tokenizer.hpp"
#include "oracles.hpp"

using namespace mmdebias;
using namespace mmdebias::textbias;

namespace {

TaggerConfig tiny(std::size_t epochs, double lr = 1e-2) {
  TaggerConfig c;
  c.hidden = 32;
  c.layers = 2;
  c.learning_rate = lr;
  c.epochs = epochs;
  c.context_length = 64;
  c.window_overlap = 16;
  c.seed = 3;
  return c;
}

std::vector<TokenBias> probs(std::initializer_list<double> ps) {
  std::vector<TokenBias> out;
  std::size_t i = 0;
  for (double p : ps) out.push_back({"w" + std::to_string(i), i++, p});
  return out;
}

std::vector<std::string> names(const std::vector<BiasBand>& bands) {
  std::vector<std::string> out;
  for (auto b : bands) out.emplace_back(band_name(b));
  return out;
}

}  // namespace

TEST_CASE("word tokenization") {
  auto t = tokenize("John exposed as corrupt");
  REQUIRE(t.size() == 4);
  CHECK(t[0].text == "john");
  CHECK(t[3].text == "corrupt");
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i].word_index == i);
  CHECK(tokenize("word").size() == 1);
  CHECK_THROWS_AS(tokenize(""), ValidationError);
  CHECK_THROWS_AS(tokenize("   "), ValidationError);
}

TEST_CASE("subword tokenization keeps word indices and detokenizes") {
  Vocabulary v = Vocabulary::build({{"john", "exposed", "as", "corrupt"}}, 100);
  Tokenizer tok(v);
  auto t = tok.tokenize("John exposes   corruption");
  CHECK(detokenize(t) == "john exposes corruption");
  CHECK(word_count(t) == 3);
  CHECK(t.size() > 3);
  for (const auto& piece : t)
    if (piece.continuation) CHECK(piece.text.starts_with("##"));
  CHECK(tok.tokenize("exposed").size() == 1);
  auto forced = tok.tokenize_words({"exposed"}, {true});
  CHECK(forced.size() > 1);
  CHECK(detokenize(forced) == "exposed");
}

TEST_CASE("detokenize inverts tokenize on arbitrary text") {
  Vocabulary v = Vocabulary::build({{"the", "senator", "said"}}, 100);
  Tokenizer tok(v);
  std::mt19937_64 g(2);
  const std::string alphabet = "abcdefghij  .,!";
  for (int trial = 0; trial < 200; ++trial) {
    std::string s = "x";
    for (int k = 0; k < 20; ++k) s += alphabet[g() % alphabet.size()];
    std::vector<std::string> words;
    for (const auto& t : tokenize(s)) words.push_back(t.text);
    CHECK(detokenize(tok.tokenize(s)) == text::join(words));
  }
}

TEST_CASE("vocabulary json round trip") {
  Vocabulary v = Vocabulary::build({{"a", "bb", "ccc"}}, 10);
  auto back = Vocabulary::from_json(v.to_json());
  CHECK(back.size() == v.size());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(back.piece(static_cast<int>(i)) == v.piece(static_cast<int>(i)));
}

TEST_CASE("diff labels mark the edited token") {
  corpus::NeutralityPair p{"p", {"john", "exposed", "as", "corrupt"}, {"john", "described", "as", "corrupt"}};
  auto l = derive_diff_labels(p);
  std::vector<int> labels;
  for (const auto& t : l) labels.push_back(t.label);
  CHECK(labels == std::vector<int>{0, 1, 0, 0});

  corpus::NeutralityPair two{"p", {"a", "radical", "senator", "slammed", "it"}, {"a", "new", "senator", "criticized", "it"}};
  labels.clear();
  for (const auto& t : derive_diff_labels(two)) labels.push_back(t.label);
  CHECK(labels == std::vector<int>{0, 1, 0, 1, 0});

  corpus::NeutralityPair same{"p", {"a", "b"}, {"a", "b"}};
  CHECK_THROWS_AS(derive_diff_labels(same), ValidationError);
}

TEST_CASE("deletions and insertions still give a positive label") {
  corpus::NeutralityPair del{"p", {"he", "clearly", "lied"}, {"he", "lied"}};
  auto l = derive_diff_labels(del);
  CHECK(l[1].label == 1);
  corpus::NeutralityPair ins{"p", {"he", "lied"}, {"he", "reportedly", "lied"}};
  int positives = 0;
  for (const auto& t : derive_diff_labels(ins)) positives += t.label;
  CHECK(positives >= 1);
  corpus::NeutralityPair front{"p", {"lied"}, {"he", "lied"}};
  CHECK(derive_diff_labels(front)[0].label == 1);
}

TEST_CASE("swapping pair sides keeps at least one positive") {
  auto data = synth::planted_pairs(100, 8);
  for (const auto& p : data.pairs) {
    corpus::NeutralityPair swapped{p.id, p.neutral_tokens, p.biased_tokens};
    int a = 0, b = 0;
    for (const auto& t : derive_diff_labels(p)) a += t.label;
    for (const auto& t : derive_diff_labels(swapped)) b += t.label;
    CHECK(a >= 1);
    CHECK(b >= 1);
  }
}

TEST_CASE("band thresholds") {
  CHECK(names(classify_band(probs({0.95, 0.8, 0.6, 0.3}))) == std::vector<std::string>{"max", "mid", "low", "none"});
  CHECK(names(classify_band(probs({0.95, 0.95}))) == std::vector<std::string>{"max", "high"});
  CHECK(names(classify_band(probs({0.1, 0.1, 0.1}))) == std::vector<std::string>{"max", "none", "none"});
  CHECK(names(classify_band(probs({0.2, 0.91, 0.76, 0.51, 0.9, 0.75, 0.5}))) ==
        std::vector<std::string>{"none", "max", "mid", "low", "mid", "low", "none"});
  CHECK_THROWS_AS(classify_band({}), ValidationError);
  CHECK_THROWS_AS(classify_band(probs({1.5})), ValidationError);
}

TEST_CASE("raising a probability never lowers its band") {
  std::mt19937_64 g(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t n = 1 + g() % 6;
    std::vector<TokenBias> p;
    for (std::size_t i = 0; i < n; ++i) p.push_back({"w", i, u(g)});
    std::size_t k = g() % n;
    auto before = classify_band(p)[k];
    p[k].probability = std::min(1.0, p[k].probability + u(g) * (1.0 - p[k].probability));
    CHECK(classify_band(p)[k] >= before);
  }
}

TEST_CASE("untrained tagger refuses inference") {
  TaggerModel m;
  CHECK_FALSE(m.trained());
  CHECK_THROWS_AS(predict_token_bias(m, "some text"), StateError);
}

TEST_CASE("empty training set and invalid config are rejected") {
  CHECK_THROWS_AS(train_tagger({}, tiny(1)), ValidationError);
  auto c = tiny(1);
  c.learning_rate = -1;
  CHECK_THROWS_AS(train_tagger(synth::planted_pairs(2, 1).pairs, c), ValidationError);
}

TEST_CASE("analytic tagger gradient matches finite differences") {
  auto pairs = synth::planted_pairs(4, 2).pairs;
  auto m = train_tagger(pairs, tiny(0));
  auto seqs = make_training_sequences(pairs, m.tokenizer());
  const auto& s = seqs[0];
  auto params = m.params();
  for (auto* p : params) p->zero_grad();
  m.accumulate_gradient(s.ids, s.labels, static_cast<double>(s.ids.size()));

  std::mt19937_64 g(1);
  int checked = 0;
  for (auto* p : params) {
    for (int trial = 0; trial < 4; ++trial) {
      std::size_t i = g() % p->size();
      double keep = p->value[i];
      const double h = 1e-5;
      p->value[i] = keep + h;
      double up = m.loss({s.ids}, {s.labels});
      p->value[i] = keep - h;
      double down = m.loss({s.ids}, {s.labels});
      p->value[i] = keep;
      double numeric = (up - down) / (2 * h);
      if (std::abs(numeric) < 1e-7 && std::abs(p->grad[i]) < 1e-7) continue;
      CHECK_MESSAGE(oracle::relative_error(p->grad[i], numeric) < 1e-4, p->name << "[" << i << "]");
      ++checked;
    }
  }
  CHECK(checked > 5);
}

TEST_CASE("a single pair is memorized") {
  corpus::NeutralityPair p{"p", {"john", "exposed", "as", "corrupt"}, {"john", "described", "as", "corrupt"}};
  auto m = train_tagger({p}, tiny(60));
  auto pred = predict_token_bias(m, "john exposed as corrupt");
  REQUIRE(pred.size() == 4);
  CHECK(top_k(pred, 1) == std::vector<std::size_t>{1});
}

TEST_CASE("zero learning rate keeps the loss constant") {
  TaggerHistory h;
  auto pairs = synth::planted_pairs(40, 4).pairs;
  auto untrained = train_tagger(pairs, tiny(0, 0.0));
  auto m = train_tagger(pairs, tiny(2, 0.0), &h);
  auto before = untrained.params(), after = m.params();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i]->value == after[i]->value);
  REQUIRE(h.epoch_loss.size() == 3);
  for (double l : h.epoch_loss) CHECK(l == h.epoch_loss.front());
}

TEST_CASE("training loss is mostly non-increasing at the default learning rate") {
  auto c = tiny(12, TaggerConfig{}.learning_rate);
  TaggerHistory h;
  train_tagger(synth::planted_pairs(500, 6).pairs, c, &h);
  std::size_t ok = 0, total = 0;
  for (std::size_t i = 1; i < h.epoch_loss.size(); ++i, ++total) ok += h.epoch_loss[i] <= h.epoch_loss[i - 1];
  CHECK(static_cast<double>(ok) >= 0.9 * static_cast<double>(total));
  CHECK(h.epoch_loss.back() < h.epoch_loss.front());
}

TEST_CASE("planted biased words are recovered on held-out pairs") {
  auto data = synth::planted_pairs(500, 11);
  std::vector<corpus::NeutralityPair> train(data.pairs.begin(), data.pairs.begin() + 400);
  auto m = train_tagger(train, tiny(8));
  std::size_t hit = 0, total = 0;
  for (std::size_t i = 400; i < 500; ++i) {
    auto pred = predict_token_bias(m, text::join(data.pairs[i].biased_tokens));
    auto top = top_k(pred, 5);
    for (auto w : data.planted[i]) {
      ++total;
      hit += std::find(top.begin(), top.end(), w) != top.end();
    }
  }
  CHECK(static_cast<double>(hit) / static_cast<double>(total) >= 0.8);

  auto pred = predict_token_bias(m, "john mccain exposed as an unprincipled politician");
  auto top = top_k(pred, 5);
  CHECK(std::find(top.begin(), top.end(), 2u) != top.end());
}

TEST_CASE("inference contracts") {
  auto m = train_tagger(synth::planted_pairs(60, 5).pairs, tiny(3));
  auto a = predict_token_bias(m, "the senator slammed the plan, again!");
  auto b = predict_token_bias(m, "the senator slammed the plan, again!");
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == tokenize("the senator slammed the plan, again!").size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].probability == b[i].probability);
    CHECK(a[i].index == i);
    CHECK(a[i].probability >= 0.0);
    CHECK(a[i].probability <= 1.0);
  }
  auto one = predict_token_bias(m, "hello");
  REQUIRE(one.size() == 1);
  CHECK(top_k(one, 1) == std::vector<std::size_t>{0});

  auto top1 = top_k(a, 1), top5 = top_k(a, 5);
  CHECK(std::find(top5.begin(), top5.end(), top1[0]) != top5.end());
}

TEST_CASE("long inputs are windowed rather than truncated") {
  auto c = tiny(3);
  c.context_length = 8;
  c.window_overlap = 3;
  auto m = train_tagger(synth::planted_pairs(60, 5).pairs, c);
  std::string longtext;
  for (int i = 0; i < 10; ++i) longtext += "the senator slammed the plan after the vote ";
  auto pred = predict_token_bias(m, longtext);
  CHECK(pred.size() == 80);
  for (const auto& p : pred) CHECK(p.probability >= 0.0);
}

TEST_CASE("saved taggers reload with identical predictions") {
  testutil::TempDir dir;
  auto m = train_tagger(synth::planted_pairs(40, 5).pairs, tiny(2));
  m.save(dir / "tagger.json");
  auto back = TaggerModel::load(dir / "tagger.json");
  auto a = predict_token_bias(m, "the mayor exposed the deal");
  auto b = predict_token_bias(back, "the mayor exposed the deal");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].probability == b[i].probability);
}

TEST_CASE("training is deterministic for a seed") {
  auto pairs = synth::planted_pairs(50, 5).pairs;
  auto a = train_tagger(pairs, tiny(2));
  auto b = train_tagger(pairs, tiny(2));
  CHECK(a.to_json() == b.to_json());
}
