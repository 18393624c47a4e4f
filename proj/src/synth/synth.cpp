#include "mmdebias/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mmdebias/common/error.hpp"
#include "mmdebias/common/text.hpp"

namespace mmdebias::synth {

namespace {

const std::vector<std::pair<std::string, std::string>> kVerbs = {
    {"exposed", "described"}, {"slammed", "criticized"}, {"blasted", "questioned"}, {"branded", "called"}};
const std::vector<std::pair<std::string, std::string>> kAdjectives = {{"unprincipled", "experienced"},
                                                                       {"radical", "new"},
                                                                       {"shameful", "former"},
                                                                       {"notorious", "known"},
                                                                       {"extremist", "independent"}};
const std::vector<std::string> kNeutralVerbs = {"described", "criticized", "questioned", "called", "seen", "named"};
const std::vector<std::string> kNeutralAdjectives = {"experienced", "new", "former", "known", "independent",
                                                     "local",       "senior"};
const std::vector<std::string> kSubjects = {"john mccain", "john", "the senator", "the governor", "the mayor",
                                            "the minister", "the candidate", "her rival", "the chairman"};
const std::vector<std::string> kRoles = {"politician", "leader", "candidate", "official", "lawmaker", "activist"};
const std::vector<std::string> kObjects = {"the plan", "the bill", "the proposal", "the agency", "the deal"};
const std::vector<std::string> kTails = {"", "in the report", "after the vote", "during the debate", "last week",
                                         "on tuesday", "in a statement"};

const std::vector<std::vector<std::string>> kTopics = {
    {"budget", "taxes", "trade", "tariffs", "jobs", "inflation", "markets", "wages", "deficit", "exports", "banks",
     "growth"},
    {"climate", "emissions", "energy", "carbon", "solar", "drought", "forests", "pollution", "coal", "wind", "oceans",
     "warming"}};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.index(v.size())];
}

bool starts_with_vowel(const std::string& w) { return !w.empty() && std::string("aeiou").find(w[0]) != std::string::npos; }

struct Built {
  std::string biased, neutral;
};

// One sentence with the verb slot, the adjective slot or both planted.
Built build_sentence(Rng& rng) {
  int mode = static_cast<int>(rng.index(5));  // 0,1: verb; 2,3: adjective; 4: both
  bool verb_b = mode <= 1 || mode == 4;
  bool adj_b = mode >= 2;
  bool object_form = !adj_b && rng.uniform() < 0.4;

  const auto& subj = pick(kSubjects, rng);
  std::string vb, vn, ab, an;
  if (verb_b) {
    const auto& p = pick(kVerbs, rng);
    vb = p.first;
    vn = p.second;
  } else {
    vb = vn = pick(kNeutralVerbs, rng);
  }
  if (adj_b) {
    const auto& p = pick(kAdjectives, rng);
    ab = p.first;
    an = p.second;
  } else {
    ab = an = pick(kNeutralAdjectives, rng);
  }
  std::string tail = pick(kTails, rng);
  auto assemble = [&](const std::string& v, const std::string& a) {
    std::string s = subj + " " + v;
    if (object_form)
      s += " " + pick(kObjects, rng);
    else
      s += std::string(" as ") + (starts_with_vowel(a) ? "an " : "a ") + a + " " + kRoles[rng.index(kRoles.size())];
    if (!tail.empty()) s += " " + tail;
    return s;
  };
  // Draw the shared random choices once so both sides agree outside the planted slots.
  auto state = rng.engine();
  Built b;
  b.biased = assemble(vb, ab);
  rng.engine() = state;
  b.neutral = assemble(vn, an);
  return b;
}

bool is_planted(const std::string& w) {
  for (const auto& p : kVerbs)
    if (p.first == w) return true;
  for (const auto& p : kAdjectives)
    if (p.first == w) return true;
  return false;
}

void fill(Image& img, int x0, int y0, int x1, int y1, double r, double g, double b) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      auto* px = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
      px[0] = static_cast<float>(r);
      px[1] = static_cast<float>(g);
      px[2] = static_cast<float>(b);
    }
}

std::string padded(std::size_t i, std::size_t width) {
  auto s = std::to_string(i);
  return s.size() < width ? std::string(width - s.size(), '0') + s : s;
}

std::string topical_sentence(int topic, Rng& rng) {
  std::vector<std::string> words;
  for (int w = 0; w < 5; ++w) words.push_back(pick(kTopics[static_cast<std::size_t>(topic)], rng));
  return "the debate over " + text::join(words, " ") + " continues";
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

const std::vector<std::pair<std::string, std::string>>& biased_lexicon() {
  static const auto all = [] {
    auto v = kVerbs;
    v.insert(v.end(), kAdjectives.begin(), kAdjectives.end());
    return v;
  }();
  return all;
}

PlantedPairs planted_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  PlantedPairs out;
  for (std::size_t i = 0; i < n; ++i) {
    auto b = build_sentence(rng);
    corpus::NeutralityPair p{"p" + std::to_string(i), text::split_words(b.biased), text::split_words(b.neutral)};
    std::vector<std::size_t> planted;
    for (std::size_t w = 0; w < p.biased_tokens.size(); ++w)
      if (is_planted(p.biased_tokens[w])) planted.push_back(w);
    out.pairs.push_back(std::move(p));
    out.planted.push_back(std::move(planted));
  }
  return out;
}

std::vector<neutralize::InfillExample> neutral_examples(const std::vector<corpus::NeutralityPair>& pairs) {
  std::vector<neutralize::InfillExample> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.neutral_tokens, {}});
  return out;
}

const std::vector<std::string>& topic_words(int topic) {
  if (topic < 0 || topic >= static_cast<int>(kTopics.size())) throw ValidationError("unknown topic");
  return kTopics[static_cast<std::size_t>(topic)];
}

Image topic_band_image(int topic, int band, Rng& rng, const ImageStyle& style) {
  if (band < -1 || band > 1) throw ValidationError("band must be -1, 0 or 1");
  Image img{style.size, style.size, 3, std::vector<float>(static_cast<std::size_t>(style.size) * style.size * 3)};
  double r = topic == 0 ? 0.70 : 0.30, g = 0.45, b = topic == 0 ? 0.30 : 0.70;
  double jitter = rng.normal(0.0, 0.03);
  fill(img, 0, 0, style.size, style.size, r + jitter, g + jitter, b + jitter);
  int half = style.size / 2;
  double cue = 0.5 + band * style.band_cue;
  fill(img, 0, 0, half, half, cue, cue, cue);
  for (auto& p : img.pixels) p = clamp01(p + rng.normal(0.0, style.noise));
  return img;
}

std::vector<GeometryDoc> geometry_corpus(std::size_t per_cell, std::uint64_t seed, const ImageStyle& style) {
  Rng rng(seed);
  std::vector<GeometryDoc> out;
  static const std::vector<std::string> filler = {"report", "today", "officials", "said", "new", "week", "plan",
                                                  "public"};
  for (int topic = 0; topic < 2; ++topic)
    for (int band = -1; band <= 1; ++band)
      for (std::size_t i = 0; i < per_cell; ++i) {
        GeometryDoc d;
        d.topic = topic;
        d.band = band;
        d.bias = 0.8 * band + rng.uniform(-0.02, 0.02);
        std::vector<std::string> words;
        for (int w = 0; w < 6; ++w) words.push_back(pick(topic_words(topic), rng));
        for (int w = 0; w < 3; ++w) words.push_back(pick(filler, rng));
        rng.shuffle(words);
        d.text = text::join(words, " ");
        d.image = topic_band_image(topic, band, rng, style);
        d.id = "g" + std::to_string(topic) + "lnr"[band + 1] + padded(i, 3);
        out.push_back(std::move(d));
      }
  return out;
}

double mean_brightness(const Image& img) {
  if (img.empty()) throw ValidationError("empty image");
  double s = 0.0;
  for (float p : img.pixels) s += p;
  return s / static_cast<double>(img.pixels.size());
}

std::vector<LabeledSynthImage> brightness_images(std::size_t n, std::uint64_t seed, int size) {
  Rng rng(seed);
  std::vector<LabeledSynthImage> out;
  for (std::size_t i = 0; i < n; ++i) {
    Image img{size, size, 3, std::vector<float>(static_cast<std::size_t>(size) * size * 3)};
    double level = rng.uniform(0.15, 0.85);
    for (auto& p : img.pixels) p = clamp01(level + rng.normal(0.0, 0.1));
    double label = std::clamp(2.0 * mean_brightness(img) - 1.0, -1.0, 1.0);
    out.push_back({std::move(img), label});
  }
  return out;
}

PipelineFixture pipeline_fixture(std::size_t n_articles, std::size_t n_pairs, std::uint64_t seed) {
  static const std::vector<std::pair<std::string, double>> sources = {
      {"leftwire", -0.8}, {"leanleft", -0.4}, {"centerpost", 0.0}, {"leanright", 0.4}, {"rightdaily", 0.8}};
  Rng rng(seed);
  PipelineFixture f;
  // Half the pairs carry a second, unedited topical sentence so the text
  // models see the article vocabulary.
  for (std::size_t i = 0; i < n_pairs; ++i) {
    auto b = build_sentence(rng);
    if (rng.uniform() < 0.5) {
      std::string clause = " . " + topical_sentence(static_cast<int>(rng.index(2)), rng);
      b.biased += clause;
      b.neutral += clause;
    }
    f.pairs.push_back({"p" + std::to_string(i), text::split_words(b.biased), text::split_words(b.neutral)});
  }
  for (std::size_t i = 0; i < n_articles; ++i) {
    const auto& [source, score] = sources[i % sources.size()];
    int topic = static_cast<int>((i / sources.size()) % 2);
    int band = score < -0.2 ? -1 : (score > 0.2 ? 1 : 0);
    auto planted = build_sentence(rng);
    std::string topical = topical_sentence(topic, rng);

    std::string id = "a" + padded(i, 3);
    corpus::Article a{id, source, planted.biased + ". " + topical + ".", "images/" + id + ".ppm",
                      topic == 0 ? "economy" : "climate", corpus::SourceScore(score)};
    f.images[a.id] = topic_band_image(topic, band, rng);
    f.articles.push_back(std::move(a));
  }
  return f;
}

void write_pipeline_fixture(const std::filesystem::path& dir, const PipelineFixture& f) {
  std::filesystem::create_directories(dir / "images");
  corpus::save_articles(dir / "articles.jsonl", f.articles);
  corpus::save_neutrality_pairs(dir / "pairs.tsv", f.pairs);
  std::ofstream labels(dir / "labels.tsv");
  if (!labels) throw IoError("cannot write " + (dir / "labels.tsv").string());
  for (const auto& a : f.articles) {
    auto it = f.images.find(a.id);
    if (it == f.images.end()) continue;
    write_netpbm(dir / a.image_ref, it->second);
    labels << a.image_ref << '\t' << a.source_score.value() << '\n';
  }
}

}  // namespace mmdebias::synth
